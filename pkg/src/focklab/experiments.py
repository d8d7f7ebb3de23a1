"""Named batch experiments: deterministic CSV/JSON artifacts plus a manifest.

Every experiment writes its tables through one writer with fixed float
formatting (17 significant digits, locale-independent), then a manifest
listing each written file with its SHA-256.  Rerunning a config with the
same seed reproduces the artifacts byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import gsb as gsbmod
from . import multiatom as mam
from . import renorm
from .blocks import BlockOperator
from .fock import build_basis, vacuum
from .grid import FormFactor, ModeGrid, build_grid, decay_exponent, power_form_factor
from .linalg import dense_inverse_oracle, lowest_eigenpairs
from .spinboson import (SpinBosonParams, SpinBosonResolvent, assemble_regular,
                        excited_vacuum)

EXPERIMENTS = {}


def experiment(name, description):
    def deco(fn):
        EXPERIMENTS[name] = (fn, description)
        return fn
    return deco


def fmt(x) -> str:
    """Fixed 17-significant-digit float formatting (deterministic CSV cells)."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    xf = float(x)
    if math.isnan(xf):
        return "nan"
    return format(xf, ".17g")


class ArtifactWriter:
    """Single funnel for output files; records hashes for the manifest."""

    def __init__(self, outdir: Path):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.files = []

    def _register(self, path: Path):
        data = path.read_bytes()
        self.files.append({
            "name": path.name,
            "sha256": hashlib.sha256(data).hexdigest(),
            "bytes": len(data),
        })

    def write_csv(self, name: str, header, rows):
        path = self.outdir / name
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(fmt(cell) for cell in row) + "\n")
        self._register(path)

    def write_json(self, name: str, payload):
        path = self.outdir / name
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self._register(path)

    def write_manifest(self, config_bytes: bytes, experiment_name: str):
        payload = {
            "schema": 1,
            "experiment": experiment_name,
            "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
            "files": sorted(self.files, key=lambda f: f["name"]),
        }
        path = self.outdir / "manifest.json"
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def grid_from_config(cfg: dict) -> ModeGrid:
    return build_grid(
        k_min=cfg["k_min"], k_max=cfg["k_max"], count=cfg["count"],
        dispersion=cfg.get("dispersion", "linear"),
        quadrature=cfg.get("quadrature", "midpoint"),
        spacing=cfg.get("spacing", "linear"),
        mass=cfg.get("mass", 1.0),
    )


def form_factor_from_config(cfg: dict, grid: ModeGrid) -> FormFactor:
    if cfg.get("type", "power") != "power":
        raise ValueError(f"unknown form factor rule {cfg.get('type')!r}")
    return power_form_factor(grid, alpha=cfg.get("alpha", 0.0),
                             label=cfg.get("label"))


def _z_list(pairs):
    return [complex(re, im) for re, im in pairs]


def _sb_params(model: dict, grid: ModeGrid) -> SpinBosonParams:
    return SpinBosonParams(
        omega_e=model["omega_e"], lam=model["lam"],
        f=form_factor_from_config(model["form_factor"], grid),
        omega_g=model.get("omega_g", 0.0),
    )


@experiment("spectrum", "lowest eigenpairs of the assembled two-level Hamiltonian")
def run_spectrum(config, writer, seed):
    grid = grid_from_config(config["grid"])
    basis = build_basis(grid.size, config["basis"]["n_max"])
    p = _sb_params(config["params"], grid)
    h = assemble_regular(p, grid, basis).to_sparse()
    count = config["params"].get("count", 4)
    vals, _, residuals = lowest_eigenpairs(h, count)
    writer.write_csv("eigenvalues.csv", ["index", "eigenvalue", "residual"],
                     [(i, v, r) for i, (v, r) in enumerate(zip(vals, residuals))])


@experiment("resolvent-check", "factorized resolvent against the dense inverse")
def run_resolvent_check(config, writer, seed):
    grid = grid_from_config(config["grid"])
    basis = build_basis(grid.size, config["basis"]["n_max"])
    p = _sb_params(config["params"], grid)
    res = SpinBosonResolvent(p, grid, basis)
    h = assemble_regular(p, grid, basis).to_sparse()
    rng = np.random.default_rng(seed)
    rows = []
    for z in _z_list(config["params"]["z_points"]):
        dense = dense_inverse_oracle(h - z * np.eye(h.shape[0]))
        err = 0.0
        for _ in range(3):
            v = rng.standard_normal(2 * basis.dim) + 1j * rng.standard_normal(2 * basis.dim)
            got = res.apply_stacked(z, v)
            want = dense @ v
            err = max(err, float(np.linalg.norm(got - want) / np.linalg.norm(want)))
        rows.append((z.real, z.imag, err))
    writer.write_csv("resolvent_check.csv", ["z_re", "z_im", "max_rel_error"], rows)


@experiment("renorm-sweep", "cutoff sweep: norms, counterterms, resolvent distances")
def run_renorm_sweep(config, writer, seed):
    grid = grid_from_config(config["grid"])
    basis = build_basis(grid.size, config["basis"]["n_max"])
    params = config["params"]
    lam = params["lam"]
    base = form_factor_from_config(params["rule"], grid)
    family = renorm.build_family(base, grid, params["cutoffs"])
    use_ct = params.get("counterterm", False)
    dressed = params.get("dressed_omega_e", params.get("omega_e", 1.0))
    if use_ct:
        schedule = renorm.counterterm(dressed, lam, family)
        bares = schedule.bare_omega_e
    else:
        bares = np.full(len(family), params["omega_e"])
    z = complex(*params.get("z", [0.0, 1.0]))
    iterations = params.get("iterations", 100)
    probes = params.get("probes", 8)

    def stats_for(i):
        p = SpinBosonParams(omega_e=float(bares[i]), lam=lam, f=family.realized[i])
        from .spinboson import psi0_energy_stats
        return psi0_energy_stats(p, grid, basis)

    workers = config.get("workers", 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_stats = list(pool.map(stats_for, range(len(family))))
    else:
        all_stats = [stats_for(i) for i in range(len(family))]

    appliers = [
        SpinBosonResolvent(
            SpinBosonParams(omega_e=float(bares[i]), lam=lam, f=family.realized[i]),
            grid, basis)
        for i in range(len(family))
    ]
    rows = []
    for i in range(len(family)):
        if i == 0:
            dn, ds = float("nan"), float("nan")
        else:
            dn = renorm.resolvent_distance(
                appliers[i - 1].apply_stacked, appliers[i].apply_stacked,
                2 * basis.dim, z, mode="norm", iterations=iterations, seed=seed)
            ds = renorm.resolvent_distance(
                appliers[i - 1].apply_stacked, appliers[i].apply_stacked,
                2 * basis.dim, z, mode="strong", probes=probes, seed=seed)
        rows.append((
            family.cutoffs[i],
            family.norm_table[0][i], family.norm_table[-1][i], family.norm_table[-2][i],
            bares[i], all_stats[i]["mean"], all_stats[i]["variance"], dn, ds,
        ))
    writer.write_csv(
        "renorm_sweep.csv",
        ["Lambda", "norm_0", "norm_m1", "norm_m2", "omega_bare",
         "mean_E", "var_E", "res_dist_norm", "res_dist_strong"],
        rows)

    elements = renorm.propagator_element_sweep(family, bares, lam, z, grid, basis)
    verdict = {
        "coupling_class": renorm.classify_family(family),
        "counterterm": bool(use_ct),
        "dressed_omega_e": dressed if use_ct else None,
        "mean_verdict": renorm.divergence_verdict(
            [s["mean"] for s in all_stats], family.cutoffs),
        "variance_verdict": renorm.divergence_verdict(
            [s["variance"] for s in all_stats], family.cutoffs),
        "vacuum_propagator_element": [[e.real, e.imag] for e in elements],
    }
    if params.get("lambda_probe"):
        verdict["invertibility_probe"] = renorm.invertibility_probe(
            family, dressed, params["lambda_probe"], grid, basis)
    writer.write_json("verdicts.json", verdict)


@experiment("table1", "coupling-class classification of witness form factors")
def run_table1(config, writer, seed):
    grid = grid_from_config(config["grid"])
    basis = build_basis(grid.size, config["basis"]["n_max"])
    params = config["params"]
    families = [
        renorm.build_family(form_factor_from_config(w, grid), grid, params["cutoffs"])
        for w in params["witnesses"]
    ]
    rows = renorm.table1_report(families, params["lam"], params["omega_e"],
                                params["dressed_omega_e"], grid, basis)
    writer.write_csv(
        "table1.csv",
        ["coupling_class", "witness", "approximation", "coupling_constant",
         "mean_verdict", "variance_verdict"],
        [(r.coupling_class, r.witness, r.approximation, r.coupling_note,
          r.mean_verdict, r.variance_verdict) for r in rows])
    detail = []
    for r in rows:
        if r.mean_values is None:
            continue
        for lam_uv, mean, var in zip(params["cutoffs"], r.mean_values, r.variance_values):
            detail.append((r.witness, lam_uv, mean, var))
    writer.write_csv("table1_detail.csv",
                     ["witness", "Lambda", "mean_E", "var_E"], detail)
    writer.write_json("verdicts.json", [
        {"coupling_class": r.coupling_class, "witness": r.witness,
         "approximation": r.approximation, "coupling_constant": r.coupling_note,
         "mean": r.mean_verdict, "variance": r.variance_verdict}
        for r in rows])


@experiment("gsb", "two-sector model: factorized resolvent against the dense inverse")
def run_gsb(config, writer, seed):
    grid = grid_from_config(config["grid"])
    basis = build_basis(grid.size, config["basis"]["n_max"])
    params = config["params"]

    def matrix(spec, rows, cols):
        re = np.asarray(spec["re"], dtype=float)
        im = np.asarray(spec.get("im", np.zeros_like(re)), dtype=float)
        m = re + 1j * im
        if m.shape != (rows, cols):
            raise ValueError("matrix shape mismatch in config")
        return m

    dim_e, dim_g = params["dim_e"], params["dim_g"]
    channels = tuple(
        gsbmod.GsbChannel(
            sigma_plus=matrix(ch["sigma_plus"], dim_e, dim_g),
            f=form_factor_from_config(ch["form_factor"], grid))
        for ch in params["channels"])
    p = gsbmod.GsbParams(
        E_e=matrix(params["E_e"], dim_e, dim_e),
        E_g=matrix(params["E_g"], dim_g, dim_g),
        channels=channels, lam=params["lam"])
    h = gsbmod.assemble_gsb(p, grid, basis)
    hs = h.to_sparse()
    rng = np.random.default_rng(seed)
    rows = []
    for z in _z_list(params["z_points"]):
        dense = dense_inverse_oracle(hs - z * np.eye(hs.shape[0]))
        err = 0.0
        for _ in range(3):
            ve = rng.standard_normal(dim_e * basis.dim) + 1j * rng.standard_normal(dim_e * basis.dim)
            vg = rng.standard_normal(dim_g * basis.dim) + 1j * rng.standard_normal(dim_g * basis.dim)
            xe, xg, _ = gsbmod.gsb_resolvent_apply(z, p, grid, basis, ve, vg)
            got = np.concatenate([xe, xg])
            want = dense @ np.concatenate([ve, vg])
            err = max(err, float(np.linalg.norm(got - want) / np.linalg.norm(want)))
        rows.append((z.real, z.imag, err))
    writer.write_csv("gsb_check.csv", ["z_re", "z_im", "max_rel_error"], rows)


@experiment("multiatom", "N-atom block-tridiagonal assembly and solver check")
def run_multiatom(config, writer, seed):
    grid = grid_from_config(config["grid"])
    basis = build_basis(grid.size, config["basis"]["n_max"])
    params = config["params"]
    n = params["n_atoms"]
    fs = tuple(form_factor_from_config(ff, grid) for ff in params["form_factors"])
    spin_spin = None
    if params.get("spin_spin"):
        spin_spin = {
            int(j): np.asarray(m["re"], dtype=float) + 1j * np.asarray(
                m.get("im", np.zeros_like(np.asarray(m["re"], dtype=float))), dtype=float)
            for j, m in params["spin_spin"].items()}
    p = mam.MultiAtomParams(
        omega_e=params["omega_e"], omega_g=params["omega_g"], fs=fs,
        lam=params["lam"], spin_spin=spin_spin)
    h = mam.assemble_multi(p, grid, basis)
    rng = np.random.default_rng(seed)
    rows = []
    hs = h.to_sparse()
    dense_ok = hs.shape[0] <= 2000
    dense = None
    for z in _z_list(params["z_points"]):
        if dense_ok:
            dense = dense_inverse_oracle(hs - z * np.eye(hs.shape[0]))
        v = rng.standard_normal(h.dim) + 1j * rng.standard_normal(h.dim)
        x, report = mam.block_tridiag_resolvent(z, h, v)
        err = float("nan")
        if dense is not None:
            want = dense @ v
            err = float(np.linalg.norm(x - want) / np.linalg.norm(want))
        rows.append((z.real, z.imag, report.residual, err))
    writer.write_csv("multiatom_check.csv",
                     ["z_re", "z_im", "rel_residual", "rel_error_vs_dense"], rows)


@experiment("decay-class", "shifted-integral decay exponent and admissible r range")
def run_decay_class(config, writer, seed):
    grid = grid_from_config(config["grid"])
    params = config["params"]
    f = form_factor_from_config(params["form_factor"], grid)
    fit = decay_exponent(f, params["s"], grid, params["n_max"])
    writer.write_csv("decay_summary.csv",
                     ["label", "s", "n_max", "p_fit", "r_star"],
                     [(f.label, params["s"], params["n_max"], fit.p_fit, fit.r_star)])
    writer.write_csv("decay_integrals.csv", ["n", "I_n"],
                     [(i + 1, v) for i, v in enumerate(fit.integrals)])


def run_experiment(config: dict, outdir: Path, config_bytes: bytes):
    name = config["experiment"]
    fn, _ = EXPERIMENTS[name]
    writer = ArtifactWriter(outdir)
    fn(config, writer, config.get("seed", 0))
    writer.write_manifest(config_bytes, name)
