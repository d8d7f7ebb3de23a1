"""Cutoff families, counterterm schedules, and convergence diagnostics.

A cutoff family realizes a (possibly non-normalizable) base rule as sharp
truncations f^L = base * 1{omega <= L}.  The counterterm schedule trades the
bare excitation energy for a fixed dressed one,

    omega_bare(L) = omega_dressed + lam**2 ||f^L||_{-1}**2 ,

so the bare level rises exactly as fast as the self-energy pulls the dressed
level down and the vacuum-sector propagator denominator
omega_bare - z - lam**2 sigma(z) stays finite along the sweep.  The
diagnostics quantify resolvent convergence (norm and strong modes),
classify coupling classes from the norm table, and issue finite/diverging
verdicts for the energy statistics of the excited-vacuum state along the
sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .fock import FockBasis
from .grid import FormFactor, ModeGrid, power_form_factor, scale_norm, decay_exponent
from .linalg import SolveError
from .spinboson import (SpinBosonParams, SpinBosonResolvent, assemble_singular,
                        psi0_energy_stats, vacuum_propagator_element)

__all__ = [
    "CutoffFamily",
    "RenormSchedule",
    "Table1Row",
    "build_family",
    "counterterm",
    "resolvent_distance",
    "divergence_verdict",
    "classify_family",
    "table1_report",
    "propagator_element_sweep",
    "invertibility_probe",
    "DIVERGENCE_SLOPE_THRESHOLD",
]

NORM_ORDERS = (0, -1, -2)
DIVERGENCE_SLOPE_THRESHOLD = 0.1


@dataclass(frozen=True)
class CutoffFamily:
    """Sharp truncations of a base form factor, with a scale-norm table."""

    base: FormFactor
    cutoffs: np.ndarray
    realized: tuple
    norm_table: dict = field(repr=False)  # s -> per-cutoff norms

    def __len__(self):
        return len(self.realized)


def build_family(base: FormFactor, grid: ModeGrid, cutoffs) -> CutoffFamily:
    """Realize f^L = base * 1{omega <= L} for an increasing list of cutoffs.

    Raises
    ------
    ValueError
        If the cutoffs are not strictly increasing or exceed the grid's
        dispersion support (the truncation would silently saturate).
    """
    cutoffs = np.asarray(cutoffs, dtype=float)
    if cutoffs.size == 0 or np.any(np.diff(cutoffs) <= 0):
        raise ValueError("cutoffs must be strictly increasing")
    if cutoffs[-1] > grid.dispersion.max():
        raise ValueError("cutoff above grid dispersion support")
    realized = tuple(
        FormFactor(np.where(grid.dispersion <= lam_uv, base.values, 0.0),
                   label=f"{base.label}|cut{lam_uv:g}")
        for lam_uv in cutoffs)
    table = {s: np.array([scale_norm(f, s, grid) for f in realized])
             for s in NORM_ORDERS}
    return CutoffFamily(base=base, cutoffs=cutoffs, realized=realized,
                        norm_table=table)


@dataclass(frozen=True)
class RenormSchedule:
    """Per-cutoff bare energies keeping the dressed energy fixed.

    The identity bare(L) - counterterm(L) = dressed holds exactly per entry
    (the counterterm is computed once from the stored norm and reused).
    """

    dressed_omega_e: float
    lam: float
    counterterms: np.ndarray  # lam**2 ||f^L||_{-1}**2
    bare_omega_e: np.ndarray  # dressed + counterterm


def counterterm(dressed_omega_e: float, lam: float, family: CutoffFamily) -> RenormSchedule:
    cts = lam**2 * family.norm_table[-1] ** 2
    return RenormSchedule(
        dressed_omega_e=dressed_omega_e,
        lam=lam,
        counterterms=cts,
        bare_omega_e=dressed_omega_e + cts,
    )


def resolvent_distance(r1, r2, dim: int, z: complex, mode: str = "norm",
                       probes=8, iterations: int = 100, seed: int = 0) -> float:
    """Distance between two resolvents at z.

    ``r1`` and ``r2`` are callables (z, vector) -> vector applying the
    respective resolvents; both operators must share the same space of
    dimension ``dim``.

    mode="norm"
        Power iteration on (R1-R2)*(R1-R2); the adjoint is evaluated at
        conj(z) via R(z)* = R(conj z).
    mode="strong"
        max over probe vectors of ||(R1-R2) psi|| / ||psi||.  ``probes`` is
        either a count of seeded random probes or an explicit list of
        vectors.

    Deterministic for fixed (seed, probes).
    """
    zc = np.conj(z)

    def diff(zz, v):
        return r1(zz, v) - r2(zz, v)

    if mode == "norm":
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(iterations):
            w = diff(zc, diff(z, v))
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return 0.0
            v = w / nw
            est = float(np.linalg.norm(diff(z, v)))
        return est
    if mode == "strong":
        if isinstance(probes, int):
            rng = np.random.default_rng(seed)
            vectors = [rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
                       for _ in range(probes)]
        else:
            vectors = list(probes)
        worst = 0.0
        for v in vectors:
            v = np.asarray(v, dtype=complex)
            nv = np.linalg.norm(v)
            if nv == 0:
                continue
            worst = max(worst, float(np.linalg.norm(diff(z, v)) / nv))
        return worst
    raise ValueError(f"unknown mode {mode!r}")


def divergence_verdict(values, cutoffs, threshold: float = DIVERGENCE_SLOPE_THRESHOLD) -> str:
    """Finite/diverging verdict from the log-log slope over the top cutoff decade."""
    values = np.abs(np.asarray(values, dtype=float))
    cutoffs = np.asarray(cutoffs, dtype=float)
    top = cutoffs >= cutoffs[-1] / 10.0
    if top.sum() < 2:
        top = np.zeros_like(top, dtype=bool)
        top[-2:] = True
    v = values[top]
    if np.max(v) == 0.0:
        return "finite"
    v = np.maximum(v, 1e-300)
    slope = np.polyfit(np.log(cutoffs[top]), np.log(v), 1)[0]
    return "diverging" if slope > threshold else "finite"


def classify_family(family: CutoffFamily,
                    threshold: float = DIVERGENCE_SLOPE_THRESHOLD) -> str:
    """Coupling class from the norm table: "H", "H-1" or "H-2".

    "H" if ||f^L|| converges, "H-1" if only ||f^L||_{-1} converges, "H-2"
    if only ||f^L||_{-2} does.  Divergence is decided by the top-decade
    slope test on the squared norms.
    """
    for s, label in ((0, "H"), (-1, "H-1"), (-2, "H-2")):
        if divergence_verdict(family.norm_table[s] ** 2, family.cutoffs,
                              threshold) == "finite":
            return label
    raise ValueError("base rule is singular beyond the -2 scale on this grid")


@dataclass
class Table1Row:
    coupling_class: str          # "H", "H-1 \\ H", "H-2^r \\ H-1 (r<1)", ...
    witness: str                 # form-factor label or "(none)"
    approximation: str           # regular / norm-resolvent / strong-resolvent
    coupling_note: str           # "arbitrary" or "small"
    mean_verdict: str
    variance_verdict: str
    mean_values: np.ndarray | None = None
    variance_values: np.ndarray | None = None


_CLASS_ROWS = {
    "H": ("H", "regular", "arbitrary"),
    "H-1": ("H-1 \\ H", "norm-resolvent", "arbitrary"),
    "H-2:small": ("H-2^r \\ H-1 (r=1)", "strong-resolvent", "small"),
    "H-2:arbitrary": ("H-2^r \\ H-1 (r<1)", "strong-resolvent", "arbitrary"),
}


def table1_report(families, lam: float, omega_e: float, dressed_omega_e: float,
                  grid: ModeGrid, basis: FockBasis,
                  decay_n_max: int = 64) -> list:
    """Classify witness families and issue energy-statistics verdicts.

    For regular and H-1 witnesses the bare energy is the fixed ``omega_e``;
    for H-2 witnesses the counterterm schedule anchored at ``dressed_omega_e``
    supplies a diverging bare energy.  Mean and variance per cutoff are
    computed by applying the assembled Hamiltonian to the excited-vacuum
    state.  All four classification rows are always emitted; classes without
    a witness are reported with empty verdicts.
    """
    rows = []
    seen = set()
    for family in families:
        klass = classify_family(family)
        if klass == "H-2":
            fit = decay_exponent(family.base, 2.0, grid, decay_n_max)
            klass = "H-2:small" if fit.r_star >= 1.0 - 1e-9 else "H-2:arbitrary"
            schedule = counterterm(dressed_omega_e, lam, family)
            bares = schedule.bare_omega_e
        else:
            bares = np.full(len(family), omega_e)
        means, variances = [], []
        for f_cut, bare in zip(family.realized, bares):
            p = SpinBosonParams(omega_e=float(bare), lam=lam, f=f_cut)
            stats = psi0_energy_stats(p, grid, basis)
            means.append(stats["mean"])
            variances.append(stats["variance"])
        means = np.array(means)
        variances = np.array(variances)
        name, approx, coupling = _CLASS_ROWS[klass]
        rows.append(Table1Row(
            coupling_class=name,
            witness=family.base.label,
            approximation=approx,
            coupling_note=coupling,
            mean_verdict=divergence_verdict(means, family.cutoffs),
            variance_verdict=divergence_verdict(variances, family.cutoffs),
            mean_values=means,
            variance_values=variances,
        ))
        seen.add(klass)
    for klass in ("H", "H-1", "H-2:arbitrary", "H-2:small"):
        if klass not in seen:
            name, approx, coupling = _CLASS_ROWS[klass]
            rows.append(Table1Row(coupling_class=name, witness="(none)",
                                  approximation=approx, coupling_note=coupling,
                                  mean_verdict="", variance_verdict=""))
    order = {"H": 0, "H-1 \\ H": 1, "H-2^r \\ H-1 (r<1)": 2, "H-2^r \\ H-1 (r=1)": 3}
    rows.sort(key=lambda r: order[r.coupling_class])
    return rows


def propagator_element_sweep(family: CutoffFamily, bares, lam: float, z: complex,
                             grid: ModeGrid, basis: FockBasis) -> np.ndarray:
    """Vacuum-sector propagator matrix element per cutoff at bare energies."""
    out = []
    for f_cut, bare in zip(family.realized, np.asarray(bares, dtype=float)):
        p = SpinBosonParams(omega_e=float(bare), lam=lam, f=f_cut)
        out.append(vacuum_propagator_element(z, p, grid, basis))
    return np.array(out)


def invertibility_probe(family: CutoffFamily, dressed_omega_e: float, lams,
                        grid: ModeGrid, basis: FockBasis,
                        z_values=None) -> list:
    """Empirical coupling threshold probe for the dressed propagator.

    For the largest cutoff, reports per coupling value whether the dressed
    propagator solve succeeds on a grid of real z below the mass gap, and the
    minimum |<Omega, G(z) Omega>| encountered.  Reported as data only; no
    claim is made that the failure point equals any theoretical threshold.
    """
    if z_values is None:
        m = grid.mass_gap
        z_values = np.linspace(0.1 * m, 0.999 * m, 8)
    f_cut = family.realized[-1]
    nsq = float(family.norm_table[-1][-1] ** 2)
    rows = []
    for lam in lams:
        ct = lam**2 * nsq
        p = SpinBosonParams(omega_e=dressed_omega_e + ct, lam=float(lam), f=f_cut)
        ok = True
        min_den = np.inf
        for z in z_values:
            sigma0 = float(np.sum(grid.weights * np.abs(f_cut.values) ** 2
                                  / (grid.dispersion - z)))
            den = abs(p.omega_e - z - lam**2 * sigma0)
            min_den = min(min_den, den)
            try:
                vacuum_propagator_element(complex(z), p, grid, basis)
            except SolveError:
                ok = False
        rows.append({"lam": float(lam), "solve_ok": ok,
                     "min_vacuum_denominator": float(min_den)})
    return rows
