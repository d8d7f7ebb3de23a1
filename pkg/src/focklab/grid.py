"""One-particle mode space: quadrature grids, dispersion relations, scale norms.

The measure space is discretized as a one-dimensional interval ``[k_min, k_max]``
with midpoint or trapezoid quadrature on linearly or logarithmically spaced
cells.  A grid carries the sampled dispersion ``omega(k_i) >= mass_gap > 0``,
and single-particle scale norms are weighted sums

    ||f||_s^2 = sum_i w_i * omega_i**s * |f(k_i)|**2 .
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModeGrid",
    "FormFactor",
    "DecayFit",
    "build_grid",
    "scale_norm",
    "grid_inner",
    "power_form_factor",
    "decay_exponent",
]


@dataclass(frozen=True)
class ModeGrid:
    """Quadrature discretization of the one-particle measure space.

    Attributes
    ----------
    points : (M,) float array
        Strictly increasing mode coordinates k_i.
    weights : (M,) float array
        Positive quadrature weights w_i.
    dispersion : (M,) float array
        Samples omega(k_i); all >= mass_gap.
    mass_gap : float
        min_i omega_i, required strictly positive.
    """

    points: np.ndarray
    weights: np.ndarray
    dispersion: np.ndarray
    mass_gap: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        disp = np.asarray(self.dispersion, dtype=float)
        if not (pts.shape == wts.shape == disp.shape) or pts.ndim != 1:
            raise ValueError("points/weights/dispersion must be 1-d arrays of equal length")
        if pts.size == 0:
            raise ValueError("empty grid")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("points must be strictly increasing")
        if np.any(wts <= 0):
            raise ValueError("quadrature weights must be positive")
        if disp.min() <= 0:
            raise ValueError("dispersion must be strictly positive (mass gap)")
        for a in (pts, wts, disp):
            a.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)
        object.__setattr__(self, "dispersion", disp)
        object.__setattr__(self, "mass_gap", float(disp.min()))

    @property
    def size(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class FormFactor:
    """Complex amplitude sampled on grid points, with a free-form label."""

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 1:
            raise ValueError("form factor values must be a 1-d array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("form factor values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size


DISPERSION_RULES = {
    "linear": lambda k, m: k,
    "quadratic": lambda k, m: k**2,
    "massive": lambda k, m: np.sqrt(k**2 + m**2),
}


def build_grid(k_min, k_max, count, dispersion="linear", quadrature="midpoint",
               spacing="linear", mass=1.0) -> ModeGrid:
    """Build a quadrature grid on [k_min, k_max].

    Parameters
    ----------
    dispersion : str
        Named rule: "linear" (omega=k), "quadratic" (omega=k**2) or
        "massive" (omega=sqrt(k**2+mass**2)).
    quadrature : str
        "midpoint" (points at cell centers, weight = cell width) or
        "trapezoid" (points at cell edges, end weights halved).
    spacing : str
        "linear" or "log" cell spacing.

    Raises
    ------
    ValueError
        On empty grids, unknown rules, or a dispersion violating the mass gap.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not k_min < k_max:
        raise ValueError("need k_min < k_max")
    if dispersion not in DISPERSION_RULES:
        raise ValueError(f"unknown dispersion rule {dispersion!r}")
    if spacing == "linear":
        edges = np.linspace(k_min, k_max, count + 1)
    elif spacing == "log":
        if k_min <= 0:
            raise ValueError("log spacing requires k_min > 0")
        edges = np.geomspace(k_min, k_max, count + 1)
    else:
        raise ValueError(f"unknown spacing {spacing!r}")

    if quadrature == "midpoint":
        points = 0.5 * (edges[:-1] + edges[1:])
        weights = np.diff(edges)
    elif quadrature == "trapezoid":
        if count < 2:
            raise ValueError("trapezoid rule needs count >= 2")
        points = np.linspace(k_min, k_max, count) if spacing == "linear" \
            else np.geomspace(k_min, k_max, count)
        cell = np.diff(points)
        weights = np.zeros(count)
        weights[:-1] += 0.5 * cell
        weights[1:] += 0.5 * cell
    else:
        raise ValueError(f"unknown quadrature rule {quadrature!r}")

    disp = DISPERSION_RULES[dispersion](points, mass)
    if np.min(disp) <= 0:
        raise ValueError("dispersion rule yields non-positive energies on the grid")
    return ModeGrid(points=points, weights=weights, dispersion=disp,
                    mass_gap=float(np.min(disp)))


def power_form_factor(grid: ModeGrid, alpha: float, label: str | None = None) -> FormFactor:
    """Power-law form factor f(k) = k**(-alpha) sampled on the grid."""
    if label is None:
        label = f"k^-{alpha:g}" if alpha else "1"
    return FormFactor(values=grid.points ** (-alpha), label=label)


def _check_compatible(f: FormFactor, grid: ModeGrid):
    if len(f) != grid.size:
        raise ValueError(f"form factor length {len(f)} != grid size {grid.size}")


def scale_norm(f: FormFactor, s: float, grid: ModeGrid) -> float:
    """Scale norm ||f||_s = (sum_i w_i omega_i**s |f_i|**2)**0.5."""
    _check_compatible(f, grid)
    return float(np.sqrt(np.sum(grid.weights * grid.dispersion**s * np.abs(f.values) ** 2)))


def grid_inner(f: FormFactor, g: FormFactor, grid: ModeGrid) -> complex:
    """Weighted inner product <f, g> = sum_i w_i conj(f_i) g_i."""
    _check_compatible(f, grid)
    _check_compatible(g, grid)
    return complex(np.sum(grid.weights * np.conj(f.values) * g.values))


@dataclass(frozen=True)
class DecayFit:
    """Result of the shifted-denominator decay fit.

    p_fit is the least-squares slope of log I_n vs log n over the upper half
    of [1, n_max], where I_n = sum_i w_i |f_i|^2 / (omega_i + (n-1) m)**s.
    The membership claim is r in [s-1, r_star] with r_star = min(1, s - p_fit).
    """

    p_fit: float
    r_star: float
    integrals: np.ndarray = field(repr=False)


def decay_exponent(f: FormFactor, s: float, grid: ModeGrid, n_max: int) -> DecayFit:
    """Estimate the decay of the shifted integrals I_n and the admissible r range.

    Raises
    ------
    ValueError
        If s is outside (1, 2], n_max < 8, or some I_n vanishes (trivial f).
    """
    if not (1.0 < s <= 2.0):
        raise ValueError("s must lie in (1, 2]")
    if n_max < 8:
        raise ValueError("n_max must be >= 8")
    _check_compatible(f, grid)
    m = grid.mass_gap
    n = np.arange(1, n_max + 1)
    dens = (grid.dispersion[None, :] + (n[:, None] - 1) * m) ** s
    integrals = np.sum(grid.weights * np.abs(f.values) ** 2 / dens, axis=1)
    if np.any(integrals == 0):
        raise ValueError("trivial form factor: some I_n vanish")
    lo = n_max // 2
    window = n >= lo
    p_fit = float(np.polyfit(np.log(n[window]), np.log(integrals[window]), 1)[0])
    r_star = min(1.0, s - p_fit)
    return DecayFit(p_fit=p_fit, r_star=r_star, integrals=integrals)
