"""Radial p-Laplacian, supersolution residuals, remainder terms and the
exterior Hardy inequalities.

A positive v with -Delta_p v >= V v^(p-1) certifies the Hardy weight V.  For
radial v,

    Delta_p v = r^(1-d) (r^(d-1) |v'|^(p-2) v')',

which is closed form on powers:
Delta_p r^a = |a|^(p-2) a ((a-1)(p-1) + d - 1) r^((a-1)(p-1)-1).
Other profiles are differentiated numerically with a conservative
second-order stencil in t = log r.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .criticality import log_cutoff
from .fields import (
    Field,
    Params,
    RadialGrid,
    WeightSpec,
    hardy_constant,
    make_log_radial_grid,
    radial_derivative,
)

PROFILE_KINDS = ("power", "log-power", "product", "sampled")


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """v(r) = coef * r^a * log(r/R)^alpha in its various special cases.

    ``power`` uses a; ``log-power`` uses alpha and R; ``product`` uses all
    three; ``sampled`` interpolates (nodes, values) with a cubic spline.
    """

    kind: str
    a: float = 0.0
    alpha: float = 0.0
    R: float = 1.0
    coef: float = 1.0
    nodes: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "sampled":
            if self.nodes is None or self.values is None:
                raise ValueError("sampled profiles need nodes and values")
            object.__setattr__(self, "_spline", CubicSpline(np.log(self.nodes), self.values))

    @classmethod
    def power(cls, a: float, coef: float = 1.0) -> "RadialProfile":
        return cls("power", a=a, coef=coef)

    @classmethod
    def log_power(cls, alpha: float, R: float, coef: float = 1.0) -> "RadialProfile":
        return cls("log-power", alpha=alpha, R=R, coef=coef)

    @classmethod
    def sampled(cls, nodes, values) -> "RadialProfile":
        return cls("sampled", nodes=np.asarray(nodes, float), values=np.asarray(values, float))

    def _check(self, r: np.ndarray) -> None:
        if np.any(r <= 0):
            raise ValueError("profiles are singular at r = 0")
        if self.kind in ("log-power", "product") and np.any(r <= self.R):
            raise ValueError(f"log profile is singular for r <= R = {self.R}")

    def derivatives(self, r):
        """(v, v', v'') at r."""
        r = np.asarray(r, dtype=float)
        self._check(r)
        if self.kind == "sampled":
            t = np.log(r)
            s = self._spline
            v, vt, vtt = s(t), s(t, 1), s(t, 2)
            return v, vt / r, (vtt - vt) / r**2
        c = self.coef
        # power part P = r^a and log part G = l^alpha, both with their derivatives
        a = self.a if self.kind in ("power", "product") else 0.0
        P, P1, P2 = r**a, a * r ** (a - 1.0), a * (a - 1.0) * r ** (a - 2.0)
        if self.kind == "power":
            return c * P, c * P1, c * P2
        al = self.alpha
        ell = np.log(r / self.R)
        G = ell**al
        G1 = al * ell ** (al - 1.0) / r
        G2 = al * ((al - 1.0) * ell ** (al - 2.0) - ell ** (al - 1.0)) / r**2
        return c * P * G, c * (P1 * G + P * G1), c * (P2 * G + 2.0 * P1 * G1 + P * G2)

    def __call__(self, r):
        return self.derivatives(r)[0]


def _power_p_laplacian(v: RadialProfile, p: float, d: int) -> RadialProfile:
    a, c = v.a, v.coef
    if a == 0.0 or c == 0.0:
        return RadialProfile.power(0.0, coef=0.0)
    k = abs(a) ** (p - 2.0) * a * ((a - 1.0) * (p - 1.0) + d - 1.0)
    return RadialProfile.power((a - 1.0) * (p - 1.0) - 1.0, coef=abs(c) ** (p - 2.0) * c * k)


def _uniform_log_step(grid: RadialGrid) -> float:
    t = np.log(grid.nodes)
    h = np.diff(t)
    if np.max(np.abs(h - h.mean())) > 1e-9 * h.mean():
        raise ValueError("the finite-difference p-Laplacian needs a grid uniform in log r")
    return float(h.mean())


def fd_p_laplacian(values, grid: RadialGrid, p: float, d: int) -> Field:
    """Second-order conservative stencil for Delta_p on a log-uniform grid.

    With t = log r, Delta_p v = e^(-d t) dF/dt where F = e^((d-p) t) |v_t|^(p-2) v_t.
    F lives at the cell midpoints r = sqrt(r_i r_{i+1}); the result is
    returned on the interior nodes.
    """
    h = _uniform_log_step(grid)
    t = np.log(grid.nodes)
    v = np.asarray(values, dtype=float)
    vt = np.diff(v) / h
    tm = 0.5 * (t[1:] + t[:-1])
    F = np.exp((d - p) * tm) * np.abs(vt) ** (p - 2.0) * vt
    lap = np.exp(-d * t[1:-1]) * np.diff(F) / h
    inner = RadialGrid(grid.nodes[1:-1], grid.weights[1:-1], d)
    return Field(inner, lap)


def radial_p_laplacian(v: RadialProfile, p: float, d: int, grid: RadialGrid | None = None, method: str = "auto"):
    """Delta_p v: a power RadialProfile in closed form, else a sampled Field.

    ``method="fd"`` forces the finite-difference stencil (needs ``grid``).
    """
    if p <= 1:
        raise ValueError("the p-Laplacian needs p > 1")
    if method not in ("auto", "closed", "fd"):
        raise ValueError(f"unknown method {method!r}")
    if v.kind == "power" and method != "fd":
        return _power_p_laplacian(v, p, d)
    if method == "closed":
        raise ValueError(f"no closed form for {v.kind!r} profiles")
    if grid is None:
        raise ValueError("a grid is needed for the finite-difference p-Laplacian")
    return fd_p_laplacian(v(grid.nodes), grid, p, d)


@dataclass
class Residual:
    """Pointwise -Delta_p v - V v^(p-1) with the size of its two terms."""

    r: np.ndarray
    residual: np.ndarray
    scale: np.ndarray

    @property
    def minimum(self) -> float:
        return float(np.min(self.residual))

    @property
    def max_relative(self) -> float:
        return float(np.max(np.abs(self.residual) / self.scale))


def residual_profile(v: RadialProfile, V: WeightSpec, p: float, d: int, grid: RadialGrid, method: str = "auto") -> Residual:
    lap = radial_p_laplacian(v, p, d, grid, method)
    if isinstance(lap, RadialProfile):
        r = grid.nodes
        lap_vals = lap(r)
    else:
        r = lap.grid.nodes
        lap_vals = lap.values
    vals = v(r)
    if np.any(vals <= 0):
        raise ValueError("supersolution candidates must be positive on the grid")
    pot = V.evaluate(r, p, d) * vals ** (p - 1.0)
    scale = np.maximum(np.abs(lap_vals), np.abs(pot))
    scale = np.where(scale > 0, scale, 1.0)
    return Residual(r, -lap_vals - pot, scale)


def supersolution_residual(v: RadialProfile, V: WeightSpec, p: float, d: int, grid: RadialGrid, method: str = "auto") -> float:
    """min over nodes of -Delta_p v - V v^(p-1); >= -tol certifies V on the grid."""
    return residual_profile(v, V, p, d, grid, method).minimum


# ---------------------------------------------------------------------------
# remainder terms


def _radial_field(u: Field, d: int) -> Field:
    if u.is_polar:
        raise TypeError("expected a radial field")
    return u if u.grid.d == d else Field(u.grid.with_dim(d), u.values, u.dr)


def _require_remainder_range(p: float, d: int) -> Params:
    params = Params(p, d)
    params.require(2 <= p < d, "the weighted remainder needs 2 <= p < d")
    return params


def weighted_remainder(u: Field, p: float, d: int) -> float:
    """Integral of |grad(u |x|^gamma)|^p |x|^(p-d), gamma = (d-p)/p."""
    _require_remainder_range(p, d)
    u = _radial_field(u, d)
    r = u.grid.nodes
    g = (d - p) / p
    du = radial_derivative(u)
    w1 = du * r**g + g * u.values * r ** (g - 1.0)
    return u.grid.integrate(np.abs(w1) ** p * r ** (p - d))


def remainder_inequality_check(u: Field, p: float, d: int, c: float) -> float:
    """int |grad u|^p - mu_{p,d} int |u|^p/|x|^p - c * weighted_remainder(u)."""
    _require_remainder_range(p, d)
    u = _radial_field(u, d)
    r = u.grid.nodes
    energy = u.grid.integrate(np.abs(radial_derivative(u)) ** p)
    hardy = u.grid.integrate(np.abs(u.values) ** p * r ** (-p))
    return energy - hardy_constant(p, d) * hardy - c * weighted_remainder(u, p, d)


# ---------------------------------------------------------------------------
# exterior inequalities


@dataclass
class ExteriorHardyReport:
    ratio: float
    constant: float
    tol: float

    @property
    def holds(self) -> bool:
        return self.ratio >= self.constant - self.tol

    def to_dict(self) -> dict:
        return {"ratio": self.ratio, "constant": self.constant, "tol": self.tol, "holds": self.holds}


def exterior_constant(p: float, d: int) -> float:
    """|mu_{p,d}| for p != d and ((d-1)/d)^d for p = d."""
    if p == d:
        return ((d - 1.0) / d) ** d
    return hardy_constant(p, d)


def exterior_hardy_check(u: Field, p: float, d: int, R: float, tol: float = 1e-8) -> ExteriorHardyReport:
    """Hardy quotient of u supported in |x| > R against the exterior constant.

    For p != d the weight is |x|^-p; for p = d it is 1/(|x|^d log^d(|x|/R)).
    """
    u = _radial_field(u, d)
    r = u.grid.nodes
    live = np.abs(u.values) > 0
    if np.any(live & (r <= R)):
        raise ValueError(f"u must vanish on |x| <= R = {R}")
    energy = u.grid.integrate(np.abs(radial_derivative(u)) ** p)
    kind = "exterior-log" if p == d else "inverse-p-power"
    w = WeightSpec(kind, R=R if p == d else None).evaluate(np.where(live, r, 2.0 * R + r), p, d)
    den = u.grid.integrate(np.where(live, np.abs(u.values) ** p * w, 0.0))
    if not den > 0:
        raise ValueError("u vanishes identically")
    return ExteriorHardyReport(energy / den, exterior_constant(p, d), tol)


def exterior_sharpness_family(d: int, epsilon: float, n: int = 1 << 14) -> Field:
    """l^((d-1)/d) times a two-sided log cutoff in l, sampled in l = log(r/R).

    For radial u, int_{|x|>R} |grad u|^d dx = |S^{d-1}| int |du/dl|^d dl and
    int |u|^d / (|x|^d log^d(|x|/R)) dx = |S^{d-1}| int |u|^d / l^d dl, so the
    exterior p = d quotient is the one-dimensional Hardy quotient in l and
    does not depend on R.  The field lives on a grid in l with d = 1, which
    avoids the astronomically large radii r = R e^l.
    """
    k = (d - 1.0) / d
    e = epsilon
    grid = make_log_radial_grid(0.5 * e * e, 2.0 / (e * e), n, 1)
    ell = grid.nodes
    th, dth = log_cutoff(np.log(ell), math.log(1.0 / e), two_sided=True)
    return Field(grid, ell**k * th, ell ** (k - 1.0) * (k * th + dth))


def exterior_sharpness_probe(d: int, epsilons, n: int = 1 << 14) -> list:
    """Exterior p = d quotients along the sharpness family, one per epsilon.

    They decrease toward ((d-1)/d)^d as epsilon -> 0.
    """
    out = []
    for e in epsilons:
        u = exterior_sharpness_family(d, e, n)
        ell = u.grid.nodes
        energy = u.grid.integrate(np.abs(u.dr) ** d)
        hardy = u.grid.integrate(np.abs(u.values) ** d * ell ** (-float(d)))
        out.append(energy / hardy)
    return out


# ---------------------------------------------------------------------------
# inversion in the sphere |x| = R


def kelvin_check(u, d: int, R: float, n: int = 1 << 13, p: float | None = None, support=None):
    """Relative mismatches of the two conformal invariants under y = R^2 x/|x|^2.

    ``u`` is a radial closed form supported in B_R (callable with a
    ``derivative`` method).  Its image v(rho) = u(R^2/rho) has
    v'(rho) = -u'(R^2/rho) R^2/rho^2 and lives outside B_R.  The d-energy and
    the log-weighted Hardy term are computed on an inner grid and on an
    independent outer grid with a different node count.  Returns
    (energy mismatch, Hardy mismatch).
    """
    if p is not None and p != d:
        raise ValueError("the inversion invariance needs p = d")
    lo, hi = support if support is not None else u.support
    if not 0 < lo < hi <= R:
        raise ValueError(f"u must be supported in B_R, got support [{lo}, {hi}]")
    inner = make_log_radial_grid(lo, hi, n, d)
    r = inner.nodes
    uv, du = u(r), u.derivative(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        h_in = np.where(uv != 0, np.abs(uv) ** d / (r**d * np.abs(np.log(R / r)) ** d), 0.0)
    e_in = inner.integrate(np.abs(du) ** d)
    hardy_in = inner.integrate(h_in)

    outer = make_log_radial_grid(R * R / hi, R * R / lo, n + n // 3 + 1, d)
    rho = outer.nodes
    pre = R * R / rho
    vv = u(pre)
    dv = -u.derivative(pre) * R * R / rho**2
    with np.errstate(divide="ignore", invalid="ignore"):
        h_out = np.where(vv != 0, np.abs(vv) ** d / (rho**d * np.abs(np.log(rho / R)) ** d), 0.0)
    e_out = outer.integrate(np.abs(dv) ** d)
    hardy_out = outer.integrate(h_out)

    rel = lambda a, b: 0.0 if a == b == 0.0 else abs(a - b) / max(abs(a), abs(b))
    return rel(e_in, e_out), rel(hardy_in, hardy_out)
