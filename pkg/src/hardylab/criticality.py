"""Explicit cutoff sequences and their energy deficits.

Two sequences, both piecewise in t = log r with L = log(1/eps):

* plateau-log: 1 for r <= 1/eps, log(1/(eps^2 r))/L on [1/eps, 1/eps^2], then 0.
  Its p-energy tends to zero when p >= d, so the free p-Laplacian admits no
  Hardy weight in that range.
* hardy-log: r^(-(d-p)/p) theta(r) where theta ramps up on [eps^2, eps], equals
  1 on [eps, 1/eps] and ramps down on [1/eps, 1/eps^2].  The Hardy deficit
  decays like 1/L, so mu_{p,d}/|x|^p cannot be improved when p < d.

All derivatives are exact piecewise formulas; quadratures are run piece by
piece so the kinks never sit inside a panel.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .fields import (
    Field,
    Params,
    RadialGrid,
    hardy_constant,
    make_log_radial_grid,
    sphere_area,
)
from .quadrature import gauss_panels

KINDS = ("plateau-log", "hardy-log")
EPS_FLOOR = 1e-6


@dataclass(frozen=True)
class CutoffSequenceSpec:
    kind: str
    epsilon: float
    params: Params | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown cutoff kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.kind == "hardy-log":
            if self.params is None:
                raise ValueError("hardy-log needs params (p, d)")
            self.params.require(1 < self.params.p < self.params.d, "hardy-log needs 1 < p < d")

    @property
    def L(self) -> float:
        return math.log(1.0 / self.epsilon)

    @property
    def gamma(self) -> float:
        if self.kind == "plateau-log":
            return 0.0
        return (self.params.d - self.params.p) / self.params.p

    def breakpoints_t(self) -> list:
        """Breakpoints in t = log r, including both ends of the support."""
        L = self.L
        if self.kind == "plateau-log":
            return [L, 2.0 * L]
        return [-2.0 * L, -L, L, 2.0 * L]


def log_cutoff(t, L: float, two_sided: bool):
    """Piecewise-linear cutoff in t and its t-derivative.

    Equal to 1 up to t = L (from t = -L when two-sided), falling linearly to
    0 at t = 2L; the two-sided version also rises linearly from 0 at -2L.
    """
    t = np.asarray(t, dtype=float)
    th = np.zeros_like(t)
    dth = np.zeros_like(t)
    down = (t >= L) & (t <= 2.0 * L)
    th[down] = (2.0 * L - t[down]) / L
    dth[down] = -1.0 / L
    if two_sided:
        up = (t >= -2.0 * L) & (t < -L)
        th[up] = (t[up] + 2.0 * L) / L
        dth[up] = 1.0 / L
        th[(t >= -L) & (t < L)] = 1.0
    else:
        th[t < L] = 1.0
    return th, dth


class CutoffProfile:
    """Closed-form u and du/dr for a cutoff sequence member."""

    def __init__(self, spec: CutoffSequenceSpec):
        self.spec = spec

    def theta_t(self, t):
        """(theta, d theta / dt) of the log cutoff."""
        return log_cutoff(t, self.spec.L, self.spec.kind == "hardy-log")

    def in_t(self, t):
        """(u, du/dr) at r = e^t."""
        t = np.asarray(t, dtype=float)
        g = self.spec.gamma
        th, dth = self.theta_t(t)
        u = np.exp(-g * t) * th
        du = np.exp(-(1.0 + g) * t) * (dth - g * th)
        return u, du

    def __call__(self, r):
        return self.in_t(np.log(r))[0]

    def derivative(self, r):
        return self.in_t(np.log(r))[1]


def _default_grid(spec: CutoffSequenceSpec, n: int, d: int) -> RadialGrid:
    e = spec.epsilon
    return make_log_radial_grid(0.5 * e * e, 2.0 / (e * e), n, d)


def build_cutoff(spec: CutoffSequenceSpec, grid: RadialGrid | None = None, n: int = 1 << 14) -> Field:
    """Sample the cutoff with its exact derivative.

    The default grid is [eps^2/2, 2/eps^2].  A supplied grid must cover
    [eps^2, 1/eps^2] for hardy-log and the transition zone [1/eps, 1/eps^2]
    for plateau-log.
    """
    e = spec.epsilon
    d = spec.params.d if spec.params is not None else 2
    if grid is None:
        grid = _default_grid(spec, n, d)
    lo = e * e if spec.kind == "hardy-log" else 1.0 / e
    hi = 1.0 / (e * e)
    tol = 1e-12
    if grid.nodes[0] > lo * (1 + tol) or grid.nodes[-1] < hi * (1 - tol):
        raise ValueError(
            f"grid [{grid.nodes[0]:.3g}, {grid.nodes[-1]:.3g}] does not cover [{lo:.3g}, {hi:.3g}]"
        )
    u, du = CutoffProfile(spec).in_t(np.log(grid.nodes))
    return Field(grid, u, du)


def _check_eps(epsilon: float) -> None:
    if not EPS_FLOOR <= epsilon < 1.0:
        raise ValueError(f"epsilon must lie in [{EPS_FLOOR}, 1), got {epsilon}")


def deficit_free(epsilon: float, params: Params) -> float:
    """Closed-form p-energy of the plateau-log cutoff (p >= d)."""
    params.require(params.p >= params.d, "the plateau-log deficit needs p >= d")
    _check_eps(epsilon)
    p, d = params.p, params.d
    L = math.log(1.0 / epsilon)
    w = sphere_area(d)
    if p == d:
        return w / L ** (p - 1.0)
    k = p - d
    return w * epsilon**k * (1.0 - epsilon**k) / (k * L**p)


def deficit_free_quadrature(epsilon: float, params: Params, n: int = 1 << 14) -> float:
    """Simpson quadrature in log r of |u'|^p over the transition zone.

    Uses the exact piecewise derivative of the profile, not the closed form.
    """
    params.require(params.p >= params.d, "the plateau-log deficit needs p >= d")
    _check_eps(epsilon)
    spec = CutoffSequenceSpec("plateau-log", epsilon, params)
    L = spec.L
    t = np.linspace(L, 2.0 * L, n)
    _, du = CutoffProfile(spec).in_t(t)
    f = sphere_area(params.d) * np.abs(du) ** params.p * np.exp(params.d * t)
    return float(simpson(f, x=t))


def _graded(a: float, b: float, panels: int) -> np.ndarray:
    """Panel breaks on [a, b] refined geometrically toward both ends."""
    half = np.geomspace(1e-12, 0.5, panels // 2)
    frac = np.concatenate(([0.0], half, 1.0 - half[-2::-1], [1.0]))
    return a + (b - a) * frac


def _hardy_log_pieces(spec: CutoffSequenceSpec, panels: int, order: int):
    """Gauss nodes/weights per piece, split where theta_t - gamma theta = 0.

    For non-integer p the integrands are only Hoelder at the ramp ends and at
    that split point, so ramp panels are graded toward both of their ends.
    """
    L, g = spec.L, spec.gamma
    breaks = [-2.0 * L, -L, L, 2.0 * L]
    # on the rising ramp theta_t - g theta = 1/L - g (t + 2L)/L vanishes at t = 1/g - 2L
    kink = 1.0 / g - 2.0 * L
    if breaks[0] < kink < breaks[1]:
        breaks.insert(1, kink)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        plateau = a == -L and b == L
        cuts = np.linspace(a, b, panels + 1) if plateau else _graded(a, b, panels)
        x, w = gauss_panels(cuts, order)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass
class HardyLogTerms:
    epsilon: float
    energy: float
    hardy: float
    deficit: float

    @property
    def quotient(self) -> float:
        return self.energy / self.hardy


def hardy_log_terms(epsilon: float, params: Params, panels: int = 64, order: int = 16) -> HardyLogTerms:
    """Energy, Hardy integral and deficit of the hardy-log cutoff.

    The deficit is integrated as one pointwise difference, which is zero on
    the plateau, so it is not lost to cancellation against the O(L) totals.
    """
    params.require(1 < params.p < params.d, "the hardy-log deficit needs 1 < p < d")
    _check_eps(epsilon)
    spec = CutoffSequenceSpec("hardy-log", epsilon, params)
    p, d = params.p, params.d
    t, w = _hardy_log_pieces(spec, panels, order)
    u, du = CutoffProfile(spec).in_t(t)
    jac = sphere_area(d) * np.exp(d * t) * w
    e_dens = np.abs(du) ** p
    h_dens = np.abs(u) ** p * np.exp(-p * t)
    mu = hardy_constant(p, d)
    return HardyLogTerms(
        epsilon=epsilon,
        energy=float(np.sum(jac * e_dens)),
        hardy=float(np.sum(jac * h_dens)),
        deficit=float(np.sum(jac * (e_dens - mu * h_dens))),
    )


def deficit_hardy(epsilon: float, params: Params, panels: int = 64, order: int = 16) -> float:
    """Integral of |grad u|^p - mu_{p,d} |u|^p/|x|^p for the hardy-log cutoff."""
    return hardy_log_terms(epsilon, params, panels, order).deficit


@dataclass
class DeficitCurve:
    """Rows (epsilon, deficit, deficit * log(1/epsilon))."""

    kind: str
    params: Params
    rows: list = field(default_factory=list)

    @property
    def normalized(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rows": [{"epsilon": e, "deficit": v, "deficit_x_log": n} for e, v, n in self.rows],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "deficit", "deficit_x_log"])
        for row in self.rows:
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def decay_study(kind: str, params: Params, epsilons) -> DeficitCurve:
    """Deficits along a strictly decreasing list of epsilons."""
    if kind not in KINDS:
        raise ValueError(f"unknown cutoff kind {kind!r}")
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    fn = deficit_free if kind == "plateau-log" else deficit_hardy
    curve = DeficitCurve(kind, params)
    for e in eps:
        v = fn(e, params)
        curve.rows.append((e, v, v * math.log(1.0 / e)))
    return curve

