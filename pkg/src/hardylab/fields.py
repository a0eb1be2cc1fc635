"""Grids, quadrature, gradient operators and the energy / Hardy functionals.

Radial integrals use the trapezoid rule in ``t = log r`` (weights carry the
Jacobian ``r dt``).  Discrete minimization uses a staggered (cell midpoint)
difference so that the discrete energy has no spurious null modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import gamma

from . import kernels


class AdmissibilityError(ValueError):
    """Raised when (p, d) lies outside the range an operation is defined for."""


def sphere_area(d: int) -> float:
    """Surface measure |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)."""
    return 2.0 * math.pi ** (0.5 * d) / float(gamma(0.5 * d))


def hardy_constant(p: float, d: int) -> float:
    """|mu_{p,d}| = (|d - p| / p)^p."""
    return (abs(d - p) / p) ** p


@dataclass(frozen=True)
class Params:
    p: float
    d: int = 2
    beta: float | None = None
    R: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 1.0):
            raise AdmissibilityError(f"p must be a finite real > 1, got {self.p}")
        if int(self.d) != self.d or self.d < 1:
            raise AdmissibilityError(f"d must be an integer >= 1, got {self.d}")
        if self.beta is not None and not math.isfinite(self.beta):
            raise AdmissibilityError("beta must be finite")
        if self.R is not None and not (math.isfinite(self.R) and self.R > 0):
            raise AdmissibilityError(f"R must be positive, got {self.R}")

    def require(self, ok: bool, rule: str) -> None:
        if not ok:
            raise AdmissibilityError(f"{rule} required (p={self.p}, d={self.d})")


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    weights: np.ndarray
    d: int = 2
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size < 2:
            raise ValueError("nodes and weights must be 1-D arrays of equal length >= 2")
        if not np.all(np.isfinite(nodes)) or nodes[0] <= 0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be finite, positive and strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.nodes.size

    def with_dim(self, d: int) -> "RadialGrid":
        return RadialGrid(self.nodes, self.weights, d, dict(self.meta))

    def measure(self) -> np.ndarray:
        """Per-node weights of dx restricted to radial functions."""
        return sphere_area(self.d) * self.weights * self.nodes ** (self.d - 1)

    def integrate(self, values) -> float:
        values = np.asarray(values)
        if not np.all(np.isfinite(values)):
            raise ValueError("integrand has non-finite samples")
        return float(np.sum(self.measure() * values))

    def cells(self):
        """(width, midpoint, dx-weight) of the staggered cells between nodes."""
        dr = np.diff(self.nodes)
        mid = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        return dr, mid, sphere_area(self.d) * dr * mid ** (self.d - 1)


def _trapezoid_factors(n: int) -> np.ndarray:
    c = np.ones(n)
    c[0] = c[-1] = 0.5
    return c


def make_log_radial_grid(r_min: float, r_max: float, n: int, d: int = 2) -> RadialGrid:
    """Geometrically spaced nodes on [r_min, r_max], trapezoid rule in log r.

    Second-order accurate for smooth integrands in the log variable.
    """
    if not (math.isfinite(r_min) and math.isfinite(r_max)) or not 0 < r_min < r_max:
        raise ValueError(f"need finite 0 < r_min < r_max, got ({r_min}, {r_max})")
    if int(n) != n or n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    n = int(n)
    t = np.linspace(math.log(r_min), math.log(r_max), n)
    h = (t[-1] - t[0]) / (n - 1)
    nodes = np.exp(t)
    nodes[0], nodes[-1] = r_min, r_max
    weights = h * _trapezoid_factors(n) * nodes
    meta = {"scheme": "trapezoid-log", "r_min": r_min, "r_max": r_max, "n": n, "h": h}
    return RadialGrid(nodes, weights, d, meta)


def make_exterior_log_grid(R: float, ell_min: float, ell_max: float, n: int, d: int = 2) -> RadialGrid:
    """Nodes r = R exp(l) with l geometric in [ell_min, ell_max].

    Resolves the log(r/R) singularity at r = R: trapezoid rule in log l.
    """
    if not 0 < ell_min < ell_max:
        raise ValueError("need 0 < ell_min < ell_max")
    s = np.linspace(math.log(ell_min), math.log(ell_max), n)
    h = (s[-1] - s[0]) / (n - 1)
    ell = np.exp(s)
    nodes = R * np.exp(ell)
    weights = h * _trapezoid_factors(n) * nodes * ell
    meta = {"scheme": "trapezoid-loglog", "R": R, "ell_min": ell_min, "ell_max": ell_max, "n": n, "h": h}
    return RadialGrid(nodes, weights, d, meta)


@dataclass(frozen=True, eq=False)
class PolarGrid:
    radial: RadialGrid
    n_theta: int

    def __post_init__(self):
        if self.n_theta < 4 or self.n_theta % 2:
            raise ValueError(f"angular grid needs an even count >= 4, got {self.n_theta}")
        if self.radial.d != 2:
            object.__setattr__(self, "radial", self.radial.with_dim(2))

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def shape(self):
        return (self.radial.size, self.n_theta)

    def mesh(self):
        return np.meshgrid(self.radial.nodes, self.angles, indexing="ij")

    def integrate(self, values) -> float:
        values = np.asarray(values)
        if not np.all(np.isfinite(values)):
            raise ValueError("integrand has non-finite samples")
        ang = np.sum(values, axis=1) * (2.0 * math.pi / self.n_theta)
        return float(np.sum(self.radial.weights * self.radial.nodes * ang))


def make_polar_grid(r_min: float, r_max: float, n_r: int, n_theta: int) -> PolarGrid:
    return PolarGrid(make_log_radial_grid(r_min, r_max, n_r, d=2), n_theta)


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a (possibly complex) function on a radial or polar grid.

    ``dr`` and ``dtheta`` optionally carry exact derivatives; when absent,
    derivatives are taken numerically.
    """

    grid: RadialGrid | PolarGrid
    values: np.ndarray
    dr: np.ndarray | None = None
    dtheta: np.ndarray | None = None

    def __post_init__(self):
        shape = (self.grid.size,) if isinstance(self.grid, RadialGrid) else self.grid.shape
        for name in ("values", "dr", "dtheta"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, grid expects {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite samples")
            object.__setattr__(self, name, arr)

    @classmethod
    def from_function(cls, grid, f, df=None, dtheta=None) -> "Field":
        """Sample closed-form callables; polar callables take (r, theta) meshes."""
        if isinstance(grid, RadialGrid):
            args = (grid.nodes,)
        else:
            args = tuple(grid.mesh())
        return cls(
            grid,
            np.asarray(f(*args)),
            None if df is None else np.asarray(df(*args)),
            None if dtheta is None else np.asarray(dtheta(*args)),
        )

    @property
    def is_polar(self) -> bool:
        return isinstance(self.grid, PolarGrid)

    def scaled(self, lam) -> "Field":
        mul = lambda a: None if a is None else lam * a
        return Field(self.grid, lam * self.values, mul(self.dr), mul(self.dtheta))

    def conj(self) -> "Field":
        c = lambda a: None if a is None else np.conj(a)
        return Field(self.grid, np.conj(self.values), c(self.dr), c(self.dtheta))

    def is_compact(self, atol: float = 0.0) -> bool:
        """True when the field vanishes on the first and last radial node."""
        v = np.abs(self.values)
        return bool(np.all(v[0] <= atol) and np.all(v[-1] <= atol))


def radial_integral(f: Field, d: int | None = None) -> float:
    """|S^{d-1}| * sum(weights * f * r^{d-1}) for a field on a RadialGrid."""
    grid = f.grid if d is None else f.grid.with_dim(d)
    return grid.integrate(f.values)


def radial_derivative(u: Field) -> np.ndarray:
    if u.dr is not None:
        return u.dr
    nodes = u.grid.nodes if isinstance(u.grid, RadialGrid) else u.grid.radial.nodes
    return np.gradient(u.values, nodes, axis=0, edge_order=2)


def angular_derivative(u: Field) -> np.ndarray:
    """d/dtheta on a PolarGrid; spectral (exact for modes |n| < n_theta/2)."""
    if u.dtheta is not None:
        return u.dtheta
    n = u.grid.n_theta
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    return np.fft.ifft(1j * k * np.fft.fft(u.values, axis=1), axis=1)


def ab_potential(beta: float):
    """Aharonov-Bohm potential beta (x2, -x1)/|x|^2 in polar components."""
    return lambda r, theta: (np.zeros_like(r), -beta / r)


def constant_field_potential(b: float):
    """Symmetric gauge b (-x2, x1)/2 of a constant field b, polar components."""
    return lambda r, theta: (np.zeros_like(r), 0.5 * b * r)


def _sample_potential(grid: PolarGrid, A):
    if callable(A):
        return A(*grid.mesh())
    a_r, a_t = A
    return np.broadcast_to(a_r, grid.shape), np.broadcast_to(a_t, grid.shape)


def magnetic_gradient_sq(u: Field, beta: float = 0.0, A=None) -> np.ndarray:
    """Pointwise |grad u + i A u|^2 on a PolarGrid.

    ``A`` defaults to the Aharonov-Bohm potential of flux ``beta``; pass a
    callable (r, theta) -> (A_r, A_theta) or a pair of arrays otherwise.
    """
    if not u.is_polar:
        raise TypeError("magnetic_gradient_sq needs a field on a PolarGrid")
    if u.grid.n_theta < 4:
        raise ValueError("angular grid too coarse")
    a_r, a_t = _sample_potential(u.grid, ab_potential(beta) if A is None else A)
    r = u.grid.radial.nodes[:, None]
    g_r = radial_derivative(u) + 1j * a_r * u.values
    g_t = angular_derivative(u) / r + 1j * a_t * u.values
    return np.abs(g_r) ** 2 + np.abs(g_t) ** 2


# ---------------------------------------------------------------------------
# weights and functionals

WEIGHT_KINDS = (
    "inverse-p-power",
    "log-decay",
    "power-decay",
    "exterior-log",
    "unit",
    "custom-sampled",
)


@dataclass(frozen=True, eq=False)
class WeightSpec:
    kind: str
    scale: float = 1.0
    R: float | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "exterior-log" and self.R is None:
            raise ValueError("exterior-log weight needs R")
        if self.kind == "custom-sampled" and self.values is None:
            raise ValueError("custom-sampled weight needs values")

    def evaluate(self, r, p: float, d: int) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        k = self.kind
        if k == "inverse-p-power":
            w = r ** -p
        elif k == "log-decay":
            w = 1.0 / (1.0 + r ** d * np.abs(np.log(r)) ** d)
        elif k == "power-decay":
            w = 1.0 / (1.0 + r ** p)
        elif k == "exterior-log":
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(r > self.R, 1.0 / (r ** p * np.log(r / self.R) ** p), np.inf)
        elif k == "unit":
            w = np.ones_like(r)
        else:
            w = np.broadcast_to(np.asarray(self.values, dtype=float), r.shape)
        return self.scale * w

    def singular_at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "exterior-log":
            return r <= self.R
        return np.zeros(r.shape, dtype=bool)


def _support(u: Field) -> np.ndarray:
    v = np.abs(u.values)
    return v > 0 if v.ndim == 1 else np.any(v > 0, axis=1)


def _radial_nodes(u: Field) -> np.ndarray:
    return u.grid.radial.nodes if u.is_polar else u.grid.nodes


def hardy_term(u: Field, w: WeightSpec, params: Params) -> float:
    """Integral of w(x) |u|^p."""
    r = _radial_nodes(u)
    bad = w.singular_at(r) & _support(u)
    if np.any(bad):
        raise ValueError(f"weight {w.kind!r} is singular inside the support of u (r={r[bad][0]:.6g})")
    wr = np.where(_support(u), w.evaluate(r, params.p, params.d), 0.0)
    dens = np.abs(u.values) ** params.p
    if u.is_polar:
        return u.grid.integrate(wr[:, None] * dens)
    return u.grid.with_dim(params.d).integrate(wr * dens)


@dataclass(frozen=True, eq=False)
class Energy:
    """Radial p-energy, integral of (|u'|^2 + kappa(r)^2 |u|^2)^(p/2) dx.

    ``kappa`` is the angular penalty of a single Fourier mode (for example
    (n - beta)/r for the Aharonov-Bohm potential); None means the free energy.
    Fields with an exact ``dr`` use the trapezoid rule at the nodes; nodal
    profiles use the staggered cell discretization.
    """

    p: float
    kappa: Callable | None = None

    def _kappa2(self, r):
        return np.zeros_like(r) if self.kappa is None else self.kappa(r) ** 2

    def value(self, u: Field) -> float:
        grid = u.grid
        if u.dr is not None:
            sq = np.abs(u.dr) ** 2 + self._kappa2(grid.nodes) * np.abs(u.values) ** 2
            return grid.integrate(sq ** (0.5 * self.p))
        dr, mid, wcell = grid.cells()
        if np.iscomplexobj(u.values):
            du = np.diff(u.values) / dr
            ub = 0.5 * (u.values[1:] + u.values[:-1])
            sq = np.abs(du) ** 2 + self._kappa2(mid) * np.abs(ub) ** 2
            return float(np.sum(wcell * sq ** (0.5 * self.p)))
        cell, _ = kernels.staggered_energy(u.values, dr, wcell, self._kappa2(mid), self.p, False)
        return float(np.sum(cell))

    def gradient(self, u: Field) -> np.ndarray:
        dr, mid, wcell = u.grid.cells()
        _, grad = kernels.staggered_energy(
            np.real(u.values), dr, wcell, self._kappa2(mid), self.p, True
        )
        return grad

    def hessian(self, u: Field, reg: float):
        """Tridiagonal Hessian of the staggered energy (diagonal, off-diagonal).

        ``reg`` adds a fraction of the largest cell curvature to every cell so
        that the matrix stays definite where the gradient vanishes (p > 2).
        """
        dr, mid, wcell = u.grid.cells()
        v = np.real(u.values)
        kap = np.sqrt(self._kappa2(mid))
        z1 = np.diff(v) / dr
        z2 = kap * 0.5 * (v[1:] + v[:-1])
        s = z1 * z1 + z2 * z2
        p = self.p
        if p == 2:
            base = np.ones_like(s)
            a11, a12, a22 = base, 0.0 * base, base
        else:
            base = np.where(s > 0, s, 1.0) ** (0.5 * p - 1.0) * (s > 0)
            with np.errstate(invalid="ignore", divide="ignore"):
                zz = np.where(s > 0, (p - 2.0) / np.where(s > 0, s, 1.0), 0.0)
            a11 = base * (1.0 + zz * z1 * z1)
            a12 = base * zz * z1 * z2
            a22 = base * (1.0 + zz * z2 * z2)
        floor = reg * np.max(base) if np.max(base) > 0 else reg
        a11 = p * wcell * (a11 + floor)
        a12 = p * wcell * a12
        a22 = p * wcell * (a22 + floor)
        # J = [[-1/dr, 1/dr], [kap/2, kap/2]]; cell block = J^T A J
        j1, j2 = 1.0 / dr, 0.5 * kap
        h_lo = a11 * j1 * j1 - 2.0 * a12 * j1 * j2 + a22 * j2 * j2
        h_hi = a11 * j1 * j1 + 2.0 * a12 * j1 * j2 + a22 * j2 * j2
        h_off = -a11 * j1 * j1 + a22 * j2 * j2
        diag = np.zeros(v.size)
        diag[:-1] += h_lo
        diag[1:] += h_hi
        return diag, h_off


@dataclass(frozen=True, eq=False)
class WeightedNorm:
    """Integral of V |u|^p dx on a radial grid, V given by a WeightSpec."""

    p: float
    weight: WeightSpec

    def _w(self, u: Field) -> np.ndarray:
        g = u.grid
        return g.measure() * self.weight.evaluate(g.nodes, self.p, g.d)

    def value(self, u: Field) -> float:
        w = self._w(u)
        live = np.abs(u.values) > 0
        return float(np.sum(np.where(live, w * np.abs(u.values) ** self.p, 0.0)))

    def gradient(self, u: Field) -> np.ndarray:
        v = np.real(u.values)
        return self.p * self._w(u) * np.abs(v) ** (self.p - 2.0) * v

    def hessian(self, u: Field, reg: float) -> np.ndarray:
        """Diagonal Hessian p(p-1) w |u|^(p-2), floored by ``reg``."""
        v = np.real(u.values)
        m = np.abs(v) ** (self.p - 2.0) if self.p != 2 else np.ones_like(v)
        m = m + reg * np.max(m)
        return self.p * (self.p - 1.0) * self._w(u) * m


def energy_p(u: Field, params: Params, field_kind: str = "free", A=None) -> float:
    """h_{A,p}[u]: integral of |grad_A u|^p over the grid.

    field_kind is "free", "ab-beta" (uses params.beta) or "custom-A" (needs A).
    """
    if field_kind not in ("free", "ab-beta", "custom-A"):
        raise ValueError(f"unknown field kind {field_kind!r}")
    if not u.is_polar:
        if field_kind != "free":
            raise ValueError(f"{field_kind!r} needs a field on a PolarGrid")
        return Energy(params.p).value(u if u.grid.d == params.d else Field(u.grid.with_dim(params.d), u.values, u.dr))
    if params.d != 2:
        raise ValueError("polar fields live in d = 2")
    if field_kind == "free":
        sq = magnetic_gradient_sq(u, 0.0)
    elif field_kind == "ab-beta":
        sq = magnetic_gradient_sq(u, params.beta or 0.0)
    else:
        if A is None:
            raise ValueError("custom-A needs a sampled vector potential")
        sq = magnetic_gradient_sq(u, A=A)
    return u.grid.integrate(sq ** (0.5 * params.p))


def quotient(u: Field, num, den) -> float:
    """num(u) / den(u) for functionals with a ``value`` method (or callables)."""
    ev = lambda f: f.value(u) if hasattr(f, "value") else f(u)
    d = ev(den)
    if not d > 0:
        raise ValueError(f"denominator must be positive, got {d}")
    return ev(num) / d


# ---------------------------------------------------------------------------
# results

BOUND_DIRECTIONS = ("upper-bound-on-inf", "lower-bound-on-sup", "sampled-check")


def _jsonable(x):
    if hasattr(x, "to_dict"):
        return x.to_dict()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


@dataclass
class ConstantEstimate:
    """A numerically estimated extremum with the point that attains it."""

    value: float
    witness: object
    samples: int
    refinement_tol: float
    bound_direction: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bound_direction not in BOUND_DIRECTIONS:
            raise ValueError(f"unknown bound direction {self.bound_direction!r}")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "witness": _jsonable(self.witness),
            "samples": self.samples,
            "refinement_tol": self.refinement_tol,
            "bound_direction": self.bound_direction,
            "meta": _jsonable(self.meta),
        }


# ---------------------------------------------------------------------------
# normalized descent


@dataclass
class QuotientResult:
    value: float
    minimizer: Field | None
    iterations: int
    step: float
    converged: bool
    trace: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return "converged" if self.converged else "unconverged"

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "iterations": self.iterations,
            "step": self.step,
            "status": self.status,
            "trace_tail": [float(x) for x in self.trace[-10:]],
        }


@dataclass
class DescentOptions:
    maxiter: int = 5000
    rtol: float = 1e-8
    window: int = 10
    pin_inner: bool = True
    pin_outer: bool = True
    shift: float = 1e-2
    reg: float = 1e-8
    inner_iters: int = 30
    c1: float = 1e-4
    min_step: float = 1e-14
    max_step: float = 1.0


def _banded_solve(diag, off, rhs, free):
    idx = np.flatnonzero(free)
    # pinning only removes end nodes, so the free nodes are contiguous
    lo, hi = idx[0], idx[-1] + 1
    ab = np.zeros((3, hi - lo))
    ab[1] = diag[lo:hi]
    ab[0, 1:] = off[lo : hi - 1]
    ab[2, :-1] = off[lo : hi - 1]
    out = np.zeros_like(rhs)
    out[lo:hi] = solve_banded((1, 1), ab, rhs[lo:hi])
    return out


def _inverse_power_target(num, den, u: Field, Q: float, free, opts):
    """Approximately solve grad N(v) + s grad D(v) = (Q + s) grad D(u).

    Damped Newton on the convex potential N(v) + s D(v) - (Q + s) <grad D(u), v>;
    for p = 2 one step is exact and the update is shifted inverse iteration.
    """
    grid = u.grid
    sigma = opts.shift * max(Q, 1e-300)
    rhs = (Q + sigma) * den.gradient(u)
    v = np.real(u.values).copy()
    phi = lambda w: num.value(Field(grid, w)) + sigma * den.value(Field(grid, w)) - rhs @ w
    cur = phi(v)
    for _ in range(opts.inner_iters):
        f = Field(grid, v)
        res = num.gradient(f) + sigma * den.gradient(f) - rhs
        res[~free] = 0.0
        diag, off = num.hessian(f, opts.reg)
        diag = diag + sigma * den.hessian(f, opts.reg)
        delta = -_banded_solve(diag, off, res, free)
        t = 1.0
        while t > 1e-8:
            cand = v + t * delta
            new = phi(cand)
            if new <= cur:
                break
            t *= 0.5
        else:
            break
        v, gain, cur = cand, cur - new, new
        if gain <= 1e-14 * abs(cur):
            break
    return v


def minimize_quotient(init: Field, num, den, opts: DescentOptions | None = None) -> QuotientResult:
    """Minimize num(u)/den(u) over nodal radial profiles.

    Each iteration renormalizes den(u) = 1 and takes a backtracking step along
    a preconditioned gradient of the quotient, so the trace never increases.
    Both functionals must be p-homogeneous of the same degree with p >= 2.
    """
    opts = opts or DescentOptions()
    if init.is_polar:
        raise TypeError("minimize_quotient works on radial profiles")
    p_num, p_den = getattr(num, "p", None), getattr(den, "p", None)
    if p_num is not None and p_den is not None and p_num != p_den:
        raise ValueError("num and den must have the same homogeneity degree")
    p = p_num if p_num is not None else p_den
    if p is None or p < 2:
        raise AdmissibilityError("descent is only defined for p >= 2")

    grid = init.grid
    u = np.real(np.asarray(init.values, dtype=complex)).astype(float)
    free = np.ones(u.size, dtype=bool)
    free[0] = not opts.pin_inner
    free[-1] = not opts.pin_outer
    u[~free] = 0.0
    make = lambda v: Field(grid, v)

    d0 = den.value(make(u))
    if not d0 > 0:
        raise ValueError("initial profile has non-positive denominator")
    u = u / d0 ** (1.0 / p)
    Q = num.value(make(u)) / den.value(make(u))
    trace = [Q]
    step = 1.0
    converged = False
    it = 0
    for it in range(1, opts.maxiter + 1):
        f = make(u)
        g = num.gradient(f) - Q * den.gradient(f)
        g[~free] = 0.0
        if not np.any(g):
            converged = True
            break
        if isinstance(num, Energy) and isinstance(den, WeightedNorm):
            target = _inverse_power_target(num, den, f, Q, free, opts)
            dt = den.value(make(target))
            direction = target / dt ** (1.0 / p) - u if dt > 0 else -g
        else:
            direction = -g
        slope = float(g @ direction)
        if not slope < 0:
            direction, slope = -g, -float(g @ g)
        t = min(opts.max_step, 2.0 * step)
        accepted = False
        while t >= opts.min_step:
            v = u + t * direction
            dv = den.value(make(v))
            if dv > 0:
                Qv = num.value(make(v)) / dv
                if Qv <= Q + opts.c1 * t * slope:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            # no decrease possible at machine precision: stationary
            converged = True
            break
        step = t
        u = v / dv ** (1.0 / p)
        Q = Qv
        trace.append(Q)
        if len(trace) > opts.window and trace[-1 - opts.window] - Q <= opts.rtol * abs(Q):
            converged = True
            break
    return QuotientResult(Q, make(u), it, step, converged, trace)


# ---------------------------------------------------------------------------
# pointwise checks


@dataclass(frozen=True)
class PolarFunction:
    """Closed-form u(r, theta) with exact partial derivatives."""

    value: Callable
    d_r: Callable
    d_theta: Callable

    def sample(self, grid: PolarGrid) -> Field:
        return Field.from_function(grid, self.value, self.d_r, self.d_theta)

    def conj(self) -> "PolarFunction":
        return PolarFunction(
            lambda r, t: np.conj(self.value(r, t)),
            lambda r, t: np.conj(self.d_r(r, t)),
            lambda r, t: np.conj(self.d_theta(r, t)),
        )


def mode_function(f, df, n: int) -> PolarFunction:
    """u = f(r) exp(i n theta)."""
    return PolarFunction(
        lambda r, t: f(r) * np.exp(1j * n * t),
        lambda r, t: df(r) * np.exp(1j * n * t),
        lambda r, t: 1j * n * f(r) * np.exp(1j * n * t),
    )


def grad_sq_closed(u: PolarFunction, r, theta, beta: float = 0.0):
    """|grad_{A_beta} u|^2 from exact derivatives at sample points."""
    v = u.value(r, theta)
    g_r = u.d_r(r, theta)
    g_t = u.d_theta(r, theta) / r - 1j * beta * v / r
    return np.abs(g_r) ** 2 + np.abs(g_t) ** 2


@dataclass
class DiamagneticReport:
    worst_margin: float
    n_points: int

    @property
    def holds(self) -> bool:
        return self.worst_margin >= -1e-8


def check_diamagnetic(u: PolarFunction, beta: float, sample_points) -> DiamagneticReport:
    """Worst value of |grad_A u| - |grad |u|| over the sample points."""
    r, theta = (np.asarray(a, dtype=float) for a in sample_points)
    v = u.value(r, theta)
    mod = np.abs(v)
    keep = mod > 1e-300
    lhs = np.sqrt(grad_sq_closed(u, r, theta, beta))
    # grad|u| = Re(conj(u) grad u) / |u|
    gr = np.real(np.conj(v) * u.d_r(r, theta))
    gt = np.real(np.conj(v) * u.d_theta(r, theta)) / r
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = np.hypot(gr, gt) / mod
    margin = (lhs - rhs)[keep]
    return DiamagneticReport(float(np.min(margin)) if margin.size else 0.0, int(keep.sum()))


def check_gauge(psi: Field, phi: PolarFunction, A, p: float, derivative: str = "analytic") -> float:
    """|h_{A,p}[psi] - h_{A - grad phi, p}[psi e^{i phi}]|.

    ``derivative="analytic"`` differentiates psi e^{i phi} by the product rule
    (needs exact derivatives on psi or falls back to numerical ones for psi);
    ``"numeric"`` resamples the product and differentiates it numerically.
    """
    grid = psi.grid
    R, TH = grid.mesh()
    a_r, a_t = _sample_potential(grid, A)
    ph, ph_r, ph_t = phi.value(R, TH), phi.d_r(R, TH), phi.d_theta(R, TH)
    A_tilde = (a_r - ph_r, a_t - ph_t / R)
    params = Params(p, 2)
    lhs = energy_p(psi, params, "custom-A", A=(a_r, a_t))
    phase = np.exp(1j * ph)
    if derivative == "analytic":
        dr = radial_derivative(psi)
        dt = angular_derivative(psi)
        moved = Field(grid, psi.values * phase, phase * (dr + 1j * ph_r * psi.values), phase * (dt + 1j * ph_t * psi.values))
    else:
        moved = Field(grid, psi.values * phase)
    rhs = energy_p(moved, params, "custom-A", A=A_tilde)
    return abs(lhs - rhs)
