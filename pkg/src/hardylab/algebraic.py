"""The pointwise vector inequality behind the L^p remainder estimates.

For p >= 2 and vectors x, y the quantity

    T(x, y) = |x + y|^p - |y|^p - p |y|^(p-2) y.x

is bounded below by c |x|^p.  Because T is p-homogeneous and depends only on
|x|, |y| and x.y, everything reduces to the two-parameter function
g(s, theta) = T(e1, s (cos theta, sin theta)).  This module evaluates T,
searches the reduced domain for the best constant, runs seeded
counterexample searches, and estimates the comparison constant for the
reverse bound against |x|^2 (|x| + |y|)^(p-2).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .fields import AdmissibilityError, ConstantEstimate

DEFAULT_SEED = 20240607
S_MAX = 1e3
COARSE_NODES = 512
MIN_SWEEPS = 40


class BoundaryActiveError(RuntimeError):
    """The reduced search found its extremum on the artificial s = S_max edge."""


class UnboundedGrowthError(RuntimeError):
    """The maximized ratio keeps growing with s, so the normalization is wrong."""


def _require_p(p: float) -> None:
    if not np.isfinite(p) or p < 2:
        raise AdmissibilityError(f"the vector inequality needs p >= 2, got p={p}")


@dataclass(frozen=True)
class VecPair:
    """A pair of real vectors of the same dimension."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError(f"x and y must be vectors of equal length, got {x.shape} and {y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("VecPair entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def reduced(self):
        """(|x|, s, cos angle) with s = |y|/|x|; requires x != 0."""
        nx = float(np.linalg.norm(self.x))
        ny = float(np.linalg.norm(self.y))
        if ny == 0.0:
            return nx, 0.0, 1.0
        c = float(np.dot(self.x, self.y) / (nx * ny))
        return nx, ny / nx, min(1.0, max(-1.0, c))

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist()}


def eval_T(pair: VecPair, p: float) -> float:
    """T(x, y) = |x+y|^p - |y|^p - p |y|^(p-2) y.x, with |y|^(p-2) y = 0 at y = 0.

    Evaluated as |x|^p g(|y|/|x|, cos angle) where g switches to a series
    form for large |y|/|x|, so it stays accurate when the three terms nearly
    cancel.
    """
    _require_p(p)
    nx, s, c = pair.reduced()
    if nx == 0.0:
        return 0.0
    return nx**p * float(kernels.reduced_T(s, c, p))


class ReducedObjective:
    """g(s, theta) = T((1, 0), (s cos theta, s sin theta)) for a fixed p.

    Because T is p-homogeneous and rotation invariant,
    inf over x != 0 of T/|x|^p equals inf of g over s >= 0, theta in [0, pi],
    in every dimension.
    """

    claim = "inf_{x != 0, y} T(x, y) / |x|^p = inf_{s >= 0, 0 <= theta <= pi} g(s, theta)"

    def __init__(self, p: float):
        _require_p(p)
        self.p = float(p)

    def __call__(self, s, theta):
        return kernels.reduced_T(s, np.cos(theta), self.p)

    def pair(self, s: float, theta: float) -> VecPair:
        """The plane pair realising g(s, theta)."""
        return VecPair(np.array([1.0, 0.0]), s * np.array([np.cos(theta), np.sin(theta)]))


def reduce_by_symmetry(p: float) -> ReducedObjective:
    return ReducedObjective(p)


def _s_nodes(s_max: float, n: int) -> np.ndarray:
    # dense near zero, where the interesting structure sits for moderate p
    return np.concatenate(([0.0], np.geomspace(1e-4, s_max, n - 1)))


def _refine(obj, s0, t0, s_step, t_step, s_max, tol, maximize, min_sweeps):
    """Coordinate search with halving steps; returns (s, theta, value, sweeps)."""
    sign = -1.0 if maximize else 1.0
    best = sign * obj(s0, t0)
    s, t = s0, t0
    sweeps = 0
    while sweeps < min_sweeps or max(s_step, t_step) > tol:
        sweeps += 1
        moved = False
        for ds, dt in ((s_step, 0.0), (-s_step, 0.0), (0.0, t_step), (0.0, -t_step)):
            cs = min(s_max, max(0.0, s + ds))
            ct = min(np.pi, max(0.0, t + dt))
            val = sign * obj(cs, ct)
            if val < best:
                best, s, t, moved = val, cs, ct, True
        if not moved:
            s_step *= 0.5
            t_step *= 0.5
        if sweeps > 10_000:
            break
    return s, t, sign * best, sweeps


def _scan(p, s_max, n_s, n_theta, norm_exponent, maximize):
    s_nodes = _s_nodes(s_max, n_s)
    t_nodes = np.linspace(0.0, np.pi, n_theta)
    value, i, j = kernels.scan_extremum(s_nodes, t_nodes, p, norm_exponent, maximize)
    return s_nodes, t_nodes, value, i, j


def _step_around(nodes, i):
    lo = nodes[i] - nodes[max(i - 1, 0)]
    hi = nodes[min(i + 1, nodes.size - 1)] - nodes[i]
    return max(lo, hi)


def estimate_optimal_c(
    p: float,
    tol: float = 1e-10,
    s_max: float = S_MAX,
    n_s: int = COARSE_NODES,
    n_theta: int = COARSE_NODES,
    sweeps: int = MIN_SWEEPS,
) -> ConstantEstimate:
    """Upper bound on inf T/|x|^p from a coarse grid followed by local refinement.

    Raises BoundaryActiveError when the best point lies on s = s_max, which
    means the search box is too small.
    """
    _require_p(p)
    if tol <= 0:
        raise ValueError("tol must be positive")
    obj = ReducedObjective(p)
    s_nodes, t_nodes, value, i, j = _scan(p, s_max, n_s, n_theta, 0.0, False)
    s, t, value, used = _refine(
        lambda a, b: float(obj(a, b)),
        s_nodes[i], t_nodes[j], _step_around(s_nodes, i), _step_around(t_nodes, j),
        s_max, tol, False, sweeps,
    )
    edge = float(np.min(obj(s_max, t_nodes)))
    if s >= s_max * (1 - 1e-12) or edge < value:
        raise BoundaryActiveError(
            f"minimum for p={p} sits on the s={s_max} edge; enlarge s_max"
        )
    return ConstantEstimate(
        value=float(value),
        witness=(float(s), float(t)),
        samples=int(s_nodes.size * t_nodes.size),
        refinement_tol=float(tol),
        bound_direction="upper-bound-on-inf",
        meta={"p": float(p), "s_max": s_max, "sweeps": used, "edge_min": edge},
    )


def verify_lower_bound(
    p: float,
    c: float,
    n_samples: int,
    seed: int | None = DEFAULT_SEED,
    dim: int = 3,
    chunk: int = 1 << 16,
) -> VecPair | None:
    """Seeded search for a pair with T(x, y) < c |x|^p.

    Magnitudes of x and y are log-uniform on [1e-3, 1e3] and directions are
    uniform on the sphere.  The comparison is made on T/|x|^p with a margin
    of 1e-12, so that rounding in huge |x|^p values cannot fake a hit.
    Returns the first offending pair in sampling order, or None.
    """
    _require_p(p)
    if not c > 0:
        raise ValueError("c must be positive")
    if n_samples < 0:
        raise ValueError("n_samples must be non-negative")
    rng = np.random.default_rng(seed)
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        mag = 10.0 ** rng.uniform(-3.0, 3.0, size=(m, 2))
        dx = rng.standard_normal((m, dim))
        dy = rng.standard_normal((m, dim))
        dx /= np.linalg.norm(dx, axis=1, keepdims=True)
        dy /= np.linalg.norm(dy, axis=1, keepdims=True)
        cosang = np.clip(np.einsum("ij,ij->i", dx, dy), -1.0, 1.0)
        s = mag[:, 1] / mag[:, 0]
        hit = kernels.first_below(s, cosang, p, c - 1e-12)
        if hit >= 0:
            return VecPair(mag[hit, 0] * dx[hit], mag[hit, 1] * dy[hit])
        done += m
    return None


def estimate_equivalence_sup(
    p: float,
    tol: float = 1e-10,
    s_max: float = S_MAX,
    n_s: int = COARSE_NODES,
    n_theta: int = COARSE_NODES,
    sweeps: int = MIN_SWEEPS,
    norm_exponent: float | None = None,
) -> ConstantEstimate:
    """Lower bound on sup T(x, y) / (|x|^2 (|x| + |y|)^(p-2)).

    In reduced variables the ratio is g(s, theta) / (1 + s)^(p-2).  For
    p > 2 the supremum is approached as s grows (the limit is p(p-1)/2), so
    the maximizer may legitimately sit on the s = s_max edge; the estimate
    is then the edge value.  ``norm_exponent`` overrides p - 2 for
    experiments with other normalizations; if the ratio keeps growing
    between s_max and 10 s_max an UnboundedGrowthError is raised.
    """
    _require_p(p)
    k = p - 2.0 if norm_exponent is None else float(norm_exponent)
    obj = ReducedObjective(p)

    def ratio(a, b):
        return obj(a, b) / (1.0 + a) ** k

    t_nodes = np.linspace(0.0, np.pi, n_theta)
    at_edge = float(np.max(ratio(s_max, t_nodes)))
    further = float(np.max(ratio(10.0 * s_max, t_nodes)))
    if further > at_edge * 1.5:
        raise UnboundedGrowthError(
            f"ratio grows from {at_edge:.6g} to {further:.6g} between s={s_max:g} and s={10 * s_max:g}"
        )
    s_nodes, t_nodes, value, i, j = _scan(p, s_max, n_s, n_theta, k, True)
    s, t, value, used = _refine(
        lambda a, b: float(ratio(a, b)),
        s_nodes[i], t_nodes[j], _step_around(s_nodes, i), _step_around(t_nodes, j),
        s_max, tol, True, sweeps,
    )
    return ConstantEstimate(
        value=float(value),
        witness=(float(s), float(t)),
        samples=int(s_nodes.size * t_nodes.size),
        refinement_tol=float(tol),
        bound_direction="lower-bound-on-sup",
        meta={
            "p": float(p),
            "s_max": s_max,
            "sweeps": used,
            "boundary_active": bool(s >= s_max * (1 - 1e-12)),
            "large_s_limit": 0.5 * p * (p - 1.0),
        },
    )
