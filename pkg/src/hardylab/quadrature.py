"""Composite Gauss-Legendre rules on intervals and breakpoint lists."""
from __future__ import annotations

import numpy as np

_RULES: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _rule(order: int):
    if order not in _RULES:
        _RULES[order] = np.polynomial.legendre.leggauss(order)
    return _RULES[order]


def gauss_panels(breaks, order: int = 16):
    """Nodes and weights of a Gauss-Legendre rule on each [breaks[i], breaks[i+1]]."""
    b = np.asarray(breaks, dtype=float)
    if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0):
        raise ValueError("breaks must be strictly increasing with at least two entries")
    x, w = _rule(order)
    lo, hi = b[:-1, None], b[1:, None]
    nodes = 0.5 * (hi - lo) * (x[None, :] + 1.0) + lo
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()


def uniform_panels(a: float, b: float, n_panels: int, order: int = 16):
    return gauss_panels(np.linspace(a, b, n_panels + 1), order)


def graded_left_panels(t0: float = -40.0, order: int = 16):
    """Panels on [t0, 0] refined geometrically toward t = 0.

    Suited to profiles with an algebraic endpoint singularity at t = 0 such
    as (1 - e^t)^k, and exponential decay toward t0.
    """
    u = np.concatenate(([0.0], np.geomspace(1e-7, 1.0, 30), np.arange(1.5, -t0 + 1e-9, 0.5)))
    nodes, weights = gauss_panels(u, order)
    return -nodes, weights
