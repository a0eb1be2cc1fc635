"""Closed-form test functions with exact derivatives.

All families here are smooth in t = log r, which is the variable the log
grids are uniform in, so trapezoid sums of their integrands converge fast.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Field, PolarFunction, RadialGrid


def _bump_t(t, center, width):
    """exp(-1/(1 - s^2)) and its t-derivative, s = (t - center)/width."""
    s = (np.asarray(t, dtype=float) - center) / width
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 1.0)
    b = np.where(inside, np.exp(-1.0 / q), 0.0)
    db = np.where(inside, b * (-2.0 * s / (q * q)) / width, 0.0)
    return b, db


@dataclass(frozen=True)
class BumpSum:
    """u(r) = sum_k amp_k * bump((log r - center_k) / width_k).

    Each bump is C-infinity with support exp(center +- width).
    """

    centers: tuple
    widths: tuple
    amps: tuple

    def __post_init__(self):
        if not (len(self.centers) == len(self.widths) == len(self.amps)):
            raise ValueError("centers, widths and amps must have equal length")
        if any(w <= 0 for w in self.widths):
            raise ValueError("widths must be positive")

    @classmethod
    def single(cls, r_lo: float, r_hi: float, amp: float = 1.0) -> "BumpSum":
        """One bump supported exactly on [r_lo, r_hi]."""
        a, b = np.log(r_lo), np.log(r_hi)
        return cls((0.5 * (a + b),), (0.5 * (b - a),), (amp,))

    @property
    def support(self):
        lo = min(c - w for c, w in zip(self.centers, self.widths))
        hi = max(c + w for c, w in zip(self.centers, self.widths))
        return float(np.exp(lo)), float(np.exp(hi))

    def in_t(self, t):
        """(u, du/dt) as functions of t = log r."""
        t = np.asarray(t, dtype=float)
        u = np.zeros_like(t)
        du = np.zeros_like(t)
        for c, w, a in zip(self.centers, self.widths, self.amps):
            b, db = _bump_t(t, c, w)
            u += a * b
            du += a * db
        return u, du

    def __call__(self, r):
        return self.in_t(np.log(r))[0]

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        return self.in_t(np.log(r))[1] / r

    def sample(self, grid: RadialGrid) -> Field:
        u, du = self.in_t(np.log(grid.nodes))
        return Field(grid, u, du / grid.nodes)

    def scaled(self, lam: float) -> "BumpSum":
        return BumpSum(self.centers, self.widths, tuple(lam * a for a in self.amps))


def random_bump_sum(rng: np.random.Generator, t_lo: float, t_hi: float, max_bumps: int = 4) -> BumpSum:
    """Non-negative sum of 1..max_bumps bumps supported inside [t_lo, t_hi]."""
    k = int(rng.integers(1, max_bumps + 1))
    span = t_hi - t_lo
    widths = rng.uniform(0.05 * span, 0.5 * span, size=k)
    centers = np.array([rng.uniform(t_lo + w, t_hi - w) for w in widths])
    amps = rng.uniform(0.1, 1.0, size=k)
    return BumpSum(tuple(centers), tuple(widths), tuple(amps))


def random_polar_function(
    rng: np.random.Generator, t_lo: float, t_hi: float, max_modes: int = 3, max_n: int = 3
) -> PolarFunction:
    """sum_n c_n f_n(r) e^{i n theta} with random bump profiles and complex c_n."""
    ns = rng.choice(np.arange(-max_n, max_n + 1), size=int(rng.integers(1, max_modes + 1)), replace=False)
    terms = []
    for n in ns:
        f = random_bump_sum(rng, t_lo, t_hi, 2)
        c = complex(rng.standard_normal(), rng.standard_normal())
        terms.append((int(n), f, c))

    def value(r, th):
        return sum(c * f(r) * np.exp(1j * n * th) for n, f, c in terms)

    def d_r(r, th):
        return sum(c * f.derivative(r) * np.exp(1j * n * th) for n, f, c in terms)

    def d_theta(r, th):
        return sum(1j * n * c * f(r) * np.exp(1j * n * th) for n, f, c in terms)

    return PolarFunction(value, d_r, d_theta)
