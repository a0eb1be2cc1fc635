"""Aharonov-Bohm analysis and numerical probes of magnetic Hardy inequalities.

Conventions.  In the plane the Aharonov-Bohm potential is
A_beta = beta (x2, -x1)/|x|^2, so a single Fourier mode f(r) e^{i n theta} has

    |grad_A u|^2 = f'^2 + (n - beta)^2 f^2 / r^2,

and the constant field b in symmetric gauge gives (n + b r^2/2)^2 f^2 / r^2
instead.  For p != 2 the p-energy does not split across modes; all the
minimizations here run over single modes, so they return upper bounds on the
best constants.

Profile family.  Minimizations use f(r) = x^a (1 - x)^k e^{-sigma x} with
x = r/scale < 1, evaluated in t = log x by composite Gauss-Legendre panels on
[-40, 0] (graded toward the endpoint x = 1) plus the exact exponential tail
below t = -40.  Admissibility requires p a + d - p > 0 so the energy is
finite at the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar
from scipy.special import jvp

from .fields import (
    AdmissibilityError,
    ConstantEstimate,
    DescentOptions,
    Energy,
    Field,
    QuotientResult,
    WeightedNorm,
    WeightSpec,
    hardy_constant,
    magnetic_gradient_sq,
    make_log_radial_grid,
    minimize_quotient,
)
from .quadrature import gauss_panels, graded_left_panels

# ---------------------------------------------------------------------------
# single modes on grids


@dataclass(frozen=True)
class ModeProfile:
    """u = f(r) e^{i n theta} in the Aharonov-Bohm field of flux beta."""

    n: int
    f: Field
    beta: float

    def __post_init__(self):
        if self.f.is_polar:
            raise TypeError("the radial profile must live on a RadialGrid")
        if np.iscomplexobj(self.f.values):
            raise TypeError("the radial profile must be real")
        if not self.f.is_compact():
            raise ValueError("the radial profile must vanish at both ends of its grid")


def ab_mode_quotient(mode: ModeProfile, p: float) -> float:
    """int (f'^2 + (n-beta)^2 f^2/r^2)^(p/2) r dr / int |f|^p r^(1-p) dr."""
    if p <= 1:
        raise AdmissibilityError("the mode quotient needs p > 1")
    nu = mode.n - mode.beta
    f = mode.f if mode.f.grid.d == 2 else Field(mode.f.grid.with_dim(2), mode.f.values, mode.f.dr)
    num = Energy(p, kappa=lambda r: nu / r).value(f)
    den = WeightedNorm(p, WeightSpec("inverse-p-power")).value(f)
    if not den > 0:
        raise ValueError("zero denominator: the profile vanishes on the grid")
    return num / den


# ---------------------------------------------------------------------------
# the mean value inequality for u and its conjugate


@dataclass
class MeanValueReport:
    lhs: float
    rhs_constant: float
    hardy_integral: float
    ratio: float

    @property
    def holds(self) -> bool:
        return self.ratio >= 1.0 - 1e-3

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs_constant": self.rhs_constant,
            "hardy_integral": self.hardy_integral,
            "ratio": self.ratio,
        }


def _require_sub2(p: float) -> None:
    if not 1.0 < p < 2.0:
        raise AdmissibilityError(f"needs 1 < p < 2, got p={p}")


def mean_value_constant(beta: float, p: float) -> float:
    """(sqrt((2-p)^2 + beta^2 p^2)/p)^p."""
    _require_sub2(p)
    return f_max(beta, p) ** p


def mean_value_check(u: Field, beta: float, p: float) -> MeanValueReport:
    """Both sides of the mean value inequality for u and its conjugate.

    lhs = ((||grad_A u||_p + ||grad_A conj(u)||_p)/2)^p, compared against
    the constant times int |u|^p/|x|^p.
    """
    _require_sub2(p)
    if not u.is_polar:
        raise TypeError("mean_value_check needs a field on a PolarGrid")
    grid = u.grid
    norm = lambda v: grid.integrate(magnetic_gradient_sq(v, beta) ** (0.5 * p)) ** (1.0 / p)
    lhs = (0.5 * (norm(u) + norm(u.conj()))) ** p
    r = grid.radial.nodes[:, None]
    hardy = grid.integrate(np.abs(u.values) ** p * r ** (-p))
    if not hardy > 0:
        raise ValueError("u vanishes identically")
    const = mean_value_constant(beta, p)
    return MeanValueReport(lhs, const, hardy, lhs / (const * hardy))


def f_curve(t, beta: float, p: float):
    """f(t) = (1 + beta t) / sqrt((p/(2-p))^2 + t^2)."""
    _require_sub2(p)
    q = p / (2.0 - p)
    t = np.asarray(t, dtype=float)
    return (1.0 + beta * t) / np.sqrt(q * q + t * t)


def t_star(beta: float, p: float) -> float:
    _require_sub2(p)
    return beta * (p / (2.0 - p)) ** 2


def f_max(beta: float, p: float) -> float:
    _require_sub2(p)
    return math.sqrt((2.0 - p) ** 2 + beta * beta * p * p) / p


def numeric_f_max(beta: float, p: float, n: int = 200_001):
    """Maximum of f over a t-grid, polished by bounded Brent search.

    The grid combines a fine linear part on [-10, 10] with geometric sweeps
    out to |t| = 1e8, restricted to 1 + beta t > -0.9 (f is negative
    beyond).  Peaks far out, which occur when p is close to 2, are still
    bracketed.  Returns (t, f(t)).
    """
    _require_sub2(p)
    far = np.geomspace(1e-8, 1e8, n)
    t = np.unique(np.concatenate((np.linspace(-10.0, 10.0, n), far, -far)))
    if beta > 0:
        t = t[t > -0.9 / beta]
    elif beta < 0:
        t = t[t < -0.9 / beta]
    vals = f_curve(t, beta, p)
    i = int(np.argmax(vals))
    a, b = t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]
    res = minimize_scalar(lambda s: -f_curve(s, beta, p), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, abs(t[i]))})
    best_t, best = (res.x, -res.fun) if -res.fun >= vals[i] else (t[i], vals[i])
    return float(best_t), float(best)


def cross_term_identity_check(u: Field, beta: float) -> float:
    """max |(|grad_A u|^2 + |grad_A conj u|^2)/2 - |grad u|^2 - beta^2 |u|^2/r^2|."""
    if not u.is_polar:
        raise TypeError("cross_term_identity_check needs a field on a PolarGrid")
    lhs = 0.5 * (magnetic_gradient_sq(u, beta) + magnetic_gradient_sq(u.conj(), beta))
    r = u.grid.radial.nodes[:, None]
    rhs = magnetic_gradient_sq(u, 0.0) + beta * beta * np.abs(u.values) ** 2 / r**2
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# parametric profile family and the probe problems

FIELD_KINDS = ("none", "ab", "constant", "ab-line")


@dataclass(frozen=True)
class FieldSpec:
    """Built-in magnetic fields.

    ``ab``: Aharonov-Bohm flux ``strength`` in the plane.  ``constant``:
    constant field ``strength`` in symmetric gauge in the plane.
    ``ab-line``: flux line ``strength`` (x2, -x1, 0)/(x1^2 + x2^2) in R^3.
    ``none``: no field, any dimension.
    """

    kind: str = "ab"
    strength: float = 0.0

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}; expected one of {FIELD_KINDS}")

    @property
    def dims(self):
        return {"none": None, "ab": 2, "constant": 2, "ab-line": 3}[self.kind]

    @property
    def nonzero(self) -> bool:
        return self.kind != "none" and self.strength != 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "strength": self.strength}


@dataclass(frozen=True)
class ProfileFamily:
    """The power-cutoff family and its enrichment level.

    level 1 frees (a, scale); level 2 also frees the cutoff exponent k;
    level 3 also frees sigma.  ``modes`` lists the Fourier modes n tried;
    ``polar_powers`` lists the sin^m(polar angle) factors used in R^3.
    """

    level: int = 3
    modes: tuple = tuple(range(-3, 4))
    polar_powers: tuple = (1, 2)
    k_fixed: float = 2.0
    sigma_fixed: float = 1e-3
    angular_nodes: int = 24

    def __post_init__(self):
        if self.level not in (1, 2, 3):
            raise ValueError("family level must be 1, 2 or 3")
        if not self.modes:
            raise ValueError("at least one mode is needed")

    def enriched(self, level: int) -> "ProfileFamily":
        return ProfileFamily(level, self.modes, self.polar_powers, self.k_fixed, self.sigma_fixed, self.angular_nodes)

    def to_dict(self) -> dict:
        return {"level": self.level, "modes": list(self.modes), "polar_powers": list(self.polar_powers)}


_T_NODES, _T_WEIGHTS = graded_left_panels(-40.0)
_I0 = int(np.argmin(_T_NODES))
# distance from the lowest Gauss node down to the panel edge at t = -40
_DT0 = float(_T_NODES[_I0] + 40.0)


def _tail(value_at_lowest_node: float, rate: float) -> float:
    """Integral over (-inf, -40) of an integrand that is exactly exponential there."""
    return value_at_lowest_node * math.exp(-rate * _DT0) / rate


def power_cutoff(t, a: float, k: float, sigma: float):
    """(g, dg/dt) for g = x^a (1-x)^k e^{-sigma x}, x = e^t < 1."""
    x = np.exp(t)
    g = np.exp(a * t + k * np.log1p(-x) - sigma * x)
    return g, g * (a - k * x / (1.0 - x) - sigma * x)


@dataclass(frozen=True)
class _Problem:
    """One probe quotient for a fixed mode (and polar power in R^3)."""

    which: str
    p: float
    d: int
    field: FieldSpec
    n: int
    m: int
    angular_nodes: int

    @property
    def a_lo(self) -> float:
        return (self.p - self.d) / self.p

    def angular(self):
        """Angular nodes x, weights, and A(x), B(x, r) multipliers."""
        if self.field.kind == "ab-line":
            beta = self.field.strength
            x, w = gauss_panels([0.0, 1.0], self.angular_nodes)
            w = 2.0 * w  # symmetric in cos(polar angle)
            s2 = 1.0 - x * x
            k2 = (self.n - beta) ** 2
            m = self.m
            A = s2**m
            B = (s2 ** (m - 1) if m >= 1 else 0.0 * s2) * (m * m * x * x + k2)
            S = s2 ** (0.5 * m)
            return w, (lambda r: A[None, :]), (lambda r: B[None, :] + 0.0 * r[:, None]), S
        w = np.array([1.0])
        if self.field.kind == "constant":
            b = self.field.strength
            B = lambda r: ((self.n + 0.5 * b * r * r) ** 2)[:, None]
        else:
            beta = self.field.strength if self.field.kind == "ab" else 0.0
            B = lambda r: np.full((r.size, 1), (self.n - beta) ** 2)
        return w, (lambda r: np.ones((r.size, 1))), B, np.array([1.0])

    def rho(self, r):
        if self.which == "thm1":
            kind = "log-decay" if self.p == self.d else "power-decay"
        else:
            kind = "power-decay"
        return WeightSpec(kind).evaluate(r, self.p, self.d)

    def quotient(self, a: float, k: float, sigma: float, scale: float) -> float:
        p, d = self.p, self.d
        t, wt = _T_NODES, _T_WEIGHTS
        r = scale * np.exp(t)
        g, gt = power_cutoff(t, a, k, sigma)
        wx, A, B, S = self.angular()
        Ar, Br = A(r), B(r)
        g_, gt_ = g[:, None], gt[:, None]
        hom = np.exp((d - p) * t)  # r^d dt measure times r^-p, up to scale^(d-p)
        rate = p * a + d - p

        def integral(dens, base, tail_rate):
            col = np.sum(dens * wx[None, :], axis=1)
            return float(np.sum(wt * base * col) + _tail(base[_I0] * col[_I0], tail_rate))

        energy = integral(np.abs(gt_ * gt_ * Ar + g_ * g_ * Br) ** (0.5 * p), hom, rate)
        ang_p = np.sum(wx * S**p)
        if self.which == "thm1":
            wts = scale**p * np.exp(d * t) * self.rho(r)
            den = float(np.sum(wt * wts * np.abs(g) ** p) + _tail(wts[_I0] * abs(g[_I0]) ** p, p * a + d)) * ang_p
            return energy / den
        hardy = float(np.sum(wt * hom * np.abs(g) ** p) + _tail(hom[_I0] * abs(g[_I0]) ** p, rate)) * ang_p
        excess = energy - hardy_constant(p, d) * hardy
        if self.which == "conj1":
            gam = (d - p) / p
            gg = gt_ + gam * g_
            rem = integral(np.abs(gg * gg * Ar + g_ * g_ * Br) ** (0.5 * p), hom, rate)
            return excess / rem
        if self.which == "conj2":
            wts = scale**p * np.exp(d * t) * self.rho(r)
            den = float(np.sum(wt * wts * np.abs(g) ** p) + _tail(wts[_I0] * abs(g[_I0]) ** p, p * a + d)) * ang_p
            return excess / den
        # "mode": the plain Hardy quotient of a single mode
        return energy / hardy


# Box for the log-parameters.  Outside it the profile develops features the
# fixed panels cannot resolve and the optimizer would chase quadrature error.
_BOX = {
    "a_gap": (math.log(1e-9), math.log(50.0)),
    "scale": (-20.0, 20.0),
    "k": (math.log(1e-3), math.log(1e3)),
    "sigma": (math.log(1e-6), math.log(1e3)),
}
_BOX_ORDER = ("a_gap", "scale", "k", "sigma")


def _clip(x):
    lo = np.array([_BOX[k][0] for k in _BOX_ORDER[: len(x)]])
    hi = np.array([_BOX[k][1] for k in _BOX_ORDER[: len(x)]])
    return np.clip(x, lo, hi)


def _unpack(x, family: ProfileFamily, a_lo: float):
    x = _clip(np.asarray(x, dtype=float))
    a = a_lo + math.exp(x[0])
    scale = math.exp(x[1])
    k = 1.0 + math.exp(x[2]) if family.level >= 2 else family.k_fixed
    sigma = math.exp(x[3]) if family.level >= 3 else family.sigma_fixed
    return a, k, sigma, scale


def _seeds(family: ProfileFamily):
    base = [
        [math.log(0.5), 0.0, 0.0, math.log(0.1)],
        [math.log(0.02), math.log(3.0), 0.0, math.log(0.1)],
    ]
    dims = 2 + (family.level >= 2) + (family.level >= 3)
    return [np.array(s[:dims]) for s in base]


def _minimize_problem(prob: _Problem, family: ProfileFamily, budget: int):
    a_lo = prob.a_lo
    fun = lambda x: prob.quotient(*_unpack(x, family, a_lo))

    def safe(x):
        try:
            v = fun(x)
        except FloatingPointError:
            return np.inf
        return v if np.isfinite(v) else np.inf

    best_x, best_v, fev = None, np.inf, 0
    for x0 in _seeds(family):
        if budget <= 0:
            v = safe(x0)
            fev += 1
        else:
            res = minimize(safe, x0, method="Nelder-Mead", options={"maxfev": budget, "xatol": 1e-10, "fatol": 1e-14})
            x0, v = res.x, res.fun
            fev += res.nfev
        if v < best_v:
            best_x, best_v = np.asarray(x0), v
        if budget <= 0:
            break
    a, k, sigma, scale = _unpack(best_x, family, a_lo)
    return float(best_v), {"a": a, "k": k, "sigma": sigma, "scale": scale}, fev


def _mode_problems(which, p, d, field_spec, family):
    make = lambda n, m: _Problem(which, p, d, field_spec, int(n), int(m), family.angular_nodes)
    if field_spec.kind == "none":
        return [make(0, 0)]
    if field_spec.kind == "ab-line":
        return [make(n, m) for n in family.modes for m in family.polar_powers]
    return [make(n, 0) for n in family.modes]


def _search(which, p, d, field_spec, family, budget, extra_meta):
    best = None
    per_mode = []
    fev = 0
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        for prob in _mode_problems(which, p, d, field_spec, family):
            v, wit, used = _minimize_problem(prob, family, budget)
            fev += used
            per_mode.append({"n": prob.n, "m": prob.m, "value": v})
            if best is None or v < best[0]:
                best = (v, dict(wit, n=prob.n, m=prob.m))
    value, witness = best
    meta = {"which": which, "p": p, "d": d, "field": field_spec.to_dict(), "family": family.to_dict(),
            "budget": budget, "per_mode": per_mode}
    meta.update(extra_meta)
    return ConstantEstimate(value, witness, fev, 0.0, "upper-bound-on-inf", meta)


def family_mode_quotient(beta: float, p: float, n: int, a: float, k: float = 2.0, sigma: float = 1e-3) -> float:
    """Single-mode Hardy quotient of the power-cutoff profile in the AB field."""
    prob = _Problem("mode", p, 2, FieldSpec("ab", beta), n, 0, 1)
    if not a > prob.a_lo:
        raise AdmissibilityError(f"need a > {(p - 2) / p} for a finite energy")
    return prob.quotient(a, k, sigma, 1.0)


def ab_hardy_upper_bound(beta: float, p: float, modes=range(-5, 6), family: ProfileFamily | None = None, budget: int = 1500) -> ConstantEstimate:
    """Minimize the single-mode AB Hardy quotient over the family and modes.

    The result is an upper bound on the best constant lambda(p).  Its meta
    records the free constant ((2-p)/p)^p and, for p < 2, the mean value
    constant (sqrt((2-p)^2 + beta^2 p^2)/p)^p.
    """
    if not 1.0 < p <= 2.0:
        raise AdmissibilityError(f"the AB Hardy probe needs 1 < p <= 2, got p={p}")
    family = family or ProfileFamily()
    family = ProfileFamily(family.level, tuple(int(n) for n in modes), family.polar_powers,
                           family.k_fixed, family.sigma_fixed, family.angular_nodes)
    extra = {
        "free_constant": hardy_constant(p, 2),
        "mean_value_constant": mean_value_constant(beta, p) if p < 2 else None,
        "dist_sq": min(abs(beta - round(beta)), 1.0) ** 2 if p == 2 else None,
    }
    return _search("mode", p, 2, FieldSpec("ab", beta), family, budget, extra)


PROBES = ("thm1", "conj1", "conj2")


def conjecture_probe(which: str, params, field_spec: FieldSpec, family: ProfileFamily | None = None, budget: int = 400) -> ConstantEstimate:
    """Upper bound on the best constant of a magnetic Hardy-type statement.

    thm1:  int |grad_A u|^p / int rho |u|^p, with rho = 1/(1 + |x|^d |log|x||^d)
           for p = d and 1/(1 + |x|^p) for p > d; needs p >= d and a field.
    conj1: (int |grad_A u|^p - mu int |u|^p/|x|^p) / int |grad_A(u |x|^g)|^p |x|^(p-d)
           with g = (d-p)/p; needs 2 <= p < d.
    conj2: the same excess over int |u|^p/(1 + |x|^p); needs 2 <= p < d and a field.

    ``budget`` is the Nelder-Mead evaluation cap per seed and mode; 0
    returns the quotient of the seed profile.  The value is evidence only.
    """
    if which not in PROBES:
        raise ValueError(f"unknown probe {which!r}; expected one of {PROBES}")
    family = family or ProfileFamily()
    p, d = params.p, params.d
    if which == "thm1":
        params.require(p >= d, "thm1 probes need p >= d")
    else:
        params.require(2 <= p < d, f"{which} probes need 2 <= p < d")
    if which in ("thm1", "conj2") and not field_spec.nonzero:
        raise AdmissibilityError(f"{which} probes need a nonzero magnetic field")
    if field_spec.dims is not None and field_spec.dims != d:
        raise AdmissibilityError(f"field {field_spec.kind!r} lives in d = {field_spec.dims}, not d = {d}")
    return _search(which, p, d, field_spec, family, budget, {})


# ---------------------------------------------------------------------------
# the ball quotient with free boundary


def mu_R_oracle_p2(R: float, beta: float, n: int | None = None) -> float:
    """(j'_{nu,1}/R)^2, nu = |n - beta|: the p = 2 Neumann value of one mode."""
    if n is None:
        n = int(round(beta))
    nu = abs(n - beta)
    if nu == 0:
        return 0.0
    f = lambda x: jvp(nu, x)
    # j'_{nu,1} lies in (nu, nu + 2 + 2 sqrt(nu)) for nu > 0
    lo, hi = nu * (1.0 + 1e-12) if nu > 1 else 1e-6, nu + 2.0 + 2.0 * math.sqrt(nu)
    xs = np.linspace(lo, hi, 2000)
    vals = f(xs)
    i = int(np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0])
    return (brentq(f, xs[i], xs[i + 1], xtol=1e-15) / R) ** 2


def mu_R_estimate(R: float, beta: float, p: float, modes=None, n_nodes: int = 1500, opts: DescentOptions | None = None) -> QuotientResult:
    """Estimate of inf int_{B_R} |grad_A u|^p / int_{B_R} |u|^p.

    Single modes, nodal descent on a log grid over [R 1e-8, R]: the inner node
    is pinned at zero and the outer node is free (no boundary condition at
    r = R).  Descent needs p >= 2.  Returns the best mode's result.  The
    restriction to single modes biases the value upward; the trapezoid
    discretization can move it either way by O(h^2).
    """
    if p < 2:
        raise AdmissibilityError("the nodal ball quotient needs p >= 2")
    if R <= 0:
        raise ValueError("R must be positive")
    if modes is None:
        c = int(math.floor(beta))
        modes = (c, c + 1)
    grid = make_log_radial_grid(R * 1e-8, R, n_nodes, 2)
    opts = opts or DescentOptions(pin_outer=False, maxiter=3000)
    best = None
    for n in modes:
        nu = n - beta
        r = grid.nodes
        init = Field(grid, (r / R) ** max(abs(nu), 0.5) * (1.0 + 0.0 * r))
        res = minimize_quotient(init, Energy(p, kappa=lambda rr, nu=nu: nu / rr), WeightedNorm(p, WeightSpec("unit")), opts)
        if best is None or res.value < best.value:
            best = res
    return best
