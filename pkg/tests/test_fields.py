import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardylab.fields import (
    AdmissibilityError,
    ConstantEstimate,
    DescentOptions,
    Energy,
    Field,
    Params,
    PolarFunction,
    PolarGrid,
    WeightedNorm,
    WeightSpec,
    ab_potential,
    check_diamagnetic,
    check_gauge,
    energy_p,
    grad_sq_closed,
    hardy_constant,
    hardy_term,
    magnetic_gradient_sq,
    make_exterior_log_grid,
    make_log_radial_grid,
    make_polar_grid,
    minimize_quotient,
    mode_function,
    quotient,
    radial_integral,
    sphere_area,
)
from hardylab.profiles import BumpSum, random_polar_function


def test_hardy_constant_values():
    assert hardy_constant(2, 3) == pytest.approx(0.25)
    assert hardy_constant(3, 5) == pytest.approx((2 / 3) ** 3)
    assert hardy_constant(2.5, 4) == pytest.approx(0.6**2.5)
    assert hardy_constant(3, 3) == 0.0
    # p > d uses |d - p|
    assert hardy_constant(4, 2) == pytest.approx(0.5**4)


@pytest.mark.parametrize("d,area", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi), (4, 2 * math.pi**2)])
def test_sphere_area(d, area):
    assert sphere_area(d) == pytest.approx(area, rel=1e-14)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_log_grid_integrates_gaussian(d):
    grid = make_log_radial_grid(1e-12, 12.0, 3000, d)
    exact = math.pi ** (d / 2)
    assert grid.integrate(np.exp(-grid.nodes**2)) == pytest.approx(exact, rel=1e-8)


def test_radial_integral_dimension_override():
    grid = make_log_radial_grid(1e-8, 12.0, 3000, 2)
    f = Field(grid, np.exp(-grid.nodes**2))
    assert radial_integral(f) == pytest.approx(math.pi, rel=1e-8)
    assert radial_integral(f, 3) == pytest.approx(math.pi**1.5, rel=1e-8)


def test_exterior_grid_resolves_log_singularity():
    # int_R^{R e} 1/(r log^{1/2}(r/R)) dr = int_0^1 l^{-1/2} dl = 2
    R = 2.0
    grid = make_exterior_log_grid(R, 1e-12, 1.0, 4000, 1)
    r = grid.nodes
    vals = 1.0 / (r * np.sqrt(np.log(r / R)))
    assert float(np.sum(grid.weights * vals)) == pytest.approx(2.0 - 2e-6, rel=1e-6)


def test_params_validation():
    with pytest.raises(AdmissibilityError):
        Params(1.0, 3)
    with pytest.raises(AdmissibilityError):
        Params(2.0, 2.5)
    with pytest.raises(AdmissibilityError):
        Params(2.0, 3, R=-1.0)
    with pytest.raises(AdmissibilityError):
        Params(2.0, 3).require(False, "rule")


def test_grid_and_field_validation():
    grid = make_log_radial_grid(0.1, 1.0, 10)
    with pytest.raises(ValueError):
        Field(grid, np.zeros(9))
    with pytest.raises(ValueError):
        Field(grid, np.full(10, np.nan))
    with pytest.raises(ValueError):
        PolarGrid(grid, 7)
    with pytest.raises(ValueError):
        make_log_radial_grid(1.0, 0.5, 10)
    with pytest.raises(ValueError):
        WeightSpec("exterior-log")


def _mode_grid():
    return make_polar_grid(math.exp(-2.5), math.exp(2.5), 200, 16)


@pytest.mark.parametrize("n,beta", [(0, 0.5), (2, 0.3), (-3, 1.7)])
def test_magnetic_gradient_spectral_matches_closed_form(n, beta):
    grid = _mode_grid()
    b = BumpSum.single(math.exp(-2), math.exp(2))
    u = mode_function(b, b.derivative, n)
    R, T = grid.mesh()
    # no dtheta: the angular derivative is taken spectrally
    f = Field(grid, u.value(R, T), u.d_r(R, T))
    got = magnetic_gradient_sq(f, beta)
    want = grad_sq_closed(u, R, T, beta)
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)


def test_mode_energy_matches_single_mode_formula():
    grid = _mode_grid()
    b = BumpSum.single(math.exp(-2), math.exp(2))
    n, beta, p = 2, 0.3, 2.0
    u = mode_function(b, b.derivative, n).sample(grid)
    h = energy_p(u, Params(p, 2, beta=beta), "ab-beta")
    radial = make_log_radial_grid(math.exp(-2.5), math.exp(2.5), 200, 2)
    r = radial.nodes
    want = radial.integrate(b.derivative(r) ** 2 + (n - beta) ** 2 * b(r) ** 2 / r**2)
    assert h == pytest.approx(want, rel=1e-12)


@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(-3, 3), p=st.floats(1.1, 4.0))
def test_conjugation_flips_flux(seed, beta, p):
    grid = make_polar_grid(math.exp(-2.5), math.exp(2.5), 64, 16)
    u = random_polar_function(np.random.default_rng(seed), -2, 2).sample(grid)
    a = energy_p(u.conj(), Params(p, 2, beta=beta), "ab-beta")
    b = energy_p(u, Params(p, 2, beta=-beta), "ab-beta")
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_free_energy_equals_zero_potential():
    grid = _mode_grid()
    u = random_polar_function(np.random.default_rng(0), -2, 2).sample(grid)
    zero = (np.zeros(grid.shape), np.zeros(grid.shape))
    assert energy_p(u, Params(3.0, 2), "free") == pytest.approx(energy_p(u, Params(3.0, 2), "custom-A", A=zero))


def test_hardy_term_and_quotient():
    grid = make_log_radial_grid(math.exp(-3), math.exp(3), 2000, 3)
    b = BumpSum.single(math.exp(-2), math.exp(2))
    u = b.sample(grid)
    params = Params(2.0, 3)
    h = hardy_term(u, WeightSpec("inverse-p-power"), params)
    r = grid.nodes
    assert h == pytest.approx(grid.integrate(b(r) ** 2 / r**2), rel=1e-14)
    q = quotient(u, Energy(2.0), WeightedNorm(2.0, WeightSpec("inverse-p-power")))
    assert q >= hardy_constant(2, 3)
    with pytest.raises(ValueError):
        quotient(Field(grid, np.zeros(grid.size)), Energy(2.0), WeightedNorm(2.0, WeightSpec("unit")))


def test_hardy_term_rejects_singular_weight_in_support():
    grid = make_log_radial_grid(0.5, 4.0, 200, 2)
    u = BumpSum.single(0.6, 3.0).sample(grid)
    with pytest.raises(ValueError):
        hardy_term(u, WeightSpec("exterior-log", R=1.0), Params(2.0, 2))


def test_shell_eigenvalue_by_descent():
    # -Delta on the shell 1 < |x| < 2 in R^3, radial Dirichlet ground state sin(pi (r-1))/r
    grid = make_log_radial_grid(1.0, 2.0, 801, 3)
    r = grid.nodes
    init = Field(grid, (r - 1) * (2 - r) * (1 + 0.3 * r))
    res = minimize_quotient(init, Energy(2.0), WeightedNorm(2.0, WeightSpec("unit")))
    assert res.converged
    assert res.value == pytest.approx(math.pi**2, rel=1e-4)
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(res.trace, res.trace[1:]))


@given(seed=st.integers(0, 2**32 - 1), p=st.sampled_from([2.0, 2.5, 3.0]))
def test_descent_trace_is_monotone(seed, p):
    rng = np.random.default_rng(seed)
    grid = make_log_radial_grid(1.0, 2.0, 60, 2)
    vals = rng.uniform(0.1, 1.0, grid.size)
    res = minimize_quotient(Field(grid, vals), Energy(p), WeightedNorm(p, WeightSpec("unit")),
                            DescentOptions(maxiter=15))
    assert all(b <= a * (1 + 1e-12) for a, b in zip(res.trace, res.trace[1:]))
    assert res.value <= res.trace[0]


def test_descent_rejects_small_p():
    grid = make_log_radial_grid(1.0, 2.0, 20, 2)
    with pytest.raises(AdmissibilityError):
        minimize_quotient(Field(grid, np.ones(20)), Energy(1.5), WeightedNorm(1.5, WeightSpec("unit")))


@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(-3, 3))
def test_diamagnetic_inequality_holds(seed, beta):
    rng = np.random.default_rng(seed)
    u = random_polar_function(rng, -2, 2)
    pts = (np.exp(rng.uniform(-2, 2, 300)), rng.uniform(0, 2 * np.pi, 300))
    assert check_diamagnetic(u, beta, pts).holds


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_gauge_invariance(p):
    grid = make_polar_grid(math.exp(-2.5), math.exp(2.5), 128, 16)
    psi = random_polar_function(np.random.default_rng(5), -2, 2).sample(grid)
    phi = PolarFunction(lambda r, t: r * np.sin(t), lambda r, t: np.sin(t), lambda r, t: r * np.cos(t))
    assert check_gauge(psi, phi, ab_potential(0.4), p) <= 1e-10


def test_gauge_numeric_route_converges():
    phi = PolarFunction(lambda r, t: r * np.sin(t), lambda r, t: np.sin(t), lambda r, t: r * np.cos(t))
    errs = []
    for n in (256, 512, 1024):
        # 64 angles resolve exp(i r sin t) on the support r < e^2
        grid = make_polar_grid(math.exp(-2.5), math.exp(2.5), n, 64)
        psi = random_polar_function(np.random.default_rng(5), -2, 2).sample(grid)
        errs.append(check_gauge(psi, phi, ab_potential(0.4), 2.0, derivative="numeric"))
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_constant_estimate_serializes():
    est = ConstantEstimate(0.5, (np.float64(1.0), 2), 10, 1e-8, "upper-bound-on-inf", {"x": np.arange(2)})
    d = est.to_dict()
    assert json.loads(json.dumps(d)) == d
    with pytest.raises(ValueError):
        ConstantEstimate(0.5, None, 1, 0.0, "sideways")


def test_decay_weights():
    r = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(WeightSpec("log-decay").evaluate(r, 2.0, 2), 1 / (1 + r**2 * np.log(r) ** 2))
    np.testing.assert_allclose(WeightSpec("power-decay").evaluate(r, 3.0, 2), 1 / (1 + r**3))
    assert WeightSpec("log-decay", scale=2.0).evaluate(np.array([1.0]), 2.0, 2)[0] == pytest.approx(2.0)
