import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardylab.fields import AdmissibilityError, Params, WeightSpec, hardy_constant, make_log_radial_grid
from hardylab.profiles import BumpSum, random_bump_sum
from hardylab.supersolution import (
    RadialProfile,
    exterior_constant,
    exterior_hardy_check,
    exterior_sharpness_probe,
    fd_p_laplacian,
    kelvin_check,
    radial_p_laplacian,
    remainder_inequality_check,
    residual_profile,
    supersolution_residual,
    weighted_remainder,
)


@pytest.mark.parametrize("a,d", [(-0.5, 3), (1.0, 2), (2.0, 4), (-1.3, 5)])
def test_p2_power_laplacian_is_classical(a, d):
    # Delta r^a = a (a + d - 2) r^(a - 2)
    lap = radial_p_laplacian(RadialProfile.power(a, coef=1.7), 2.0, d)
    r = np.geomspace(0.1, 10, 7)
    np.testing.assert_allclose(lap(r), 1.7 * a * (a + d - 2) * r ** (a - 2), rtol=1e-14)


@pytest.mark.parametrize("p,d,a", [(2.0, 3, -0.5), (3.0, 5, 0.7), (2.5, 4, -1.2), (1.5, 2, 1.5)])
def test_closed_form_matches_stencil_at_second_order(p, d, a):
    v = RadialProfile.power(a)
    exact = radial_p_laplacian(v, p, d)
    errs = []
    for n in (201, 401, 801):
        grid = make_log_radial_grid(0.5, 2.0, n, d)
        fd = radial_p_laplacian(v, p, d, grid, "fd")
        errs.append(np.max(np.abs(fd.values - exact(fd.grid.nodes)) / np.abs(exact(fd.grid.nodes))))
    assert errs[-1] < 1e-5
    for e1, e2 in zip(errs, errs[1:]):
        assert math.log2(e1 / e2) == pytest.approx(2.0, abs=0.1)


def test_stencil_rejects_nonuniform_grid():
    grid = make_log_radial_grid(1.0, 2.0, 10, 3)
    bad = type(grid)(grid.nodes + 0.1 * grid.nodes**2, grid.weights, 3)
    with pytest.raises(ValueError):
        fd_p_laplacian(np.ones(10), bad, 2.0, 3)
    with pytest.raises(ValueError):
        radial_p_laplacian(RadialProfile.log_power(0.5, 1.0), 2.0, 3, method="closed")
    with pytest.raises(ValueError):
        radial_p_laplacian(RadialProfile.power(1.0), 1.0, 3)


@pytest.mark.parametrize("p,d", [(2.0, 3), (2.5, 4), (3.0, 5), (1.5, 3), (4.0, 2)])
def test_hardy_power_is_exact_solution(p, d):
    grid = make_log_radial_grid(1e-4, 1e4, 301, d)
    v = RadialProfile.power(-(d - p) / p)
    res = residual_profile(v, WeightSpec("inverse-p-power", scale=hardy_constant(p, d)), p, d, grid, "closed")
    assert res.max_relative <= 1e-12


@given(a=st.floats(-4.0, 2.0), pd=st.sampled_from([(2.0, 3), (2.5, 4), (3.0, 5), (1.5, 3)]))
def test_no_power_beats_the_hardy_constant(a, pd):
    # -Delta_p r^a = k(a) r^(a(p-1) - p) with k(a) <= mu, so no power certifies a larger weight
    p, d = pd
    if abs(a) < 1e-6:
        return
    grid = make_log_radial_grid(0.5, 2.0, 11, d)
    V = WeightSpec("inverse-p-power", scale=hardy_constant(p, d))
    assert supersolution_residual(RadialProfile.power(a), V, p, d, grid, "closed") <= 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
def test_log_profile_residual_is_second_order(d):
    R = 2.0
    v = RadialProfile.log_power((d - 1) / d, R)
    W = WeightSpec("exterior-log", scale=((d - 1) / d) ** d, R=R)
    errs = [residual_profile(v, W, d, d, make_log_radial_grid(R * math.exp(0.2), R * math.exp(8.0), n, d), "fd").max_relative
            for n in (501, 1001, 2001)]
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(1.8 <= r <= 2.2 for r in rates), rates


def test_residual_requires_positive_candidate():
    grid = make_log_radial_grid(0.5, 2.0, 11, 3)
    with pytest.raises(ValueError):
        residual_profile(RadialProfile.power(1.0, coef=-1.0), WeightSpec("unit"), 2.0, 3, grid)


def test_profile_derivatives():
    r = np.geomspace(1.5, 20, 9)
    h = 1e-6
    for v in (RadialProfile.power(-0.7, 2.0), RadialProfile.log_power(0.6, 1.0),
              RadialProfile("product", a=0.3, alpha=1.4, R=1.0)):
        f, f1, f2 = v.derivatives(r)
        np.testing.assert_allclose(f1, (v(r + h) - v(r - h)) / (2 * h), rtol=1e-7)
        k = 1e-4
        np.testing.assert_allclose(f2, (v(r + k) - 2 * f + v(r - k)) / k**2, rtol=1e-5, atol=1e-7)
    nodes = np.geomspace(1.0, 10.0, 400)
    s = RadialProfile.sampled(nodes, nodes**1.5)
    np.testing.assert_allclose(s.derivatives(r[r < 9])[1], 1.5 * r[r < 9] ** 0.5, rtol=1e-6)
    with pytest.raises(ValueError):
        RadialProfile.log_power(0.5, 2.0)(np.array([1.0]))
    with pytest.raises(ValueError):
        RadialProfile("other")


@pytest.mark.parametrize("seed", range(5))
def test_remainder_is_an_identity_at_p2(seed):
    grid = make_log_radial_grid(math.exp(-4.5), math.exp(4.5), 4096, 3)
    u = random_bump_sum(np.random.default_rng(seed), -4, 4).sample(grid)
    scale = weighted_remainder(u, 2.0, 3)
    assert abs(remainder_inequality_check(u, 2.0, 3, 1.0)) <= 1e-9 * scale


@given(seed=st.integers(0, 2**32 - 1), pd=st.sampled_from([(3.0, 5), (4.0, 6), (2.5, 4)]))
def test_remainder_inequality_with_proven_constant(seed, pd):
    p, d = pd
    grid = make_log_radial_grid(math.exp(-4.5), math.exp(4.5), 2048, d)
    u = random_bump_sum(np.random.default_rng(seed), -4, 4).sample(grid)
    c = 1 / (2 ** (p - 1) - 1)
    assert remainder_inequality_check(u, p, d, c) >= -1e-6 * weighted_remainder(u, p, d)


def test_remainder_range():
    grid = make_log_radial_grid(0.1, 10.0, 100, 3)
    u = BumpSum.single(0.2, 5.0).sample(grid)
    with pytest.raises(AdmissibilityError):
        weighted_remainder(u, 1.5, 3)
    with pytest.raises(AdmissibilityError):
        remainder_inequality_check(u, 3.0, 3, 0.1)


def test_exterior_constants():
    assert exterior_constant(2.0, 3) == pytest.approx(0.25)
    assert exterior_constant(3.0, 3) == pytest.approx((2 / 3) ** 3)
    assert exterior_constant(2.0, 2) == pytest.approx(0.25)


@given(seed=st.integers(0, 2**32 - 1), pd=st.sampled_from([(2.0, 3), (3.0, 2), (2.0, 2), (3.0, 3)]))
def test_exterior_inequality_holds(seed, pd):
    p, d = pd
    R = 1.5
    grid = make_log_radial_grid(R, R * math.exp(6.0), 4000, d)
    u = random_bump_sum(np.random.default_rng(seed), math.log(R) + 0.05, math.log(R) + 5.9).sample(grid)
    assert exterior_hardy_check(u, p, d, R, tol=1e-8).holds


def test_exterior_rejects_support_inside_ball():
    grid = make_log_radial_grid(0.5, 4.0, 400, 2)
    u = BumpSum.single(0.6, 3.0).sample(grid)
    with pytest.raises(ValueError):
        exterior_hardy_check(u, 2.0, 2, 1.0)


@pytest.mark.parametrize("d", [2, 3])
def test_exterior_sharpness_probe_decreases_to_constant(d):
    vals = exterior_sharpness_probe(d, [1e-1, 1e-2, 1e-3])
    c = exterior_constant(d, d)
    assert all(v >= c for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] / c - 1 < 0.1


@pytest.mark.parametrize("d,R", [(2, 1.0), (3, 0.5), (4, 3.0)])
def test_kelvin_invariance(d, R):
    u = random_bump_sum(np.random.default_rng(d), math.log(R) - 4.0, math.log(R) - 0.05)
    e, h = kelvin_check(u, d, R, n=1 << 13)
    assert e <= 1e-8 and h <= 1e-8


def test_kelvin_preconditions():
    u = BumpSum.single(0.1, 0.9)
    with pytest.raises(ValueError):
        kelvin_check(u, 3, 1.0, p=2.0)
    with pytest.raises(ValueError):
        kelvin_check(u, 3, 0.5)


def test_params_still_validate_dimension():
    with pytest.raises(AdmissibilityError):
        Params(2.0, 0)
