import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from hardylab.algebraic import (
    BoundaryActiveError,
    ReducedObjective,
    UnboundedGrowthError,
    VecPair,
    estimate_equivalence_sup,
    estimate_optimal_c,
    eval_T,
    reduce_by_symmetry,
    verify_lower_bound,
)
from hardylab.fields import AdmissibilityError

vec3 = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3)


def _raw_T(x, y, p):
    """Direct vector formula, no reduction and no series."""
    ny = np.linalg.norm(y)
    lead = ny ** (p - 2) * (y @ x) if ny > 0 else 0.0
    return np.linalg.norm(x + y) ** p - ny**p - p * lead


def _raw_reduced_min(p):
    """Independent estimate: Nelder-Mead on the raw plane formula from many starts."""
    f = lambda v: _raw_T(np.array([1.0, 0.0]), v[0] * np.array([math.cos(v[1]), math.sin(v[1])]), p)
    opts = {"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000}
    return min(minimize(f, [s0, t0], method="Nelder-Mead", options=opts).fun
               for s0 in (0.1, 0.5, 1.0, 2.0, 5.0) for t0 in (2.0, 2.8, 3.1))


def test_eval_T_matches_high_precision():
    rng = np.random.default_rng(11)
    for p in (2.0, 2.5, 3.0, 4.0, 6.0):
        for _ in range(40):
            x = rng.standard_normal(3) * 10 ** rng.uniform(-2, 2)
            y = rng.standard_normal(3) * 10 ** rng.uniform(-2, 2)
            with mpmath.workdps(60):
                X = [mpmath.mpf(v) for v in x]
                Y = [mpmath.mpf(v) for v in y]
                norm = lambda v: mpmath.sqrt(sum(a * a for a in v))
                ny = norm(Y)
                want = (norm([a + b for a, b in zip(X, Y)]) ** p - ny**p
                        - p * ny ** (p - 2) * sum(a * b for a, b in zip(X, Y)))
                want = float(want)
            got = eval_T(VecPair(x, y), p)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12 * float(np.linalg.norm(x)) ** p)


@given(x=vec3, y=vec3, lam=st.floats(1e-2, 1e2), p=st.floats(2.0, 6.0))
def test_T_is_p_homogeneous(x, y, lam, p):
    x, y = np.array(x), np.array(y)
    if np.linalg.norm(x) < 1e-6:
        return
    a = eval_T(VecPair(lam * x, lam * y), p)
    b = lam**p * eval_T(VecPair(x, y), p)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9 * lam**p * np.linalg.norm(x) ** p)


@given(x=vec3, y=vec3, p=st.floats(2.0, 6.0), seed=st.integers(0, 2**32 - 1))
def test_T_is_rotation_invariant(x, y, p, seed):
    x, y = np.array(x), np.array(y)
    if np.linalg.norm(x) < 1e-6:
        return
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((3, 3)))
    a = eval_T(VecPair(q @ x, q @ y), p)
    b = eval_T(VecPair(x, y), p)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9 * np.linalg.norm(x) ** p)


@given(x=vec3, y=vec3, p=st.floats(2.0, 8.0))
def test_lower_bound_with_proven_constant(x, y, p):
    x, y = np.array(x), np.array(y)
    nx = np.linalg.norm(x)
    if nx < 1e-6:
        return
    c = 1.0 / (2.0 ** (p - 1) - 1.0)
    assert eval_T(VecPair(x, y), p) / nx**p >= c - 1e-12


def test_reduced_objective_matches_raw_formula():
    obj = reduce_by_symmetry(3.0)
    assert isinstance(obj, ReducedObjective)
    for s, t in ((0.0, 0.0), (0.3, 2.0), (7.0, 3.0), (100.0, 1.0)):
        pair = obj.pair(s, t)
        assert float(obj(s, t)) == pytest.approx(_raw_T(pair.x, pair.y, 3.0), rel=1e-10, abs=1e-10)


def test_optimal_c_at_two_is_exactly_one():
    est = estimate_optimal_c(2.0)
    assert est.value == 1.0
    assert est.bound_direction == "upper-bound-on-inf"


def test_optimal_c_at_three_is_two_minus_root_two():
    # on the antiparallel ray g(s) = 1 - 3s + 6s^2 - 2s^3 for s < 1, minimized at s = 1 - 1/sqrt(2)
    est = estimate_optimal_c(3.0)
    assert est.value == pytest.approx(2 - math.sqrt(2), abs=1e-12)
    assert est.witness[0] == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-6)
    assert est.witness[1] == pytest.approx(math.pi)


@pytest.mark.parametrize("p", [2.5, 3.0, 4.0, 6.0])
def test_optimal_c_agrees_with_independent_search(p):
    assert estimate_optimal_c(p).value == pytest.approx(_raw_reduced_min(p), abs=1e-10)


def test_optimal_c_is_decreasing_and_above_proven_floor():
    vals = [estimate_optimal_c(p).value for p in (2.0, 2.5, 3.0, 4.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    for p, v in zip((2.0, 2.5, 3.0, 4.0), vals):
        assert v >= 1 / (2 ** (p - 1) - 1) - 1e-12


def test_boundary_active_is_reported():
    with pytest.raises(BoundaryActiveError):
        estimate_optimal_c(3.0, s_max=0.1)


def test_verify_lower_bound_finds_real_counterexamples():
    hit = verify_lower_bound(3.0, 0.9, 20000, seed=1)
    assert hit is not None
    assert eval_T(hit, 3.0) < 0.9 * np.linalg.norm(hit.x) ** 3
    again = verify_lower_bound(3.0, 0.9, 20000, seed=1)
    assert np.array_equal(hit.x, again.x) and np.array_equal(hit.y, again.y)


def test_verify_lower_bound_clean_at_optimal_constant():
    c = estimate_optimal_c(3.0).value
    assert verify_lower_bound(3.0, c, 200000, seed=2) is None


def test_equivalence_sup():
    assert estimate_equivalence_sup(2.0).value == pytest.approx(1.0)
    for p in (2.5, 3.0, 4.0):
        est = estimate_equivalence_sup(p)
        assert est.bound_direction == "lower-bound-on-sup"
        # the ratio creeps up to p(p-1)/2 as |y|/|x| grows, so the edge is active
        limit = 0.5 * p * (p - 1)
        assert est.meta["boundary_active"]
        assert limit * (1 - 2e-3) <= est.value <= limit
    with pytest.raises(UnboundedGrowthError):
        estimate_equivalence_sup(4.0, norm_exponent=0.0)


def test_admissibility():
    with pytest.raises(AdmissibilityError):
        estimate_optimal_c(1.5)
    with pytest.raises(AdmissibilityError):
        eval_T(VecPair([1.0], [2.0]), 1.9)
    with pytest.raises(ValueError):
        VecPair([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        verify_lower_bound(3.0, -1.0, 10)
