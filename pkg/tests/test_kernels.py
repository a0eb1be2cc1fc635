import os
import subprocess
import sys

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardylab import _pykernels, kernels

BACKENDS = kernels.backends()
needs_ext = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def _oracle_T(s, c, p):
    """|e1 + y|^p - |y|^p - p |y|^(p-2) y.e1 at 60 digits."""
    with mpmath.workdps(60):
        s, c, p = mpmath.mpf(s), mpmath.mpf(c), mpmath.mpf(p)
        q = 1 + 2 * s * c + s * s
        sp = s**p if s > 0 else mpmath.mpf(0)
        cross = p * s ** (p - 1) * c if s > 0 else mpmath.mpf(0)
        return float(q ** (p / 2) - sp - cross)


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("p", [2.0, 2.5, 3.0, 4.0, 6.0, 7.3])
def test_reduced_T_matches_high_precision(name, p):
    mod = BACKENDS[name]
    rng = np.random.default_rng(3)
    s = np.concatenate(([0.0, 4.999, 5.0, 5.001], 10.0 ** rng.uniform(-3, 3, 60)))
    c = rng.uniform(-1, 1, s.size)
    got = mod.reduced_T(s, c, p)
    for si, ci, gi in zip(s, c, got):
        want = _oracle_T(si, ci, p)
        # the three terms are of size s^p; compare against the leading surviving size
        scale = max(abs(want), 1e-300)
        assert abs(gi - want) <= 1e-10 * scale + 1e-13 * max(1.0, si) ** (p - 2), (si, ci, gi, want)


@needs_ext
@given(
    s=st.lists(st.floats(0.0, 1e3), min_size=1, max_size=50),
    data=st.data(),
    p=st.floats(2.0, 8.0),
)
def test_backends_agree_on_reduced_T(s, data, p):
    c = data.draw(st.lists(st.floats(-1.0, 1.0), min_size=len(s), max_size=len(s)))
    a = BACKENDS["python"].reduced_T(np.array(s), np.array(c), p)
    b = BACKENDS["cython"].reduced_T(np.array(s), np.array(c), p)
    scale = np.maximum(1.0, np.array(s)) ** (p - 2.0)
    assert np.all(np.abs(a - b) <= 1e-11 * scale)


@needs_ext
@pytest.mark.parametrize("p,k,maximize", [(3.0, 0.0, False), (4.0, 0.0, False), (3.0, 1.0, True), (2.5, 0.5, True)])
def test_backends_agree_on_scan(p, k, maximize):
    s = np.concatenate(([0.0], np.geomspace(1e-4, 1e3, 127)))
    t = np.linspace(0, np.pi, 128)
    va, ia, ja = BACKENDS["python"].scan_extremum(s, t, p, k, maximize)
    vb, ib, jb = BACKENDS["cython"].scan_extremum(s, t, p, k, maximize)
    assert va == pytest.approx(vb, rel=1e-12)
    assert (ia, ja) == (ib, jb)


@needs_ext
def test_backends_agree_on_first_below():
    rng = np.random.default_rng(0)
    s = 10 ** rng.uniform(-3, 3, 5000)
    c = rng.uniform(-1, 1, s.size)
    for thr in (-1.0, 0.2, 0.4, 10.0):
        assert BACKENDS["python"].first_below(s, c, 3.0, thr) == BACKENDS["cython"].first_below(s, c, 3.0, thr)


@needs_ext
@pytest.mark.parametrize("p", [2.0, 2.5, 3.0, 4.0])
def test_backends_agree_on_staggered_energy(p):
    rng = np.random.default_rng(1)
    n = 300
    u = rng.standard_normal(n)
    dr = rng.uniform(0.01, 0.1, n - 1)
    w = rng.uniform(0.5, 2, n - 1)
    k2 = rng.uniform(0, 3, n - 1)
    ca, ga = BACKENDS["python"].staggered_energy(u, dr, w, k2, p, True)
    cb, gb = BACKENDS["cython"].staggered_energy(u, dr, w, k2, p, True)
    np.testing.assert_allclose(ca, cb, rtol=1e-12)
    np.testing.assert_allclose(ga, gb, rtol=1e-10, atol=1e-10 * np.max(np.abs(ga)))
    assert BACKENDS["cython"].staggered_energy(u, dr, w, k2, p, False)[1] is None


@pytest.mark.parametrize("p", [2.0, 3.0, 4.5])
def test_staggered_gradient_matches_finite_differences(p):
    rng = np.random.default_rng(2)
    n = 40
    u = rng.standard_normal(n)
    # wide cells keep the energy O(1) so central differences stay accurate
    dr = rng.uniform(0.5, 1.0, n - 1)
    w = rng.uniform(0.5, 2, n - 1)
    k2 = rng.uniform(0, 3, n - 1)
    energy = lambda v: kernels.staggered_energy(v, dr, w, k2, p, False)[0].sum()
    _, grad = kernels.staggered_energy(u, dr, w, k2, p, True)
    h = 1e-6
    fd = np.array([(energy(u + h * e) - energy(u - h * e)) / (2 * h) for e in np.eye(n)])
    np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-6)


def test_p2_shortcut_is_exact():
    s = np.array([0.0, 1e-3, 1.0, 1e3])
    assert np.all(kernels.reduced_T(s, np.zeros_like(s), 2.0) == 1.0)


def test_fallback_selected_by_environment():
    env = dict(os.environ, HARDYLAB_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "from hardylab import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.reduced_T is not None
    assert "python" in BACKENDS and BACKENDS["python"] is _pykernels
