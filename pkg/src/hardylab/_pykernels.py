"""Pure-numpy reference versions of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
The two must agree to rounding; ``tests/test_kernels.py`` checks that.
"""
import numpy as np

# Beyond this ratio |y|/|x| the reduced objective switches to the expansion
# around |y|^p, which avoids cancellation between the three large terms.
S_SWITCH = 5.0
_SERIES_TERMS = 80


def _binomial_tail(z, alpha):
    """(1 + z)^alpha - 1 - alpha z by Horner on the binomial series, |z| < 1/2."""
    coeffs = np.empty(_SERIES_TERMS + 1)
    coeffs[0] = 1.0
    for k in range(1, _SERIES_TERMS + 1):
        coeffs[k] = coeffs[k - 1] * (alpha - k + 1) / k
    acc = np.zeros_like(z)
    for k in range(_SERIES_TERMS, 1, -1):
        acc = acc * z + coeffs[k]
    return acc * z * z


def reduced_T(s, c, p):
    """g(s, c) = |e1 + y|^p - |y|^p - p |y|^(p-2) y.e1 with |y| = s, cos angle = c."""
    s, c = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(c, dtype=float))
    out = np.empty(s.shape)
    if p == 2:
        # exact identity |e1 + y|^2 - |y|^2 - 2 y.e1 = 1; skip the cancellation
        out[...] = 1.0
        return out
    near = s < S_SWITCH
    sn, cn = s[near], c[near]
    q = np.maximum(1.0 + 2.0 * sn * cn + sn * sn, 0.0)
    out[near] = q ** (0.5 * p) - sn ** p - p * sn ** (p - 1.0) * cn
    far = ~near
    if np.any(far):
        sf, cf = s[far], c[far]
        z = (1.0 + 2.0 * sf * cf) / (sf * sf)
        out[far] = 0.5 * p * sf ** (p - 2.0) + sf ** p * _binomial_tail(z, 0.5 * p)
    return out


def scan_extremum(s_nodes, theta_nodes, p, norm_exponent, maximize):
    """Extremum of g(s, theta) / (1 + s)^norm_exponent over a tensor grid.

    Rows are s, columns theta; ties go to the first row-major hit.
    Returns (value, row, col).
    """
    s_nodes = np.asarray(s_nodes, dtype=float)
    c_nodes = np.cos(np.asarray(theta_nodes, dtype=float))
    vals = reduced_T(s_nodes[:, None], c_nodes[None, :], p)
    if norm_exponent != 0.0:
        vals = vals / (1.0 + s_nodes[:, None]) ** norm_exponent
    flat = np.argmax(vals) if maximize else np.argmin(vals)
    i, j = divmod(int(flat), vals.shape[1])
    return float(vals[i, j]), i, j


def first_below(s, c, p, threshold):
    """Index of the first sample with g(s, c) < threshold, or -1."""
    vals = reduced_T(s, c, p)
    hits = np.flatnonzero(vals < threshold)
    return int(hits[0]) if hits.size else -1


def staggered_energy(u, dr, weight, kappa2, p, want_grad):
    """Midpoint-rule p-energy of a real nodal profile.

    On each cell m the derivative is (u[m+1]-u[m])/dr[m], the value is the
    cell average, and the integrand is (u'^2 + kappa2[m] * ubar^2)^(p/2)
    times weight[m].  Returns (per-cell integrand array, gradient or None).
    """
    du = (u[1:] - u[:-1]) / dr
    ub = 0.5 * (u[1:] + u[:-1])
    sq = du * du + kappa2 * ub * ub
    cell = weight * sq ** (0.5 * p)
    if not want_grad:
        return cell, None
    fac = weight * p * sq ** (0.5 * p - 1.0)
    lo = fac * (-du / dr + 0.5 * kappa2 * ub)
    hi = fac * (du / dr + 0.5 * kappa2 * ub)
    grad = np.zeros_like(u)
    grad[:-1] += lo
    grad[1:] += hi
    return cell, grad
