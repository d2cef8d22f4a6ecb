"""Small numerical utilities: normal pdf/cdf, symmetric 2x2 linear algebra,
finite differences, truncated normal moments, and an asymptotic expansion for
exponentially tilted Gaussian tail expectations."""
import math

import numpy as np

from .errors import DegeneracyError

SQRT_2PI = math.sqrt(2.0 * math.pi)


def normal_pdf(z):
    return math.exp(-0.5 * z * z) / SQRT_2PI


def normal_cdf(z):
    # complementary error function keeps the lower tail accurate
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_sf(z):
    """Upper tail 1 - Phi(z), accurate for large z."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# --- symmetric 2x2 helpers -------------------------------------------------
#
# Everything downstream works with 2x2 matrices only, so closed forms beat
# generic linear algebra and make the degeneracy guards explicit.

_DEGEN_REL = 1e-14


def _check_sym2(a):
    a = np.asarray(a, dtype=float)
    if a.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {a.shape}")
    scale = np.max(np.abs(a))
    if scale > 0 and abs(a[0, 1] - a[1, 0]) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    return a, scale


def det2(a):
    a, _ = _check_sym2(a)
    return a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]


def inv2(a):
    a, scale = _check_sym2(a)
    d = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(d) < _DEGEN_REL * scale * scale:
        raise DegeneracyError(f"2x2 matrix is numerically singular (det={d:.3e})")
    return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / d


def solve2(a, b):
    a, scale = _check_sym2(a)
    b = np.asarray(b, dtype=float)
    d = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(d) < _DEGEN_REL * scale * scale:
        raise DegeneracyError(f"2x2 solve with numerically singular matrix (det={d:.3e})")
    return np.array(
        [a[1, 1] * b[0] - a[0, 1] * b[1], a[0, 0] * b[1] - a[1, 0] * b[0]]
    ) / d


def min_eig2(a):
    """Smaller eigenvalue of a symmetric 2x2 matrix, closed form."""
    a, _ = _check_sym2(a)
    tr = a[0, 0] + a[1, 1]
    # discriminant of the characteristic polynomial, never negative for symmetric input
    disc = (a[0, 0] - a[1, 1]) ** 2 + 4.0 * a[0, 1] ** 2
    return 0.5 * (tr - math.sqrt(max(disc, 0.0)))


def finite_diff_grad(f, t, h=1e-6):
    """Central-difference gradient of a scalar function of a 2-vector."""
    t = np.asarray(t, dtype=float)
    g = np.empty(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        g[k] = (f(t + e) - f(t - e)) / (2.0 * h)
    return g


def trunc_moment(j, y):
    """Lower truncated moment of the standard normal law.

    Returns the integral of z**j * phi(z) over (-inf, y], by the recursion
    m_j = -y**(j-1) phi(y) + (j-1) m_{j-2} seeded with m_0 = Phi(y) and
    m_1 = -phi(y).
    """
    if j < 0 or j != int(j):
        raise ValueError("moment order must be a nonnegative integer")
    j = int(j)
    phi_y = normal_pdf(y)
    m_prev = normal_cdf(y)          # order 0
    if j == 0:
        return m_prev
    m_cur = -phi_y                  # order 1
    for order in range(2, j + 1):
        m_prev, m_cur = m_cur, -(y ** (order - 1)) * phi_y + (order - 1) * m_prev
    return m_cur


def tilted_tail_exact(x, y, mu=0.0, sigma2=1.0):
    """E[exp(-x*Y); Y >= y] for Y ~ Normal(mu, sigma2), exact.

    Completing the square moves the mean to mu - x*sigma2 and leaves the
    Gaussian upper-tail integral below. Used as the reference for
    mills_expansion.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    sigma = math.sqrt(sigma2)
    return math.exp(0.5 * x * x * sigma2 - x * mu) * normal_sf((y - mu) / sigma + x * sigma)


def mills_expansion(x, y, mu=0.0, sigma2=1.0, k=0):
    """Asymptotic series for E[exp(-x*Y); Y >= y], Y ~ Normal(mu, sigma2).

    Truncated after k+1 terms; the m-th coefficient is
    (-1)^m (2m)! / (sigma^{2m} 2^m m!), applied to powers of
    1 / (x + (y - mu)/sigma2), with the density of Y at y out front (the 1/sigma
    Jacobian matters: without it the series is off by a factor sigma whenever
    sigma2 != 1). Valid as x grows with y near mu; remainder is o of the first
    omitted power.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if k < 0 or k != int(k):
        raise ValueError("truncation order k must be a nonnegative integer")
    sigma = math.sqrt(sigma2)
    arg = x + (y - mu) / sigma2
    if arg <= 0:
        raise ValueError("expansion needs x + (y - mu)/sigma2 > 0")
    total = 0.0
    for m in range(int(k) + 1):
        coeff = (-1.0) ** m * math.factorial(2 * m) / (
            sigma ** (2 * m) * 2.0**m * math.factorial(m)
        )
        total += coeff * arg ** -(2 * m + 1)
    return math.exp(-x * y) * normal_pdf((y - mu) / sigma) / sigma * total
