"""Special functions used by the sampling kernels.

All routines are float64 and accept scalars or numpy arrays where noted.
The confluent hypergeometric function is only needed on the negative real
axis with second parameter 1/2 or 3/2, which is all that is implemented.
"""
import math
from functools import lru_cache

import numpy as np
from scipy import special as sps

__all__ = [
    "kummer_half",
    "kummer_three_half",
    "kummer_neg",
    "erfi",
    "hermite_scaled",
    "hermite_scaled_all",
    "laguerre",
    "binomial",
    "log_binomial",
    "series_switch_point",
]

_EPS = 1e-17
_MAX_SERIES_TERMS = 4000
# beyond this the alternating head of the series loses more than 1e-9
# relative accuracy even in extended precision
MAX_KUMMER_A = 16


def binomial(n, k):
    """Exact binomial coefficient C(n, k), zero when k < 0 or k > n."""
    if n < 0:
        raise ValueError("binomial: n must be nonnegative")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def log_binomial(n, k):
    """Natural log of C(n, k) for large arguments."""
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def erfi(x):
    """Imaginary error function erfi(x) = -i erf(ix).

    Raises OverflowError when the result is not representable.
    """
    out = sps.erfi(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(out)):
        raise OverflowError("erfi overflows for |x| > ~26.6")
    return out if np.ndim(out) else float(out)


@lru_cache(maxsize=None)
def series_switch_point(a, b):
    """Value of y = x**2 beyond which the large-argument expansion of
    Phi(a, b; -y) is accurate to double precision.

    The asymptotic expansion drops a term of relative size
    ~ exp(-y) y**(2a-b) |Gamma(b-a)/Gamma(a)| and is truncated at its
    smallest term.  The switch is the first integer y >= 25 where both
    fall below 1e-17.
    """
    log_tol = math.log(1e-17)
    log_gamma_ratio = math.lgamma(b - a) - math.lgamma(a)
    y = 25.0
    while (-y + (2 * a - b) * math.log(y) + log_gamma_ratio > log_tol
           or _log_min_asymptotic_term(a, b, y) > log_tol):
        y += 1.0
    return y


def _log_min_asymptotic_term(a, b, y):
    log_term, best = 0.0, 0.0
    for s in range(400):
        log_term += math.log((a + s) * abs(a - b + 1 + s) / ((s + 1) * y))
        best = min(best, log_term)
        if log_term > best + 50:
            break
    return best


def _kummer_series(a, b, y):
    # Phi(a, b; -y) = exp(-y) Phi(b - a, b; y); after the first ~a terms
    # of the transformed series all terms share a sign.  The alternating
    # head cancels for large a, hence the extended precision there.
    if a > 6:
        y = y.astype(np.longdouble)
    term = np.ones_like(y)
    total = np.ones_like(y)
    c = b - a
    for k in range(_MAX_SERIES_TERMS):
        term = term * ((c + k) / ((b + k) * (k + 1))) * y
        total = total + term
        if k > a and np.all(np.abs(term) <= _EPS * np.abs(total)):
            break
    else:  # pragma: no cover - guarded by series_switch_point
        raise ArithmeticError("Kummer series did not converge")
    return (np.exp(-y) * total).astype(float)


def _kummer_asymptotic(a, b, y):
    # Phi(a, b; -y) ~ Gamma(b)/Gamma(b-a) y**-a sum_s (a)_s (a-b+1)_s / (s! y**s)
    pref = math.gamma(b) / math.gamma(b - a)
    term = np.ones_like(y)
    total = np.ones_like(y)
    prev = np.ones_like(y)
    active = np.ones(y.shape, dtype=bool)
    shrinking = np.zeros(y.shape, dtype=bool)
    for s in range(400):
        term = term * ((a + s) * (a - b + 1 + s) / (s + 1)) / y
        mag = np.abs(term)
        # terms may grow at first when a**2 > y; truncate at the smallest
        # term once they grow again
        growing = mag > prev
        active &= ~(growing & shrinking)
        shrinking |= ~growing
        total = total + np.where(active, term, 0.0)
        prev = mag
        if not np.any(active & ((mag > _EPS * np.abs(total)) | ~shrinking)):
            break
    return pref * y ** (-a) * total


def kummer_neg(a, b, y):
    """Phi(a, b; -y) for integer 1 <= a <= MAX_KUMMER_A, b in {1/2, 3/2}
    and y >= 0.

    Works elementwise on arrays.
    """
    if a < 1 or int(a) != a:
        raise ValueError("kummer: first parameter must be a positive integer")
    if a > MAX_KUMMER_A:
        raise ValueError(f"kummer: first parameter {a} exceeds MAX_KUMMER_A={MAX_KUMMER_A}")
    if b not in (0.5, 1.5):
        raise ValueError("kummer: second parameter must be 1/2 or 3/2")
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    if np.any(y < 0):
        raise ValueError("kummer_neg expects y >= 0")
    out = np.empty_like(y)
    y_sw = series_switch_point(a, b)
    big = y > y_sw
    if np.any(big):
        out[big] = _kummer_asymptotic(a, b, y[big])
    small = ~big
    if np.any(small):
        ys = y[small]
        # bucket by magnitude so that small arguments don't pay for the
        # long series needed by large ones
        res = np.empty_like(ys)
        edges = (4.0, 16.0, 49.0, 121.0, np.inf)
        lo = -1.0
        for hi in edges:
            sel = (ys > lo) & (ys <= hi)
            if np.any(sel):
                res[sel] = _kummer_series(a, b, ys[sel])
            lo = hi
        out[small] = res
    return float(out[0]) if scalar else out


def kummer_half(a, x):
    """Phi(a, 1/2; -x**2) for positive integer a."""
    x = np.asarray(x, dtype=float)
    return kummer_neg(a, 0.5, x * x)


def kummer_three_half(a, x):
    """Phi(a, 3/2; -x**2) for positive integer a."""
    x = np.asarray(x, dtype=float)
    return kummer_neg(a, 1.5, x * x)


def hermite_scaled(n, X, s):
    """(s/2)**(n/2) H_n(X/sqrt(s)) evaluated as a polynomial in (X, s).

    Uses P_{k+1} = sqrt(2) X P_k - k s P_{k-1}, so s <= 0 needs no
    complex arithmetic.
    """
    if n < 0:
        raise ValueError("hermite_scaled: order must be nonnegative")
    return hermite_scaled_all(n, X, s)[n]


def hermite_scaled_all(nmax, X, s):
    """Array of hermite_scaled(k, X, s) for k = 0..nmax, stacked on axis 0."""
    X = np.asarray(X, dtype=float)
    out = np.empty((nmax + 1,) + X.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * X
    r2 = math.sqrt(2.0)
    for k in range(1, nmax):
        out[k + 1] = r2 * X * out[k] - k * s * out[k - 1]
    return out


def laguerre(n, alpha, x):
    """Generalized Laguerre polynomial L_n^alpha(x) by upward recurrence."""
    if n < 0 or alpha < 0:
        raise ValueError("laguerre: n and alpha must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if x.ndim else float(prev)
    cur = 1.0 + alpha - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur if x.ndim else float(cur)
