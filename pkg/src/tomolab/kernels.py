"""Sampling kernels for single-LO multimode homodyne tomography.

Three families, each averaged over measured quadrature records:

* ``s_kernel``           s-parametrized quasidistributions W_s
* ``pattern_function``   Fock density matrix elements rho_mn
* ``moment_kernel``      s-ordered moments <a^dag^m a^n>_s

Every closed form here has a brute-force counterpart (``*_oracle`` or
``f_biorthogonal_solve``) used by the tests.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy import integrate

from .geometry import direction_cosines
from .special import binomial, hermite_scaled, kummer_neg, laguerre

__all__ = [
    "BoundViolation",
    "KernelSpec",
    "MomentIndex",
    "s_kernel",
    "s_kernel_integral_oracle",
    "pattern_function",
    "pattern_integral_oracle",
    "pattern_coefficients",
    "xi_table",
    "g_poly",
    "f_biorthogonal_solve",
    "f_biorthogonal_closed",
    "fourier_coefficients",
    "k_factor",
    "moment_kernel",
    "moment_angle_factor",
    "moment_phase_factor",
]


class BoundViolation(ValueError):
    """A reconstruction bound (ordering, efficiency or aliasing) is violated.

    ``inequality`` holds the condition that failed, in plain text.
    """

    def __init__(self, inequality, detail=""):
        self.inequality = inequality
        msg = f"bound violated: {inequality}"
        super().__init__(f"{msg} ({detail})" if detail else msg)


@dataclass(frozen=True)
class KernelSpec:
    """Mode count, ordering parameter s and detection efficiency eta."""

    N: int
    s: float = -1.0
    eta: float = 1.0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must satisfy 0 < eta <= 1, got {self.eta}")

    @property
    def s_eff(self):
        """Ordering parameter after folding in detection loss."""
        return self.s + (1.0 - self.eta) / self.eta

    @property
    def s_eta(self):
        """Largest ordering parameter reachable at this efficiency."""
        return -(1.0 - self.eta) / self.eta

    def require_quasidistribution(self):
        if not self.s_eff < 0:
            raise BoundViolation(
                "s < s_eta = -(1-eta)/eta",
                f"s={self.s}, eta={self.eta}, s_eta={self.s_eta:.6g}")

    def require_pattern(self):
        if not self.eta > 0.5:
            raise BoundViolation("eta must exceed 1/2", f"eta={self.eta}")
        if self.s != -1.0:
            raise ValueError("pattern functions are defined for s = -1 only")


@dataclass(frozen=True)
class MomentIndex:
    """Pair of multi-indices (m, n) labelling rho_mn or C_mn."""

    m: tuple
    n: tuple

    def __post_init__(self):
        m = tuple(int(v) for v in np.atleast_1d(self.m))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        if len(m) != len(n):
            raise ValueError("m and n must have the same length")
        if min(m + n) < 0:
            raise ValueError("indices must be nonnegative")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)

    @property
    def N(self):
        return len(self.m)

    @property
    def mu(self):
        return tuple(max(a, b) for a, b in zip(self.m, self.n))

    @property
    def nu(self):
        return tuple(min(a, b) for a, b in zip(self.m, self.n))

    @property
    def M(self):
        return sum(self.m) + sum(self.n)

    @property
    def M_l(self):
        """Tail sums M_l = sum_{p >= l} (m_p + n_p), l = 1..N."""
        tot = [a + b for a, b in zip(self.m, self.n)]
        return tuple(sum(tot[l:]) for l in range(self.N))

    def conjugate(self):
        return MomentIndex(self.n, self.m)


# ---------------------------------------------------------------- quasidistributions

def _s_prefactor(N, abs_s):
    return 2.0 ** (N - 1) * math.factorial(N - 1) / (math.pi ** (2 * N) * abs_s ** N)


def s_kernel(xi, spec):
    """Quasidistribution kernel S_N(xi; s_eff).

    ``xi`` is X/sqrt(eta) - Xtilde; the loss is carried by
    s_eff = s + (1-eta)/eta, which must be negative.
    """
    spec.require_quasidistribution()
    a = abs(spec.s_eff)
    xi = np.asarray(xi, dtype=float)
    return _s_prefactor(spec.N, a) * kummer_neg(spec.N, 0.5, xi * xi / a)


def s_kernel_integral_oracle(xi, spec):
    """S_N by adaptive quadrature of its radial cosine integral."""
    spec.require_quasidistribution()
    s, N = spec.s_eff, spec.N

    def f(r):
        return math.exp(s * r * r / 2) * r ** (2 * N - 1)

    w = math.sqrt(2.0) * float(xi)
    R = _gaussian_cutoff(-s / 2, 2 * N - 1)
    val, _ = integrate.quad(f, 0, R, weight="cos", wvar=abs(w),
                            epsabs=1e-15, epsrel=1e-13, limit=400)
    return val / math.pi ** (2 * N)


def _gaussian_cutoff(c, degree):
    """Radius beyond which r**degree exp(-c r**2) is below 1e-30 of its peak."""
    return math.sqrt((70.0 + degree * math.log(degree + 2.0)) / c) + math.sqrt(degree)


# ---------------------------------------------------------------- density matrix

def _xi_function(N, p, x):
    k, odd = divmod(p, 2)
    sign = -1.0 if k % 2 else 1.0
    if odd:
        return 2.0 * x * sign * math.factorial(N + k) * kummer_neg(N + k + 1, 1.5, x * x)
    return sign * math.factorial(N + k - 1) * kummer_neg(N + k, 0.5, x * x)


def xi_table(X, N, pmax, eta):
    """Xi_N(X/sqrt(2 eta - 1), p) for p = 0..pmax, stacked on axis 0."""
    x = np.asarray(X, dtype=float) / math.sqrt(2 * eta - 1)
    return np.stack([np.asarray(_xi_function(N, p, x)) for p in range(pmax + 1)])


def pattern_order(idx):
    """Largest p = sum(mu - nu + 2k) that enters the pattern function."""
    return sum(a + b for a, b in zip(idx.m, idx.n))


def pattern_coefficients(idx, u, eta):
    """Weights c_p(theta) such that F_mn = sum_p c_p Xi_N(x, p).

    ``u`` holds direction cosines, shape (..., N).  Returns an array of
    shape (..., pmax + 1).  The k_N sum starts at 0 like all others.
    """
    u = np.asarray(u, dtype=float)
    N = idx.N
    mu, nu = idx.mu, idx.nu
    pmax = pattern_order(idx)
    ratio = 2 * eta / (2 * eta - 1)
    pref = 2.0 ** (N - 1) / math.pi ** N * (eta / (2 * eta - 1)) ** N
    for j in range(N):
        pref = pref * math.sqrt(math.factorial(nu[j]) / math.factorial(mu[j]))
    base = pref * np.prod((math.sqrt(ratio) * u) ** np.subtract(mu, nu), axis=-1)
    t = ratio * u * u
    out = np.zeros(u.shape[:-1] + (pmax + 1,))
    offset = sum(mu) - sum(nu)
    for ks in product(*(range(v + 1) for v in nu)):
        weight = 1.0
        for l, k in enumerate(ks):
            weight *= binomial(mu[l], nu[l] - k) / math.factorial(k)
        term = weight * np.prod(t ** np.asarray(ks), axis=-1)
        out[..., offset + 2 * sum(ks)] += term
    return out * base[..., None]


def pattern_function(idx, X, theta, spec):
    """Real pattern function F_mn(X, theta; eta) for s = -1.

    The full density-matrix kernel is F_mn * prod_j exp(i (m_j - n_j) psi_j).
    """
    spec.require_pattern()
    if idx.N != spec.N:
        raise ValueError("index and kernel spec disagree on N")
    u = direction_cosines(theta, spec.N)
    coeff = pattern_coefficients(idx, u, spec.eta)
    xis = xi_table(X, spec.N, len(coeff) - 1, spec.eta)
    return np.tensordot(coeff, xis, axes=(0, 0))


def pattern_integral_oracle(idx, X, theta, eta):
    """Complex Laguerre-integral form of the pattern function.

    Its real part equals ``pattern_function``; the imaginary part is a null
    function.
    """
    if not eta > 0.5:
        raise BoundViolation("eta must exceed 1/2", f"eta={eta}")
    N = idx.N
    u = direction_cosines(theta, N)
    mu, nu = idx.mu, idx.nu
    pref = 1.0 / math.pi ** N + 0j
    for j in range(N):
        pref *= math.sqrt(math.factorial(nu[j]) / math.factorial(mu[j])) * (-1j * u[j]) ** (mu[j] - nu[j])
    damp = (1 - 2 * eta) / (2 * eta)
    extra = sum(mu) - sum(nu)

    def radial(r):
        val = math.exp(damp * r * r) * r ** (2 * N - 1 + extra)
        for l in range(N):
            val *= laguerre(nu[l], mu[l] - nu[l], r * r * u[l] ** 2)
        return val

    w = math.sqrt(2 / eta) * float(X)
    R = _gaussian_cutoff(-damp, 2 * N - 1 + extra + 2 * sum(nu))
    opts = dict(epsabs=1e-15, epsrel=1e-13, limit=400)
    re, _ = integrate.quad(radial, 0, R, weight="cos", wvar=abs(w), **opts)
    im, _ = integrate.quad(radial, 0, R, weight="sin", wvar=abs(w), **opts)
    im *= math.copysign(1.0, w)
    return pref * complex(re, im)


# ---------------------------------------------------------------- moments

def g_poly(k, l, theta):
    """G_k^l(theta) = C(l, k) cos(theta)**k sin(theta)**(l-k)."""
    if not 0 <= k <= l:
        raise ValueError(f"need 0 <= k <= l, got k={k}, l={l}")
    theta = np.asarray(theta, dtype=float)
    return binomial(l, k) * np.cos(theta) ** k * np.sin(theta) ** (l - k)


def f_biorthogonal_solve(l, n_theta):
    """Numerical biorthogonal functions on the grid theta_n = n pi/N_theta.

    Solves sum_n F_m(theta_n) G_k(theta_n) pi/N_theta = delta_mk with F_m in
    the span of the G_k^l (equivalently of exp(i(l-2n)theta)).  Returns an
    array of shape (l + 1, n_theta): row m is F_m^l at the grid points.
    """
    if l >= n_theta:
        raise BoundViolation("l < N_theta", f"l={l}, N_theta={n_theta}")
    theta = np.arange(1, n_theta + 1) * math.pi / n_theta
    w = math.pi / n_theta
    G = np.stack([g_poly(k, l, theta) for k in range(l + 1)])
    gram = w * G @ G.T
    A = np.linalg.solve(gram, np.eye(l + 1))
    return A @ G


@lru_cache(maxsize=None)
def fourier_coefficients(m, l, convention="corrected"):
    """Coefficients E_mk, k = 0..l, of F_m^l(theta) = sum_k E_mk exp(i(l-2k)theta).

    ``convention='printed'`` evaluates the common closed-form expression literally,
    which comes out with the wrong overall sign (-1)**(l-m): it reads the
    Fourier component of exp(i(l-2k)theta) where exp(-i(l-2k)theta) is
    meant.  ``'corrected'`` applies the reflection k -> l-k and satisfies
    the biorthogonality conditions.
    """
    if not 0 <= m <= l:
        raise ValueError(f"need 0 <= m <= l, got m={m}, l={l}")
    if convention not in ("corrected", "printed"):
        raise ValueError("convention must be 'corrected' or 'printed'")
    out = []
    for k in range(l + 1):
        kk = l - k if convention == "corrected" else k
        acc = sum(binomial(m, j) * binomial(l - m, kk - j) * (-1) ** (kk - j) for j in range(m + 1))
        out.append(1j ** (l - m) / math.pi * acc / binomial(l, k))
    return tuple(out)


def f_biorthogonal_closed(m, l, theta, convention="corrected"):
    """Closed-form F_m^l(theta), biorthogonal to G_k^l on [0, pi]."""
    E = np.asarray(fourier_coefficients(m, l, convention))
    theta = np.asarray(theta, dtype=float)
    freqs = l - 2 * np.arange(l + 1)
    val = np.exp(1j * np.multiply.outer(theta, freqs)) @ E
    return val.real


def k_factor(m, n):
    """K(m, n) = 1/(pi C(m+n, n)), via log-gamma."""
    return math.exp(-math.log(math.pi) - math.lgamma(m + n + 1)
                    + math.lgamma(m + 1) + math.lgamma(n + 1))


def moment_angle_factor(idx, theta):
    """prod_{l<N} F^{M_l}_{m_l+n_l}(theta_l); ``theta`` has shape (..., N-1)."""
    theta = np.asarray(theta, dtype=float)
    Ml = idx.M_l
    out = np.ones(theta.shape[:-1])
    for l in range(idx.N - 1):
        out = out * f_biorthogonal_closed(idx.m[l] + idx.n[l], Ml[l], theta[..., l])
    return out


def moment_phase_factor(idx, psi):
    """prod_j K(m_j, n_j) exp(i (n_j - m_j) psi_j); ``psi`` has shape (..., N)."""
    psi = np.asarray(psi, dtype=float)
    k = math.prod(k_factor(a, b) for a, b in zip(idx.m, idx.n))
    return k * np.exp(1j * psi @ (np.subtract(idx.n, idx.m)))


def moment_kernel(idx, X, config, s, eta=1.0):
    """Kernel D_mn(X, theta, psi; s, eta) for s-ordered moments.

    Loss enters through X -> X/sqrt(eta), s -> s + (1-eta)/eta; any real s
    is allowed since the Hermite factor is a polynomial.
    """
    if idx.N != config.modes:
        raise ValueError("index and configuration disagree on N")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must satisfy 0 < eta <= 1, got {eta}")
    s_eff = s + (1.0 - eta) / eta
    X = np.asarray(X, dtype=float) / math.sqrt(eta)
    h = hermite_scaled(idx.M, X, s_eff)
    ang = moment_angle_factor(idx, np.asarray(config.theta))
    return h * ang * moment_phase_factor(idx, np.asarray(config.psi))

