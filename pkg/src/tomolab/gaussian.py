"""Gaussian multimode states: construction, exact statistics and
simulated homodyne records.

Quadratures follow x = (a + a^dagger)/sqrt(2), p = (a - a^dagger)/(i sqrt(2)),
so the vacuum covariance is identity/2.  Vectors are ordered
(x_1, p_1, ..., x_N, p_N).
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import direction_cosines

__all__ = [
    "GaussianState",
    "vacuum",
    "coherent",
    "displace",
    "squeeze",
    "beam_splitter",
    "phase_shift",
    "passive_transform",
    "three_mode_demo_state",
    "quadrature_stats",
    "quadrature_stats_grid",
    "sample_quadrature",
    "analytic_q",
    "analytic_moment",
    "analytic_fock_element",
    "fock_cutoff",
    "symplectic_form",
    "simulate_dataset",
    "point_rng",
]

PHYSICALITY_TOL = 1e-10


def symplectic_form(N):
    return np.kron(np.eye(N), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True, eq=False)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        n2 = mean.shape[0]
        if n2 % 2 or cov.shape != (n2, n2):
            raise ValueError("mean must have length 2N and cov shape (2N, 2N)")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def modes(self):
        return self.mean.shape[0] // 2

    def is_physical(self, tol=PHYSICALITY_TOL):
        """Uncertainty principle cov + (i/2) Omega >= 0."""
        m = self.cov + 0.5j * symplectic_form(self.modes)
        return bool(np.linalg.eigvalsh(m).min() >= -tol)

    def complex_moments(self):
        """First and second moments of the mode operators.

        Returns (<a_j>, <a_j^dagger a_k>, <a_j a_k>).
        """
        N = self.modes
        x, p = self.mean[0::2], self.mean[1::2]
        alpha = (x + 1j * p) / math.sqrt(2)
        V = self.cov
        Vxx, Vpp = V[0::2, 0::2], V[1::2, 1::2]
        Vxp = V[0::2, 1::2]
        # symmetrized covariances -> normally ordered central moments
        n_c = 0.5 * (Vxx + Vpp + 1j * (Vxp - Vxp.T)) - 0.5 * np.eye(N)
        m_c = 0.5 * (Vxx - Vpp + 1j * (Vxp + Vxp.T))
        return alpha, n_c + np.outer(alpha.conj(), alpha), m_c + np.outer(alpha, alpha)


def _check_mode(state, j):
    if not 0 <= j < state.modes:
        raise IndexError(f"mode index {j} out of range for {state.modes} modes")


def _apply(state, S, shift=None):
    mean = S @ state.mean
    if shift is not None:
        mean = mean + shift
    return GaussianState(mean, S @ state.cov @ S.T)


def vacuum(N):
    if N < 1:
        raise ValueError("N must be >= 1")
    return GaussianState(np.zeros(2 * N), 0.5 * np.eye(2 * N))


def displace(state, j, alpha):
    """Displace mode j by the complex amplitude alpha."""
    _check_mode(state, j)
    alpha = complex(alpha)
    shift = np.zeros(2 * state.modes)
    shift[2 * j] = math.sqrt(2) * alpha.real
    shift[2 * j + 1] = math.sqrt(2) * alpha.imag
    return GaussianState(state.mean + shift, state.cov)


def coherent(alphas):
    """Multimode coherent state with amplitudes ``alphas``."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    st = vacuum(len(alphas))
    for j, a in enumerate(alphas):
        st = displace(st, j, complex(a))
    return st


def squeeze(state, j, r):
    """Bogoliubov map b -> b cosh r + b^dagger sinh r on mode j.

    x is stretched by exp(r) and p shrunk by exp(-r), so r > 0
    anti-squeezes x.
    """
    _check_mode(state, j)
    S = np.eye(2 * state.modes)
    S[2 * j, 2 * j] = math.exp(r)
    S[2 * j + 1, 2 * j + 1] = math.exp(-r)
    return _apply(state, S)


def passive_transform(state, U):
    """Apply a_j -> sum_k U_jk a_k for a unitary N x N matrix U."""
    U = np.asarray(U, dtype=complex)
    N = state.modes
    if U.shape != (N, N):
        raise ValueError(f"U must be {N}x{N}")
    if not np.allclose(U @ U.conj().T, np.eye(N), atol=1e-12):
        raise ValueError("passive transformation must be unitary")
    R, Im = U.real, U.imag
    S = np.zeros((2 * N, 2 * N))
    S[0::2, 0::2] = R
    S[0::2, 1::2] = -Im
    S[1::2, 0::2] = Im
    S[1::2, 1::2] = R
    return _apply(state, S)


def beam_splitter(state, i, j, mixing_angle):
    """a_i -> cos t a_i + sin t a_j, a_j -> -sin t a_i + cos t a_j."""
    _check_mode(state, i)
    _check_mode(state, j)
    if i == j:
        raise ValueError("beam splitter needs two distinct modes")
    U = np.eye(state.modes, dtype=complex)
    c, s = math.cos(mixing_angle), math.sin(mixing_angle)
    U[i, i], U[i, j], U[j, i], U[j, j] = c, s, -s, c
    return passive_transform(state, U)


def phase_shift(state, j, phi):
    """a_j -> exp(i phi) a_j."""
    _check_mode(state, j)
    U = np.eye(state.modes, dtype=complex)
    U[j, j] = np.exp(1j * phi)
    return passive_transform(state, U)


DEMO_MIXING = np.array([
    [1 / math.sqrt(3), 2 / math.sqrt(6), 0.0],
    [1 / math.sqrt(3), -1 / math.sqrt(6), -1 / math.sqrt(2)],
    [1 / math.sqrt(3), -1 / math.sqrt(6), 1 / math.sqrt(2)],
])


def three_mode_demo_state(r=1.0):
    """Squeezed vacuum b_1 split equally over three modes.

    a = DEMO_MIXING @ b with b_1 squeezed by r and b_2, b_3 in vacuum.
    Each mode then holds sinh(r)**2/3 photons on average.
    """
    return passive_transform(squeeze(vacuum(3), 0, r), DEMO_MIXING)


def _direction(theta, psi, N):
    u = direction_cosines(theta, N)
    psi = np.asarray(psi, dtype=float)
    d = np.empty(u.shape[:-1] + (2 * N,))
    d[..., 0::2] = u * np.cos(psi)
    d[..., 1::2] = u * np.sin(psi)
    return d


def quadrature_stats(state, config):
    """Exact (mean, variance) of X = (A + A^dagger)/sqrt 2 for the
    configuration's superposition mode A."""
    if config.modes != state.modes:
        raise ValueError("configuration and state have different mode counts")
    d = _direction(config.theta, config.psi, state.modes)
    return float(d @ state.mean), float(d @ state.cov @ d)


def quadrature_stats_grid(state, grid):
    """Vectorized ``quadrature_stats`` over every point of a grid."""
    if grid.modes != state.modes:
        raise ValueError("grid and state have different mode counts")
    d = _direction(grid.thetas, grid.psis, state.modes)
    means = d @ state.mean
    variances = np.einsum("pi,ij,pj->p", d, state.cov, d)
    return means, variances


def _check_eta(eta):
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"detection efficiency must satisfy 0 < eta <= 1, got {eta}")


def sample_quadrature(state, config, eta, rng, size=None):
    """Detected quadrature sqrt(eta) X + sqrt(1-eta) X_vac.

    X is drawn from the state's quadrature law and X_vac ~ N(0, 1/2)
    independently.
    """
    _check_eta(eta)
    mean, var = quadrature_stats(state, config)
    x = mean + math.sqrt(var) * rng.standard_normal(size)
    x_vac = math.sqrt(0.5) * rng.standard_normal(size)
    return math.sqrt(eta) * x + math.sqrt(1.0 - eta) * x_vac


def analytic_q(state, alpha):
    """Husimi function <alpha|rho|alpha>/pi**N of the Gaussian state.

    ``alpha`` may carry leading batch dimensions.
    """
    alpha = np.asarray(alpha, dtype=complex)
    N = state.modes
    if alpha.shape[-1] != N:
        raise ValueError("alpha has the wrong number of modes")
    y = np.empty(alpha.shape[:-1] + (2 * N,))
    y[..., 0::2] = math.sqrt(2) * alpha.real
    y[..., 1::2] = math.sqrt(2) * alpha.imag
    sigma = state.cov + 0.5 * np.eye(2 * N)
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        raise np.linalg.LinAlgError("singular or unphysical covariance")
    dev = y - state.mean
    quad = np.einsum("...i,ij,...j->...", dev, np.linalg.inv(sigma), dev)
    out = np.exp(-0.5 * quad - 0.5 * logdet) / math.pi ** N
    return out if out.ndim else float(out)


def _gaussian_product_moment(mean, cov, coeffs, counts):
    """E[prod_k (c_k . y)**n_k] for y ~ N(mean, cov), by Isserlis' rule
    with a mean, memoized on the remaining exponents."""
    mu = coeffs @ mean
    C = coeffs @ cov @ coeffs.T

    @lru_cache(maxsize=None)
    def rec(n):
        for i, ni in enumerate(n):
            if ni:
                break
        else:
            return 1.0 + 0j
        rest = list(n)
        rest[i] -= 1
        total = mu[i] * rec(tuple(rest))
        for j, nj in enumerate(rest):
            if nj:
                lower = list(rest)
                lower[j] -= 1
                total += nj * C[i, j] * rec(tuple(lower))
        return total

    return rec(tuple(int(c) for c in counts))


def analytic_moment(state, m, n, s=1.0):
    """Exact s-ordered moment <prod_j a_j^dagger**m_j a_j**n_j>_s.

    The s-parametrized quasidistribution of a Gaussian state is Gaussian in
    (x, p) with (formal) covariance cov - (s/2) I; the moment is the
    corresponding expectation of prod conj(alpha_j)**m_j alpha_j**n_j.
    """
    N = state.modes
    m = np.asarray(m, dtype=int).reshape(N)
    n = np.asarray(n, dtype=int).reshape(N)
    if np.any(m < 0) or np.any(n < 0):
        raise ValueError("moment orders must be nonnegative")
    cov_s = state.cov - 0.5 * s * np.eye(2 * N)
    # rows: conj(alpha_j) then alpha_j, as linear forms in (x, p)
    coeffs = np.zeros((2 * N, 2 * N), dtype=complex)
    for j in range(N):
        coeffs[j, 2 * j] = coeffs[N + j, 2 * j] = 1 / math.sqrt(2)
        coeffs[j, 2 * j + 1] = -1j / math.sqrt(2)
        coeffs[N + j, 2 * j + 1] = 1j / math.sqrt(2)
    return complex(_gaussian_product_moment(state.mean, cov_s, coeffs,
                                            np.concatenate([m, n])))


def _q_generating_form(state):
    """Q(alpha) exp(sum |alpha|^2) = exp(c + b.w + w.A.w/2) with
    w = (alpha_1..alpha_N, conj alpha_1..conj alpha_N)."""
    N = state.modes
    T = np.zeros((2 * N, 2 * N), dtype=complex)
    for j in range(N):
        T[2 * j, j] = T[2 * j, N + j] = 1 / math.sqrt(2)
        T[2 * j + 1, j] = -1j / math.sqrt(2)
        T[2 * j + 1, N + j] = 1j / math.sqrt(2)
    sigma = state.cov + 0.5 * np.eye(2 * N)
    P = np.linalg.inv(sigma)
    d = state.mean
    K = np.zeros((2 * N, 2 * N))
    for j in range(N):
        K[j, N + j] = K[N + j, j] = 1.0
    A = -T.T @ P @ T + K
    b = T.T @ P @ d
    _, logdet = np.linalg.slogdet(sigma)
    c = -0.5 * d @ P @ d - 0.5 * logdet - N * math.log(math.pi)
    return c, b, A


def analytic_fock_element(state, m, n):
    """Exact density matrix element <m|rho|n> in the multimode Fock basis.

    Taylor coefficients of Q(alpha) exp(sum |alpha|^2), which generates
    rho_mn / pi**N, computed with the standard Gaussian derivative
    recursion.
    """
    N = state.modes
    m = [int(v) for v in np.reshape(m, N)]
    n = [int(v) for v in np.reshape(n, N)]
    c, b, A = _q_generating_form(state)
    order = tuple(n + m)  # derivatives in alpha (n) and conj alpha (m)

    @lru_cache(maxsize=None)
    def deriv(k):
        for i, ki in enumerate(k):
            if ki:
                break
        else:
            return complex(math.exp(c))
        rest = list(k)
        rest[i] -= 1
        total = b[i] * deriv(tuple(rest))
        for j, kj in enumerate(rest):
            if kj:
                lower = list(rest)
                lower[j] -= 1
                total += A[i, j] * kj * deriv(tuple(lower))
        return total

    norm = math.prod(math.sqrt(math.factorial(a) * math.factorial(b_)) for a, b_ in zip(m, n))
    return complex(math.pi ** N * deriv(order) / norm)


def fock_cutoff(state, mass=0.999, max_cutoff=30):
    """Smallest per-mode cutoff c such that the Fock diagonal with every
    index <= c holds at least ``mass`` of the trace."""
    N = state.modes
    probs = {}
    for c in range(max_cutoff + 1):
        total = 0.0
        for idx in np.ndindex(*(c + 1,) * N):
            if idx not in probs:
                probs[idx] = analytic_fock_element(state, idx, idx).real
            total += probs[idx]
        if total >= mass:
            return c
    raise ValueError(f"state needs a Fock cutoff above {max_cutoff}")


def point_rng(seed, index):
    """Independent generator for grid point ``index`` of a run seeded by ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(int(index),))))


def simulate_dataset(state, grid, per_point, eta, seed, threads=1, randomize_phases=False):
    """Simulate ``per_point`` homodyne records at every grid point.

    Each grid point draws from its own stream derived from (seed, index), so
    the result does not depend on ``threads``.  With ``randomize_phases``
    every record uses fresh uniform phases in [0, 2 pi) instead of the grid
    phases, emulating phase-averaged data.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .dataset import QuadratureDataset

    _check_eta(eta)
    if per_point < 1:
        raise ValueError("per_point must be >= 1")
    if grid.modes != state.modes:
        raise ValueError("grid and state have different mode counts")
    P, N = len(grid), state.modes
    means, variances = quadrature_stats_grid(state, grid)
    sd = np.sqrt(variances)
    out = np.empty((P, per_point))
    se, sl = math.sqrt(eta), math.sqrt((1.0 - eta) / 2.0)

    def work(lo, hi):
        for i in range(lo, hi):
            rng = point_rng(seed, i)
            z = rng.standard_normal((2, per_point))
            if randomize_phases:
                psi = rng.uniform(0.0, 2 * math.pi, size=(per_point, N))
                d = _direction(np.broadcast_to(grid.thetas[i], (per_point, N - 1)), psi, N)
                mu = d @ state.mean
                sig = np.sqrt(np.einsum("ri,ij,rj->r", d, state.cov, d))
            else:
                mu, sig = means[i], sd[i]
            out[i] = se * (mu + sig * z[0]) + sl * z[1]

    n_chunks = max(1, int(threads)) * 4
    edges = np.linspace(0, P, n_chunks + 1).astype(int)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            list(pool.map(work, edges[:-1], edges[1:]))
    else:
        for lo, hi in zip(edges[:-1], edges[1:]):
            work(lo, hi)

    index = np.repeat(np.arange(P, dtype=np.int64), per_point)
    return QuadratureDataset(grid, eta, index, out.ravel(), seed=seed,
                             phase_randomized=randomize_phases)
