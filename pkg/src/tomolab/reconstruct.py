"""Estimators that average sampling kernels over homodyne records.

Every estimator has the same shape.  A per-record feature vector f(X) is
averaged separately at each grid point, giving means and (co)variances
per point.  The estimate is then a weighted sum over grid points,

    value = sum_p w_p c_p . mean_p,
    stderr**2 = sum_p w_p**2 c_p^H Cov_p c_p / n_p,

with the grid weights w_p and point-dependent coefficients c_p (angle and
phase factors of the kernel).  The features are chosen so that the costly
special-function work is shared between many requested entries:

* quasidistribution: S_N(X/sqrt(eta) - Xtilde_a) for every alpha point a
* density matrix:    Xi_N(X/sqrt(2 eta - 1), p), combined with pattern
                     coefficients c_p(theta)
* moments:           the scaled Hermite polynomials P_k(X; s), k <= M

The per-point statistics live in a ``PointAccumulator`` that merges
exactly (Chan et al. pairwise update), so partitions can be processed in
parallel.  ``ExactStatistics`` substitutes exact Gaussian expectations for
the empirical means, which isolates grid-discretization error.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .dataset import QuadratureDataset
from .geometry import MOMENT, QUASIDISTRIBUTION, SamplingGrid
from .kernels import (BoundViolation, KernelSpec, MomentIndex, moment_angle_factor,
                      moment_phase_factor, pattern_coefficients, s_kernel, xi_table)
from .special import MAX_KUMMER_A, binomial, hermite_scaled_all

__all__ = [
    "PointAccumulator",
    "ExactStatistics",
    "EstimateTable",
    "ValidationReport",
    "accumulate",
    "estimate_quasidist",
    "estimate_rho",
    "estimate_moments",
    "mandel_q",
    "validate_request",
    "sampling_point_counts",
    "fock_indices",
    "moment_indices",
]

DEFAULT_CHUNK = 1 << 18


# ---------------------------------------------------------------- accumulator

class PointAccumulator:
    """Streaming per-grid-point mean and (co)variance of K features.

    With ``covariance=True`` the full K x K co-moment matrix is kept per
    point, otherwise only its diagonal.
    """

    def __init__(self, n_points, n_features, covariance=False):
        self.n_points = int(n_points)
        self.n_features = int(n_features)
        self.covariance = bool(covariance)
        self.count = np.zeros(self.n_points, dtype=np.int64)
        self.mean = np.zeros((self.n_points, self.n_features))
        shape = (self.n_points, self.n_features)
        if self.covariance:
            shape += (self.n_features,)
        self.m2 = np.zeros(shape)

    def _compatible(self, other):
        if (self.n_points, self.n_features, self.covariance) != \
                (other.n_points, other.n_features, other.covariance):
            raise ValueError("cannot merge accumulators of different shape")

    def add(self, grid_index, values):
        """Fold in records ``values`` (n, K) observed at ``grid_index`` (n,)."""
        grid_index = np.asarray(grid_index, dtype=np.int64)
        values = np.asarray(values, dtype=float).reshape(len(grid_index), self.n_features)
        if len(grid_index) == 0:
            return self
        P, K = self.n_points, self.n_features
        cnt = np.bincount(grid_index, minlength=P)
        safe = np.maximum(cnt, 1)[:, None]
        sums = np.stack([np.bincount(grid_index, values[:, k], P) for k in range(K)], axis=1)
        mean_b = sums / safe
        dev = values - mean_b[grid_index]
        if self.covariance:
            m2_b = np.empty((P, K, K))
            for k in range(K):
                for l in range(k, K):
                    m2_b[:, k, l] = m2_b[:, l, k] = np.bincount(
                        grid_index, dev[:, k] * dev[:, l], P)
        else:
            m2_b = np.stack([np.bincount(grid_index, dev[:, k] ** 2, P) for k in range(K)],
                            axis=1)
        self._merge_stats(cnt, mean_b, m2_b)
        return self

    def _merge_stats(self, cnt_b, mean_b, m2_b):
        na = self.count.astype(float)
        nb = cnt_b.astype(float)
        n = na + nb
        safe = np.where(n > 0, n, 1.0)
        delta = mean_b - self.mean
        frac = (nb / safe)[:, None]
        self.mean = self.mean + delta * frac
        scale = (na * nb / safe)
        if self.covariance:
            corr = delta[:, :, None] * delta[:, None, :] * scale[:, None, None]
        else:
            corr = delta * delta * scale[:, None]
        self.m2 = self.m2 + m2_b + corr
        self.count = self.count + cnt_b

    def merge(self, other):
        """Combined statistics of both accumulators (neither is modified)."""
        self._compatible(other)
        out = self.copy()
        out._merge_stats(other.count, other.mean, other.m2)
        return out

    def copy(self):
        out = PointAccumulator(self.n_points, self.n_features, self.covariance)
        out.count = self.count.copy()
        out.mean = self.mean.copy()
        out.m2 = self.m2.copy()
        return out

    def variance(self):
        """Unbiased per-point (co)variance; zero where fewer than 2 records."""
        denom = np.where(self.count > 1, self.count - 1, 1).astype(float)
        shape = (-1,) + (1,) * (self.m2.ndim - 1)
        var = self.m2 / denom.reshape(shape)
        var[self.count < 2] = 0.0
        return var

    @classmethod
    def from_expectations(cls, means, covariance=False):
        """Accumulator holding exact means with one pseudo-record per point."""
        means = np.asarray(means, dtype=float)
        acc = cls(means.shape[0], means.shape[1], covariance)
        acc.mean = means.copy()
        acc.count = np.ones(means.shape[0], dtype=np.int64)
        return acc


@dataclass(frozen=True)
class ExactStatistics:
    """Stand-in for a dataset carrying the exact quadrature laws of a
    Gaussian state on a grid.

    Feature means are computed by Gauss-Hermite quadrature over
    X' ~ N(sqrt(eta) mean, eta var + (1-eta)/2); standard errors are zero.
    """

    state: object
    grid: SamplingGrid
    eta: float
    nodes: int = 96
    phase_randomized: bool = False

    def __len__(self):
        return len(self.grid)

    def expectations(self, feature_fn, n_features):
        from .gaussian import quadrature_stats_grid

        means, variances = quadrature_stats_grid(self.state, self.grid)
        mu = math.sqrt(self.eta) * means
        sd = np.sqrt(self.eta * variances + (1.0 - self.eta) / 2.0)
        t, w = np.polynomial.hermite.hermgauss(self.nodes)
        w = w / math.sqrt(math.pi)
        P = len(self.grid)
        out = np.zeros((P, n_features))
        step = max(1, DEFAULT_CHUNK // self.nodes)
        for lo in range(0, P, step):
            hi = min(P, lo + step)
            gi = np.repeat(np.arange(lo, hi), self.nodes)
            x = (mu[lo:hi, None] + math.sqrt(2.0) * sd[lo:hi, None] * t).ravel()
            f = feature_fn(gi, x).reshape(hi - lo, self.nodes, n_features)
            out[lo:hi] = np.einsum("pnk,n->pk", f, w)
        return out


def accumulate(source, feature_fn, n_features, covariance=False, chunk=DEFAULT_CHUNK,
               threads=1):
    """Per-point statistics of ``feature_fn(grid_index, x) -> (n, K)``.

    Records are split into ``threads`` contiguous partitions, each folded
    in chunks, and the partial accumulators merged left to right, so the
    result is deterministic for a fixed thread count.
    """
    if isinstance(source, ExactStatistics):
        return PointAccumulator.from_expectations(
            source.expectations(feature_fn, n_features), covariance)
    if len(source) == 0:
        raise ValueError("dataset has no records")
    P = len(source.grid)

    def run(part):
        gi, x = part
        acc = PointAccumulator(P, n_features, covariance)
        for lo in range(0, len(x), chunk):
            acc.add(gi[lo:lo + chunk], feature_fn(gi[lo:lo + chunk], x[lo:lo + chunk]))
        return acc

    threads = max(1, int(threads))
    parts = source.partitions(threads)
    if threads == 1:
        accs = [run(parts[0])]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            accs = list(pool.map(run, parts))
    total = accs[0]
    for acc in accs[1:]:
        total = total.merge(acc)
    return total


# ---------------------------------------------------------------- results

@dataclass
class EstimateTable:
    """Reconstructed values with one-standard-error bars.

    ``keys`` are alpha tuples (quasidist), or ((m...), (n...)) pairs
    (rho_block, moments).  ``covariance`` optionally maps key pairs to the
    covariance of the real parts, for derived quantities such as Mandel Q.
    """

    kind: str
    keys: list
    values: np.ndarray
    errors: np.ndarray
    metadata: dict = field(default_factory=dict)
    covariance: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.keys = [self._norm(k) for k in self.keys]
        self.values = np.asarray(self.values, dtype=complex)
        self.errors = np.asarray(self.errors, dtype=float)
        self._pos = {k: i for i, k in enumerate(self.keys)}

    @staticmethod
    def _norm(key):
        if isinstance(key, MomentIndex):
            return (key.m, key.n)
        if len(key) == 2 and all(isinstance(v, (tuple, list, np.ndarray)) for v in key):
            return tuple(tuple(int(a) for a in v) for v in key)
        return tuple(complex(a) for a in key)

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return self._norm(key) in self._pos

    def __getitem__(self, key):
        i = self._pos[self._norm(key)]
        return self.values[i], float(self.errors[i])

    def value(self, key):
        return self[key][0]

    def error(self, key):
        return self[key][1]

    def cov(self, key_a, key_b):
        a, b = self._norm(key_a), self._norm(key_b)
        if a == b:
            return self.error(a) ** 2
        if (a, b) in self.covariance:
            return self.covariance[(a, b)]
        return self.covariance.get((b, a), 0.0)


@dataclass
class ValidationReport:
    """Pass/fail per reconstruction bound, plus sampling-point counts."""

    checks: list = field(default_factory=list)
    R: int = None
    P: int = None

    def add(self, name, inequality, passed, detail=""):
        self.checks.append({"name": name, "inequality": inequality,
                            "passed": bool(passed), "detail": detail})

    @property
    def ok(self):
        return all(c["passed"] for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c["passed"]]

    def raise_if_failed(self):
        bad = self.failures
        if bad:
            raise BoundViolation(bad[0]["inequality"], bad[0]["detail"])

    def as_dict(self):
        return {"ok": self.ok, "R": self.R, "P": self.P, "checks": list(self.checks)}


def sampling_point_counts(M, N):
    """(R, P): sufficient grid size (M+1)**(2N-1) and the number
    C(M+2N-1, M) of real parameters in all Mth-order moments."""
    return (M + 1) ** (2 * N - 1), binomial(M + 2 * N - 1, M)


# ---------------------------------------------------------------- index sets

def fock_indices(N, cutoff):
    """All ((m...), (n...)) with every entry <= cutoff, lexicographic."""
    basis = list(product(range(cutoff + 1), repeat=N))
    return [(m, n) for m in basis for n in basis]


def moment_indices(N, max_order, diagonal_only=False):
    """All ((m...), (n...)) with sum(m + n) <= max_order, by total order."""
    out = []
    for M in range(max_order + 1):
        for mn in product(range(M + 1), repeat=2 * N):
            if sum(mn) == M:
                m, n = tuple(mn[:N]), tuple(mn[N:])
                if not diagonal_only or m == n:
                    out.append((m, n))
    return out


# ---------------------------------------------------------------- validation

def validate_request(source, *, s=None, kind=None, cutoff=None, indices=None,
                     max_order=None):
    """Check a reconstruction request against the bounds of the method.

    ``kind`` is 'quasidist', 'rho' or 'moments'.  Quasidistributions need
    s < s_eta; density matrices need eta > 1/2 and a phase grid fine
    enough to resolve every requested Fock index; moments need m_j, n_j <
    N_psi and M_l < N_theta.
    """
    grid, eta = source.grid, source.eta
    N = grid.modes
    rep = ValidationReport()
    if kind == "quasidist":
        spec = KernelSpec(N, s if s is not None else -1.0, eta)
        rep.add("ordering", "s < s_eta = -(1-eta)/eta", spec.s_eff < 0,
                f"s={spec.s}, s_eta={spec.s_eta:.6g}")
        rep.add("grid kind", "weight_kind == quasidistribution",
                grid.weight_kind == QUASIDISTRIBUTION, f"got {grid.weight_kind}")
    elif kind == "rho":
        rep.add("efficiency", "eta must exceed 1/2", eta > 0.5, f"eta={eta}")
        rep.add("grid kind", "weight_kind == quasidistribution",
                grid.weight_kind == QUASIDISTRIBUTION, f"got {grid.weight_kind}")
        if cutoff is not None:
            rep.add("phase aliasing", "max(m_j, n_j) < N_psi", cutoff < grid.psi_count,
                    f"cutoff={cutoff}, N_psi={grid.psi_count}")
            a_max = N * (cutoff + 1)
            rep.add("kernel order", f"N*(cutoff+1) <= {MAX_KUMMER_A}", a_max <= MAX_KUMMER_A,
                    f"N*(cutoff+1)={a_max}")
    elif kind == "moments":
        rep.add("grid kind", "weight_kind == moment", grid.weight_kind == MOMENT,
                f"got {grid.weight_kind}")
        if indices is None:
            indices = moment_indices(N, max_order or 0)
        mj = max((max(m + n) for m, n in indices), default=0)
        rep.add("phase aliasing", "m_j < N_psi and n_j < N_psi", mj < grid.psi_count,
                f"max index {mj}, N_psi={grid.psi_count}")
        if N > 1:
            ml = max((MomentIndex(m, n).M_l[l] for m, n in indices for l in range(N - 1)),
                     default=0)
            rep.add("angle aliasing", "M_j < N_theta", ml < grid.theta_count,
                    f"max M_j {ml}, N_theta={grid.theta_count}")
        if getattr(source, "phase_randomized", False):
            rep.add("phase averaging", "m == n for phase-randomized data",
                    all(m == n for m, n in indices), "")
        M = max((sum(m) + sum(n) for m, n in indices), default=0)
        rep.R, rep.P = sampling_point_counts(M, N)
    else:
        raise ValueError("kind must be 'quasidist', 'rho' or 'moments'")
    return rep


# ---------------------------------------------------------------- helpers

def _mode_coefficients(grid):
    u = grid.direction_cosines()
    return u * np.exp(-1j * grid.psis)


def _combine(acc, weights, coeff, feature):
    """Weighted estimate and standard error for one table entry.

    ``coeff`` is (P,) complex multiplying feature column ``feature`` (int),
    or (P, K) real/complex contracting all columns.
    """
    n = np.maximum(acc.count, 1).astype(float)
    var = acc.variance()
    if np.ndim(coeff) == 1:
        value = np.sum(weights * coeff * acc.mean[:, feature])
        v = var[:, feature, feature] if acc.covariance else var[:, feature]
        err2 = np.sum(weights ** 2 * np.abs(coeff) ** 2 * v / n)
    else:
        value = np.sum(weights * np.einsum("pk,pk->p", coeff, acc.mean))
        if acc.covariance:
            q = np.einsum("pk,pkl,pl->p", np.conj(coeff), var, coeff).real
        else:
            q = np.einsum("pk,pk->p", np.abs(coeff) ** 2, var)
        err2 = np.sum(weights ** 2 * q / n)
    return complex(value), math.sqrt(max(float(err2), 0.0))


def _require_records(source):
    if isinstance(source, QuadratureDataset):
        if len(source) == 0:
            raise ValueError("dataset has no records")
        if np.any(source.per_point_counts == 0):
            missing = int(np.sum(source.per_point_counts == 0))
            raise ValueError(f"{missing} grid points have no records")


# ---------------------------------------------------------------- estimators

def estimate_quasidist(source, s, alpha_points, chunk=DEFAULT_CHUNK, threads=1):
    """s-parametrized quasidistribution W_s at each alpha point.

    ``source`` is a QuadratureDataset on a quasidistribution grid (or an
    ExactStatistics).  Detection loss is compensated inside the kernel,
    which requires s < s_eta = -(1-eta)/eta.
    """
    grid = source.grid
    spec = KernelSpec(grid.modes, s, source.eta)
    validate_request(source, s=s, kind="quasidist").raise_if_failed()
    _require_records(source)
    alphas = np.atleast_2d(np.asarray(alpha_points, dtype=complex))
    if alphas.shape[1] != grid.modes:
        raise ValueError(f"alpha points need {grid.modes} components")
    # c-number quadrature Xtilde for every (alpha, grid point)
    x_tilde = math.sqrt(2.0) * np.real(_mode_coefficients(grid) @ alphas.T)  # (P, A)
    inv_sqrt_eta = 1.0 / math.sqrt(source.eta)

    def features(gi, x):
        xi = x[:, None] * inv_sqrt_eta - x_tilde[gi]
        return s_kernel(xi.ravel(), spec).reshape(xi.shape)

    acc = accumulate(source, features, len(alphas), covariance=False, chunk=chunk,
                     threads=threads)
    vals, errs = [], []
    ones = np.ones(len(grid))
    for a in range(len(alphas)):
        v, e = _combine(acc, grid.weights, ones, a)
        vals.append(v.real)
        errs.append(e)
    meta = {"s": s, "eta": source.eta, "N": grid.modes, "records": int(acc.count.sum())}
    return EstimateTable("quasidist", [tuple(a) for a in alphas], vals, errs, meta)


def estimate_rho(source, cutoff, chunk=DEFAULT_CHUNK, threads=1):
    """Fock density matrix block rho_mn with every index <= ``cutoff``.

    Hermiticity is exact: rho_nm is stored as the conjugate of rho_mn and
    the diagonal is real.
    """
    grid = source.grid
    N, eta = grid.modes, source.eta
    validate_request(source, kind="rho", cutoff=cutoff).raise_if_failed()
    _require_records(source)
    spec = KernelSpec(N, -1.0, eta)
    spec.require_pattern()
    pmax = 2 * N * cutoff

    def features(gi, x):
        return xi_table(x, N, pmax, eta).T

    acc = accumulate(source, features, pmax + 1, covariance=True, chunk=chunk,
                     threads=threads)
    u = grid.direction_cosines()
    keys = fock_indices(N, cutoff)
    pos = {k: i for i, k in enumerate(keys)}
    vals = np.zeros(len(keys), dtype=complex)
    errs = np.zeros(len(keys))
    done = set()
    for (m, n) in keys:
        if (m, n) in done:
            continue
        idx = MomentIndex(m, n)
        c = pattern_coefficients(idx, u, eta)
        coeff = np.zeros((len(grid), pmax + 1))
        coeff[:, :c.shape[1]] = c
        phase = np.exp(1j * grid.psis @ np.subtract(m, n))
        v, e = _combine(acc, grid.weights, coeff * phase[:, None], None)
        if m == n:
            v = complex(v.real, 0.0)
        vals[pos[(m, n)]], errs[pos[(m, n)]] = v, e
        if m != n:
            vals[pos[(n, m)]], errs[pos[(n, m)]] = np.conj(v), e
        done.update({(m, n), (n, m)})
    meta = {"eta": eta, "N": N, "cutoff": cutoff, "records": int(acc.count.sum())}
    return EstimateTable("rho_block", keys, vals, errs, meta)


def estimate_moments(source, s=1.0, max_order=2, indices=None, chunk=DEFAULT_CHUNK,
                     threads=1):
    """s-ordered moments <prod a_j^dag**m_j a_j**n_j>_s.

    By default every (m, n) with total order <= ``max_order`` is returned
    (only m == n for phase-randomized data).  For s = 1 detection loss is
    compensated by dividing by eta**(M/2); otherwise X -> X/sqrt(eta) and
    s -> s + (1-eta)/eta in the kernel.
    """
    grid = source.grid
    N, eta = grid.modes, source.eta
    randomized = getattr(source, "phase_randomized", False)
    if indices is None:
        indices = moment_indices(N, max_order, diagonal_only=randomized)
    else:
        indices = [EstimateTable._norm(k) for k in indices]
    validate_request(source, kind="moments", indices=indices).raise_if_failed()
    _require_records(source)
    top = max(sum(m) + sum(n) for m, n in indices)

    if s == 1.0:
        scale = eta ** (-0.5 * np.arange(top + 1))

        def features(gi, x):
            return hermite_scaled_all(top, x, 1.0).T * scale
    else:
        s_eff = s + (1.0 - eta) / eta
        inv = 1.0 / math.sqrt(eta)

        def features(gi, x):
            return hermite_scaled_all(top, x * inv, s_eff).T

    acc = accumulate(source, features, top + 1, covariance=True, chunk=chunk,
                     threads=threads)
    pos = {k: i for i, k in enumerate(indices)}
    vals = np.zeros(len(indices), dtype=complex)
    errs = np.zeros(len(indices))
    coeffs = {}
    for (m, n) in indices:
        idx = MomentIndex(m, n)
        c = moment_angle_factor(idx, grid.thetas) * moment_phase_factor(idx, grid.psis)
        v, e = _combine(acc, grid.weights, c, idx.M)
        if m == n:
            v = complex(v.real, 0.0)
            coeffs[(m, n)] = (c.real, idx.M)
        vals[pos[(m, n)]], errs[pos[(m, n)]] = v, e
        if m != n and (n, m) in pos:
            vals[pos[(n, m)]] = np.conj(v)
            errs[pos[(n, m)]] = e
    # covariance between real diagonal entries (photon-number moments)
    cov = {}
    diag = list(coeffs)
    n_rec = np.maximum(acc.count, 1).astype(float)
    var = acc.variance()
    for i, a in enumerate(diag):
        for b in diag[i + 1:]:
            ca, ka = coeffs[a]
            cb, kb = coeffs[b]
            cov[(a, b)] = float(np.sum(grid.weights ** 2 * ca * cb * var[:, ka, kb] / n_rec))
    meta = {"s": s, "eta": eta, "N": N, "records": int(acc.count.sum()),
            "phase_randomized": bool(randomized)}
    return EstimateTable("moments", indices, vals, errs, meta, cov)


def mandel_q(table, j):
    """Mandel parameter Q_j = (<:n_j^2:> - <n_j>^2)/<n_j> with its error.

    ``table`` must hold normally ordered (s = 1) moments.  Raises
    ValueError when <n_j> is consistent with zero, where Q_j is undefined.
    """
    if table.kind != "moments":
        raise ValueError("mandel_q needs a moment table")
    if table.metadata.get("s", 1.0) != 1.0:
        raise ValueError("mandel_q needs normally ordered (s = 1) moments")
    N = table.metadata.get("N") or len(table.keys[0][0])
    e1 = tuple(int(i == j) for i in range(N))
    e2 = tuple(2 * int(i == j) for i in range(N))
    k1, k2 = (e1, e1), (e2, e2)
    if k1 not in table or k2 not in table:
        raise ValueError(f"table lacks <n_{j + 1}> or <:n_{j + 1}^2:>")
    n1, s1 = table[k1]
    n2, s2 = table[k2]
    n1, n2 = n1.real, n2.real
    if not abs(n1) > max(s1, 1e-12):
        raise ValueError(f"Mandel Q undefined: <n_{j + 1}> = {n1:.3g} +- {s1:.3g} "
                         "is consistent with zero")
    q = (n2 - n1 * n1) / n1
    d1 = -n2 / n1 ** 2 - 1.0
    d2 = 1.0 / n1
    var = d1 * d1 * s1 ** 2 + d2 * d2 * s2 ** 2 + 2 * d1 * d2 * table.cov(k1, k2)
    return q, math.sqrt(max(var, 0.0))
