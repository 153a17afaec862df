"""Hyperspherical parametrization of the local-oscillator mode and the
discrete (theta, psi) sampling grids.

The measured mode is A = sum_j z_j a_j with z_j = u_j(theta) exp(-i psi_j),

    u_j = cos(theta_j) prod_{l<j} sin(theta_l),   j < N
    u_N = prod_{l<N} sin(theta_l)
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LOConfiguration",
    "SamplingGrid",
    "QUASIDISTRIBUTION",
    "MOMENT",
    "direction_cosines",
    "mode_coefficients",
    "jacobian_weight",
    "projected_quadrature",
    "build_grid",
]

QUASIDISTRIBUTION = "quasidistribution"
MOMENT = "moment"
_WEIGHT_KINDS = (QUASIDISTRIBUTION, MOMENT)


@dataclass(frozen=True)
class LOConfiguration:
    """Angles and phases selecting the measured superposition mode."""

    theta: tuple
    psi: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        object.__setattr__(self, "psi", tuple(float(p) for p in self.psi))
        if len(self.psi) < 1:
            raise ValueError("LOConfiguration needs at least one mode")
        if len(self.theta) != len(self.psi) - 1:
            raise ValueError(
                f"theta must have N-1={len(self.psi) - 1} entries, got {len(self.theta)}")

    @property
    def modes(self):
        return len(self.psi)


def _check_theta(theta, N):
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1:] != (N - 1,) and not (N == 1 and theta.size == 0):
        raise ValueError(f"theta must have length N-1={N - 1}, got shape {theta.shape}")
    if N == 1:
        theta = theta.reshape(theta.shape[:-1] + (0,)) if theta.ndim else np.zeros(0)
    return theta


def direction_cosines(theta, N):
    """Real coefficients u_j(theta), j = 1..N.

    ``theta`` may carry leading batch dimensions; the last axis has length
    N - 1 and the result's last axis has length N.
    """
    theta = _check_theta(theta, N)
    batch = theta.shape[:-1]
    u = np.empty(batch + (N,))
    sin_prod = np.ones(batch)
    for j in range(N - 1):
        u[..., j] = np.cos(theta[..., j]) * sin_prod
        sin_prod = sin_prod * np.sin(theta[..., j])
    u[..., N - 1] = sin_prod
    return u


def mode_coefficients(config):
    """Complex coefficients z_j = u_j exp(-i psi_j); sum |z_j|**2 = 1."""
    u = direction_cosines(config.theta, config.modes)
    return u * np.exp(-1j * np.asarray(config.psi))


def jacobian_weight(theta, N):
    """g(theta) = prod_l cos(theta_l) sin(theta_l)**(2(N-l)-1); 1 for N = 1."""
    theta = _check_theta(theta, N)
    g = np.ones(theta.shape[:-1])
    for l in range(1, N):
        t = theta[..., l - 1]
        g = g * np.cos(t) * np.sin(t) ** (2 * (N - l) - 1)
    return g if g.ndim else float(g)


def projected_quadrature(alpha, config):
    """c-number quadrature (1/sqrt 2) sum_j (z_j alpha_j + c.c.)."""
    alpha = np.asarray(alpha, dtype=complex)
    if alpha.shape[-1] != config.modes:
        raise ValueError(f"alpha has {alpha.shape[-1]} modes, configuration has {config.modes}")
    z = mode_coefficients(config)
    return math.sqrt(2.0) * np.real(alpha @ z)


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    """Equidistant grid of LO configurations with quadrature weights.

    Points are ordered lexicographically in (theta_1..theta_{N-1},
    psi_1..psi_N), slowest to fastest.  ``thetas`` has shape (P, N-1),
    ``psis`` (P, N) and ``weights`` (P,).
    """

    modes: int
    theta_count: int
    psi_count: int
    weight_kind: str
    theta_max: float
    psi_max: float
    rule: str = "right"
    thetas: np.ndarray = field(repr=False, default=None)
    psis: np.ndarray = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return len(self.weights)

    @property
    def theta_values(self):
        return _axis(self.theta_count, self.theta_max, self.rule)

    @property
    def psi_values(self):
        return _axis(self.psi_count, self.psi_max, self.rule)

    def config(self, index):
        return LOConfiguration(self.thetas[index], self.psis[index])

    @property
    def points(self):
        """Iterate over (LOConfiguration, weight) pairs."""
        for i in range(len(self)):
            yield self.config(i), float(self.weights[i])

    def direction_cosines(self):
        """u_j for every point, shape (P, N)."""
        return direction_cosines(self.thetas, self.modes)

    def metadata(self):
        return {
            "modes": self.modes,
            "theta_count": self.theta_count,
            "psi_count": self.psi_count,
            "theta_max": self.theta_max,
            "psi_max": self.psi_max,
            "weight_kind": self.weight_kind,
            "rule": self.rule,
        }

    @classmethod
    def from_metadata(cls, meta):
        grid = build_grid(meta["modes"], meta["theta_count"], meta["psi_count"],
                          meta["weight_kind"], rule=meta.get("rule", "right"))
        for key in ("theta_max", "psi_max"):
            if not math.isclose(getattr(grid, key), meta[key], rel_tol=1e-12):
                raise ValueError(f"grid metadata {key}={meta[key]} does not match "
                                 f"{meta['weight_kind']} convention {getattr(grid, key)}")
        return grid

    def same_geometry(self, other):
        return self.metadata() == other.metadata()


def _axis(count, upper, rule):
    step = upper / count
    k = np.arange(1, count + 1, dtype=float)
    if rule == "midpoint":
        k -= 0.5
    return k * step


def build_grid(N, theta_count, psi_count, weight_kind, rule="right"):
    """Equidistant sampling grid.

    quasidistribution: theta_k = k pi/(2 N_theta), psi_k = 2 pi k/N_psi and
    weights g(theta) dtheta**(N-1) dpsi**N.
    moment: theta_k = k pi/N_theta, psi_k = pi k/N_psi, plain weights.

    ``rule='midpoint'`` shifts every node back by half a step.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if weight_kind not in _WEIGHT_KINDS:
        raise ValueError(f"weight_kind must be one of {_WEIGHT_KINDS}")
    if rule not in ("right", "midpoint"):
        raise ValueError("rule must be 'right' or 'midpoint'")
    if psi_count < 1 or (N > 1 and theta_count < 1):
        raise ValueError("grid counts must be >= 1")
    if N == 1:
        theta_count = 0
    if weight_kind == QUASIDISTRIBUTION:
        theta_max, psi_max = math.pi / 2, 2 * math.pi
    else:
        theta_max, psi_max = math.pi, math.pi

    th_axis = _axis(theta_count, theta_max, rule) if N > 1 else np.zeros(0)
    ps_axis = _axis(psi_count, psi_max, rule)
    axes = [th_axis] * (N - 1) + [ps_axis] * N
    mesh = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, 2 * N - 1)
    thetas = mesh[:, : N - 1]
    psis = mesh[:, N - 1:]

    d_theta = theta_max / theta_count if N > 1 else 1.0
    d_psi = psi_max / psi_count
    base = d_theta ** (N - 1) * d_psi ** N
    if weight_kind == QUASIDISTRIBUTION:
        weights = base * np.atleast_1d(jacobian_weight(thetas, N))
    else:
        weights = np.full(len(mesh), base)
    for arr in (thetas, psis, weights):
        arr.setflags(write=False)
    return SamplingGrid(N, theta_count, psi_count, weight_kind, theta_max, psi_max,
                        rule, thetas, psis, weights)
