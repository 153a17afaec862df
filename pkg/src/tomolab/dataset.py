"""In-memory quadrature measurement records."""
from dataclasses import dataclass, field

import numpy as np

from .geometry import SamplingGrid

__all__ = ["QuadratureDataset"]


@dataclass(eq=False)
class QuadratureDataset:
    """Homodyne records on a sampling grid.

    ``grid_index[i]`` names the grid point at which ``x[i]`` (the detected
    quadrature X') was recorded.  When ``phase_randomized`` is set the
    phases actually used were drawn uniformly at random and the grid psi
    values carry no information.
    """

    grid: SamplingGrid
    eta: float
    grid_index: np.ndarray
    x: np.ndarray
    seed: int = None
    phase_randomized: bool = False
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid_index = np.asarray(self.grid_index, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=float)
        if self.grid_index.shape != self.x.shape or self.x.ndim != 1:
            raise ValueError("grid_index and x must be 1-d arrays of equal length")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must satisfy 0 < eta <= 1, got {self.eta}")
        if len(self.x) and (self.grid_index.min() < 0 or self.grid_index.max() >= len(self.grid)):
            raise ValueError("record references a grid point outside the grid")

    def __len__(self):
        return len(self.x)

    @property
    def per_point_counts(self):
        return np.bincount(self.grid_index, minlength=len(self.grid))

    def partitions(self, n_parts):
        """Split the records into ``n_parts`` contiguous ranges."""
        edges = np.linspace(0, len(self), n_parts + 1).astype(int)
        return [(self.grid_index[a:b], self.x[a:b]) for a, b in zip(edges[:-1], edges[1:])]

    def shuffled(self, rng):
        order = rng.permutation(len(self))
        return QuadratureDataset(self.grid, self.eta, self.grid_index[order], self.x[order],
                                 self.seed, self.phase_randomized, dict(self.source))
