"""Single-LO multimode homodyne tomography: Gaussian-state simulator and
kernel-averaging reconstruction of quasidistributions, density matrices
and s-ordered moments."""
from .dataset import QuadratureDataset
from .gaussian import (GaussianState, analytic_fock_element, analytic_moment, analytic_q,
                       beam_splitter, coherent, displace, fock_cutoff, phase_shift,
                       quadrature_stats, sample_quadrature, simulate_dataset, squeeze,
                       three_mode_demo_state, vacuum)
from .geometry import (MOMENT, QUASIDISTRIBUTION, LOConfiguration, SamplingGrid, build_grid,
                       direction_cosines, jacobian_weight, mode_coefficients,
                       projected_quadrature)
from .kernels import (BoundViolation, KernelSpec, MomentIndex, f_biorthogonal_closed,
                      f_biorthogonal_solve, g_poly, moment_kernel, pattern_function,
                      pattern_integral_oracle, s_kernel, s_kernel_integral_oracle)
from .reconstruct import (EstimateTable, ExactStatistics, PointAccumulator, ValidationReport,
                          accumulate, estimate_moments, estimate_quasidist, estimate_rho,
                          mandel_q, validate_request)

__version__ = "0.1.0"
