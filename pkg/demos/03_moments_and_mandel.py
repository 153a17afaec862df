"""
Photon moments and the Mandel parameter
=======================================

Normally ordered moments come from Hermite-polynomial kernels on a moment
grid.  For the three-mode squeezed state each mode is super-Poissonian
with Mandel Q_1 = <n_1> + |<a_1^2>|^2 / <n_1>, about 1.254.

Asking for a 10th-order moment on a 10-point grid aliases and is refused
with the failing inequality named.
"""

from tomolab import (MOMENT, BoundViolation, analytic_moment, build_grid, estimate_moments,
                     mandel_q, simulate_dataset, three_mode_demo_state, validate_request)

state = three_mode_demo_state(r=1.0)
grid = build_grid(3, 10, 10, MOMENT)
data = simulate_dataset(state, grid, per_point=20, eta=0.8, seed=7)

n1 = ((1, 0, 0), (1, 0, 0))
n2 = ((2, 0, 0), (2, 0, 0))
table = estimate_moments(data, s=1.0, indices=[n1, n2])
for key, label in ((n1, "<n_1>"), (n2, "<:n_1^2:>")):
    v, e = table[key]
    print(f"{label:10s} {v.real:.4f} +- {e:.4f}   exact {analytic_moment(state, *key).real:.4f}")
q, q_err = mandel_q(table, 0)
print(f"Mandel Q_1  {q:.3f} +- {q_err:.3f}")

report = validate_request(data, kind="moments", max_order=2)
print(f"second order: ok={report.ok}, sufficient grid R={report.R}, parameters P={report.P}")
try:
    estimate_moments(data, indices=[((10, 0, 0), (0, 0, 0))])
except BoundViolation as exc:
    print("10th order refused:", exc)
