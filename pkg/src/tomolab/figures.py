"""Plot data for the standard figures, emitted as CSV/JSON.

Figures 3 and 4 are kernel curves.  Figures 6-8 rerun the three-mode
squeezed-vacuum experiments (r = 1, eta = 0.8) with a fixed seed:

* 6: Q-function on the cut alpha_1 = alpha_2 = alpha_3, 10x10 grid, 50/pt
* 7: single-mode moments <:n_1^k:> and <a_1^k>, 10x10 moment grid, 200/pt
* 8: two- and three-mode moments from the same data as figure 7
"""
import json
import os

import numpy as np

from .gaussian import analytic_moment, analytic_q, simulate_dataset, three_mode_demo_state
from .geometry import MOMENT, QUASIDISTRIBUTION, build_grid
from .io import write_columns
from .kernels import KernelSpec, f_biorthogonal_closed, s_kernel
from .reconstruct import estimate_moments, estimate_quasidist, mandel_q

__all__ = ["FIGURES", "DEFAULT_SEED", "figure3", "figure4", "figure6", "figure7", "figure8",
           "emit"]

FIGURES = (3, 4, 6, 7, 8)
DEFAULT_SEED = 20011
DEMO_R = 1.0
DEMO_ETA = 0.8

FIG7_INDICES = ([((k, 0, 0), (k, 0, 0)) for k in range(1, 5)]
                + [((0, 0, 0), (k, 0, 0)) for k in range(1, 10)])
FIG8_INDICES = [
    ((1, 1, 0), (1, 1, 0)),
    ((1, 0, 1), (1, 0, 1)),
    ((1, 1, 1), (1, 1, 1)),
    ((2, 1, 0), (2, 1, 0)),
    ((1, 0, 0), (0, 1, 0)),
    ((0, 0, 0), (1, 1, 0)),
    ((0, 0, 0), (2, 2, 0)),
    ((0, 0, 0), (2, 1, 1)),
]


def figure3(out):
    """S_N(xi; -1) for N = 1..4 on xi in [-4, 4], step 0.02."""
    xi = np.round(np.arange(-200, 201) * 0.02, 10)
    cols = [s_kernel(xi, KernelSpec(N, -1.0, 1.0)) for N in range(1, 5)]
    path = os.path.join(out, "fig3_s_kernel.csv")
    write_columns(path, ["xi", "S_1", "S_2", "S_3", "S_4"], zip(xi, *cols))
    return [path]


def figure4(out, points=401):
    """Biorthogonal functions F_m^2(theta), m = 0, 1, 2, on [0, pi]."""
    theta = np.linspace(0.0, np.pi, points)
    cols = [f_biorthogonal_closed(m, 2, theta) for m in range(3)]
    path = os.path.join(out, "fig4_biorthogonal.csv")
    write_columns(path, ["theta", "F_0", "F_1", "F_2"], zip(theta, *cols))
    return [path]


def figure6(out, seed=DEFAULT_SEED, per_point=50, threads=1, cut_points=21, surface_points=11):
    """Reconstructed vs exact Q(alpha, alpha, alpha).

    Writes the real cut (``cut_points`` values of a in [-3, 3]) and a
    ``surface_points`` x ``surface_points`` surface over complex alpha.
    """
    state = three_mode_demo_state(DEMO_R)
    grid = build_grid(3, 10, 10, QUASIDISTRIBUTION)
    data = simulate_dataset(state, grid, per_point, DEMO_ETA, seed, threads=threads)
    cut = np.linspace(-3, 3, cut_points)
    side = np.linspace(-3, 3, surface_points)
    alphas = [complex(a) for a in cut] + [complex(a, b) for a in side for b in side]
    table = estimate_quasidist(data, -1.0, [(a, a, a) for a in alphas], threads=threads)
    exact = {k: analytic_q(state, np.array(k)) for k in table.keys}
    rows_cut, rows_surf = [], []
    for i, a in enumerate(alphas):
        key = table.keys[i]
        row = [table.values[i].real, table.errors[i], exact[key]]
        row.append(row[2] - row[0])
        if i < cut_points:
            rows_cut.append([a.real] + row)
        else:
            rows_surf.append([a.real, a.imag] + row)
    p1 = write_columns(os.path.join(out, "fig6_cut.csv"),
                       ["a", "Q", "stderr", "exact", "delta"], rows_cut)
    p2 = write_columns(os.path.join(out, "fig6_surface.csv"),
                       ["re_alpha", "im_alpha", "Q", "stderr", "exact", "delta"], rows_surf)
    p3 = _summary(out, "fig6.json", seed=seed, per_point=per_point, records=len(data),
                  eta=DEMO_ETA, r=DEMO_R, grid=grid.metadata())
    return [p1, p2, p3]


def _moment_run(seed, per_point, threads):
    state = three_mode_demo_state(DEMO_R)
    grid = build_grid(3, 10, 10, MOMENT)
    data = simulate_dataset(state, grid, per_point, DEMO_ETA, seed, threads=threads)
    table = estimate_moments(data, 1.0, indices=FIG7_INDICES + FIG8_INDICES, threads=threads)
    exact = {k: analytic_moment(state, k[0], k[1], 1.0) for k in table.keys}
    return state, grid, data, table, exact


def _moment_rows(table, exact, keys):
    rows = []
    for key in keys:
        v, e = table[key]
        ex = exact[tuple(tuple(x) for x in key)]
        rows.append([" ".join(map(str, key[0])), " ".join(map(str, key[1])),
                     v.real, v.imag, e, ex.real, ex.imag])
    return rows


_MOMENT_COLS = ["m", "n", "value_re", "value_im", "stderr", "exact_re", "exact_im"]


def figure7(out, seed=DEFAULT_SEED, per_point=200, threads=1, _run=None):
    """<:n_1^k:> (k <= 4) and <a_1^k> (k <= 9) with exact values."""
    state, grid, data, table, exact = _run or _moment_run(seed, per_point, threads)
    p1 = write_columns(os.path.join(out, "fig7_moments.csv"), _MOMENT_COLS,
                       _moment_rows(table, exact, FIG7_INDICES))
    q, dq = mandel_q(table, 0)
    n1, n2 = exact[FIG7_INDICES[0]].real, exact[FIG7_INDICES[1]].real
    p2 = _summary(out, "fig7.json", seed=seed, per_point=per_point, records=len(data),
                  eta=DEMO_ETA, r=DEMO_R, grid=grid.metadata(),
                  mandel_q=[q, dq], mandel_q_exact=(n2 - n1 * n1) / n1)
    return [p1, p2]


def figure8(out, seed=DEFAULT_SEED, per_point=200, threads=1, _run=None):
    """Two- and three-mode moments with exact values."""
    state, grid, data, table, exact = _run or _moment_run(seed, per_point, threads)
    p1 = write_columns(os.path.join(out, "fig8_moments.csv"), _MOMENT_COLS,
                       _moment_rows(table, exact, FIG8_INDICES))
    return [p1]


def _summary(out, name, **info):
    path = os.path.join(out, name)
    with open(path, "w") as fh:
        json.dump(info, fh, indent=1)
        fh.write("\n")
    return path


def emit(which, out, seed=DEFAULT_SEED, threads=1, scale=1.0):
    """Write data for the requested figures into ``out``.

    ``scale`` multiplies the records per grid point (1.0 = full size).
    Figures 7 and 8 share one simulated dataset.
    """
    os.makedirs(out, exist_ok=True)
    which = sorted(set(which))
    bad = [w for w in which if w not in FIGURES]
    if bad:
        raise ValueError(f"unknown figure(s) {bad}; choose from {FIGURES}")
    paths = []
    run = None
    for w in which:
        if w == 3:
            paths += figure3(out)
        elif w == 4:
            paths += figure4(out)
        elif w == 6:
            paths += figure6(out, seed, max(2, round(50 * scale)), threads)
        else:
            per_point = max(2, round(200 * scale))
            if run is None:
                run = _moment_run(seed, per_point, threads)
            fn = figure7 if w == 7 else figure8
            paths += fn(out, seed, per_point, threads, _run=run)
    return paths
