"""Command-line entry point: ``tomolab {simulate,reconstruct,figures,validate}``.

A run is described by a JSON config (``--config``)::

    {
      "state": {"kind": "demo", "r": 1.0},
      "grid": {"kind": "quasidistribution", "theta_count": 10, "psi_count": 10},
      "per_point": 50, "eta": 0.8, "seed": 1,
      "task": "q",
      "q": {"s": -1, "cut": {"from": -3, "to": 3, "count": 21}}
    }

State kinds: ``demo`` (r), ``vacuum`` (modes), ``coherent`` (alpha: list
of [re, im]) and ``custom`` (modes, ops: squeeze / beam_splitter /
phase_shift / displace steps applied to vacuum).  Tasks: ``q`` (s,
alpha_points or cut), ``rho`` (cutoff) and ``moments`` (s, max_order or
indices).

Exit codes: 0 success, 2 a reconstruction bound is violated, 3 IO or
format failure.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import figures
from . import gaussian as gs
from .geometry import MOMENT, QUASIDISTRIBUTION, build_grid
from .io import (DatasetFormatError, read_dataset, write_dataset, write_table_csv,
                 write_table_json)
from .kernels import BoundViolation
from .reconstruct import (estimate_moments, estimate_quasidist, estimate_rho, mandel_q,
                          validate_request)

EXIT_OK, EXIT_BOUND, EXIT_IO = 0, 2, 3
THREADS_ENV = "TOMOLAB_THREADS"
TASK_GRID = {"q": QUASIDISTRIBUTION, "rho": QUASIDISTRIBUTION, "moments": MOMENT}


class ConfigError(ValueError):
    """Invalid run configuration."""


# ---------------------------------------------------------------- config

def load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg


def _complex(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1] if len(v) > 1 else 0.0)
    return complex(v)


def build_state(spec):
    """GaussianState from the ``state`` section of a config."""
    kind = spec.get("kind", "demo")
    if kind == "demo":
        return gs.three_mode_demo_state(float(spec.get("r", 1.0)))
    if kind == "vacuum":
        return gs.vacuum(int(spec.get("modes", 1)))
    if kind == "coherent":
        return gs.coherent([_complex(a) for a in spec["alpha"]])
    if kind == "custom":
        state = gs.vacuum(int(spec["modes"]))
        for op in spec.get("ops", []):
            name = op.get("op")
            if name == "squeeze":
                state = gs.squeeze(state, int(op["mode"]), float(op["r"]))
            elif name == "beam_splitter":
                state = gs.beam_splitter(state, int(op["i"]), int(op["j"]), float(op["angle"]))
            elif name == "phase_shift":
                state = gs.phase_shift(state, int(op["mode"]), float(op["phi"]))
            elif name == "displace":
                state = gs.displace(state, int(op["mode"]), _complex(op["alpha"]))
            else:
                raise ConfigError(f"unknown state op {name!r}")
        return state
    raise ConfigError(f"unknown state kind {kind!r}")


def build_grid_from(cfg, modes):
    g = cfg.get("grid", {})
    task = cfg.get("task")
    kind = g.get("kind", TASK_GRID.get(task, QUASIDISTRIBUTION))
    if task in TASK_GRID and kind != TASK_GRID[task]:
        raise ConfigError(f"task {task!r} needs a {TASK_GRID[task]} grid, config has {kind!r}")
    return build_grid(modes, int(g.get("theta_count", 10)), int(g.get("psi_count", 10)), kind,
                      rule=g.get("rule", "right"))


def _alpha_points(qcfg, modes):
    if "alpha_points" in qcfg:
        return [tuple(_complex(a) for a in pt) for pt in qcfg["alpha_points"]]
    cut = qcfg.get("cut", {"from": -3.0, "to": 3.0, "count": 21})
    return [(complex(a),) * modes
            for a in np.linspace(cut["from"], cut["to"], int(cut["count"]))]


def _moment_indices(mcfg):
    if "indices" in mcfg:
        return [(tuple(m), tuple(n)) for m, n in mcfg["indices"]]
    return None


def resolve_threads(arg):
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    return 1


def _overrides(cfg, args):
    cfg = dict(cfg)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "eta", None) is not None:
        cfg["eta"] = args.eta
    return cfg


# ---------------------------------------------------------------- commands

def cmd_simulate(args):
    cfg = _overrides(load_config(args.config), args)
    state = build_state(cfg.get("state", {}))
    grid = build_grid_from(cfg, state.modes)
    eta = float(cfg.get("eta", 1.0))
    seed = int(cfg.get("seed", 0))
    per_point = int(cfg.get("per_point", 50))
    data = gs.simulate_dataset(state, grid, per_point, eta, seed, threads=resolve_threads(args.threads),
                               randomize_phases=bool(cfg.get("randomize_phases", False)))
    data.source = {"state": cfg.get("state", {}), "per_point": per_point}
    os.makedirs(args.out, exist_ok=True)
    name = "dataset.bin" if args.binary else "dataset.csv"
    path = write_dataset(data, os.path.join(args.out, name), binary=args.binary,
                         expanded=args.expanded)
    print(f"wrote {len(data)} records on {len(grid)} grid points "
          f"({grid.weight_kind}, N={grid.modes}, eta={eta}, seed={seed}) to {path}")
    return EXIT_OK


def _exact_for(cfg, table):
    if "state" not in cfg:
        return None
    state = build_state(cfg["state"])
    if table.kind == "quasidist":
        return {k: gs.analytic_q(state, np.array(k)) for k in table.keys}
    if table.kind == "moments":
        s = table.metadata["s"]
        return {k: gs.analytic_moment(state, k[0], k[1], s) for k in table.keys}
    return {k: gs.analytic_fock_element(state, k[0], k[1]) for k in table.keys}


def _request(cfg, data):
    task = cfg.get("task", "q")
    if task == "q":
        qcfg = cfg.get("q", {})
        s = float(qcfg.get("s", -1.0))
        return task, validate_request(data, s=s, kind="quasidist"), qcfg
    if task == "rho":
        rcfg = cfg.get("rho", {})
        cutoff = rcfg.get("cutoff")
        if cutoff is None:
            if "state" not in cfg:
                raise ConfigError("rho task needs rho.cutoff when the state is unknown")
            cutoff = gs.fock_cutoff(build_state(cfg["state"]))
            rcfg = dict(rcfg, cutoff=cutoff)
        return task, validate_request(data, kind="rho", cutoff=int(cutoff)), rcfg
    if task == "moments":
        mcfg = cfg.get("moments", {})
        idx = _moment_indices(mcfg)
        rep = validate_request(data, kind="moments", indices=idx,
                               max_order=int(mcfg.get("max_order", 2)))
        return task, rep, mcfg
    raise ConfigError(f"unknown task {task!r}")


def cmd_reconstruct(args):
    cfg = load_config(args.config)
    data = read_dataset(args.dataset)
    if args.eta is not None and args.eta != data.eta:
        print(f"note: dataset records eta={data.eta}; using --eta {args.eta} for compensation",
              file=sys.stderr)
        data.eta = float(args.eta)
    threads = resolve_threads(args.threads)
    task, report, sub = _request(cfg, data)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "validation.json"), "w") as fh:
        json.dump(report.as_dict(), fh, indent=1)
        fh.write("\n")
    report.raise_if_failed()
    extra = {}
    if task == "q":
        table = estimate_quasidist(data, float(sub.get("s", -1.0)),
                                   _alpha_points(sub, data.grid.modes), threads=threads)
    elif task == "rho":
        table = estimate_rho(data, int(sub["cutoff"]), threads=threads)
    else:
        table = estimate_moments(data, float(sub.get("s", 1.0)), int(sub.get("max_order", 2)),
                                 indices=_moment_indices(sub), threads=threads)
        if table.metadata["s"] == 1.0:
            for j in range(data.grid.modes):
                try:
                    extra[f"mandel_q_{j + 1}"] = list(mandel_q(table, j))
                except ValueError:
                    pass
    exact = _exact_for(cfg, table)
    table.metadata.update(extra)
    write_table_json(table, os.path.join(args.out, "estimates.json"), exact, report)
    write_table_csv(table, os.path.join(args.out, "estimates.csv"), exact)
    print(f"{task}: {len(table)} entries from {len(data)} records written to {args.out}")
    return EXIT_OK


def cmd_figures(args):
    seed = figures.DEFAULT_SEED if args.seed is None else args.seed
    paths = figures.emit(args.which, args.out, seed=seed,
                         threads=resolve_threads(args.threads), scale=args.scale)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_validate(args):
    cfg = _overrides(load_config(args.config), args)
    if args.dataset:
        data = read_dataset(args.dataset)
    else:
        state_cfg = cfg.get("state", {})
        modes = build_state(state_cfg).modes if state_cfg else int(cfg.get("modes", 1))
        data = _GridOnly(build_grid_from(cfg, modes), float(cfg.get("eta", 1.0)),
                         bool(cfg.get("randomize_phases", False)))
    if args.eta is not None:
        data.eta = float(args.eta)
    _, report, _ = _request(cfg, data)
    print(json.dumps(report.as_dict(), indent=1))
    for c in report.failures:
        print(f"FAILED {c['name']}: {c['inequality']} ({c['detail']})", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_BOUND


class _GridOnly:
    """Grid and efficiency of a planned run, enough for validation."""

    def __init__(self, grid, eta, phase_randomized=False):
        self.grid, self.eta, self.phase_randomized = grid, eta, phase_randomized


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="tomolab", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("--config", required=config_required, help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        sp.add_argument("--eta", type=float, help="detection efficiency (overrides config)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--threads", type=int,
                        help=f"worker threads (fallback: ${THREADS_ENV}, then 1)")

    sp = sub.add_parser("simulate", help="simulate a homodyne dataset")
    common(sp, True)
    sp.add_argument("--expanded", action="store_true", help="add theta/psi columns")
    sp.add_argument("--binary", action="store_true", help="packed binary records")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("reconstruct", help="estimate Q, rho or moments from a dataset")
    common(sp, True)
    sp.add_argument("--dataset", required=True, help="dataset file from 'simulate'")
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("figures", help="write plot data for figures 3, 4, 6, 7, 8")
    common(sp)
    sp.add_argument("--which", type=int, nargs="+", choices=figures.FIGURES,
                    default=list(figures.FIGURES))
    sp.add_argument("--scale", type=float, default=1.0,
                    help="fraction of the full records per grid point (default 1)")
    sp.set_defaults(func=cmd_figures)

    sp = sub.add_parser("validate", help="check a request against reconstruction bounds")
    common(sp, True)
    sp.add_argument("--dataset", help="validate against this dataset's grid")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BoundViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except (OSError, DatasetFormatError, ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
