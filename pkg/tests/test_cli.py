"""End-to-end runs of the command-line interface."""
import json

import pytest

from tomolab.cli import (EXIT_BOUND, EXIT_IO, EXIT_OK, ConfigError, build_state, main,
                         resolve_threads)
from tomolab.gaussian import coherent
from tomolab.io import read_dataset, read_header


def write_config(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture
def moment_run(tmp_path):
    cfg = {"state": {"kind": "coherent", "alpha": [[1.0, 0.0]]},
           "grid": {"theta_count": 1, "psi_count": 5},
           "per_point": 3000, "eta": 0.9, "seed": 3, "task": "moments",
           "moments": {"max_order": 4}}
    return write_config(tmp_path, cfg)


def test_simulate_then_reconstruct(tmp_path, moment_run, capsys):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", moment_run, "--out", str(out)]) == EXIT_OK
    ds = read_dataset(out / "dataset.csv")
    assert len(ds) == 15000 and ds.eta == 0.9 and ds.seed == 3
    rec = tmp_path / "rec"
    assert main(["reconstruct", "--config", moment_run, "--dataset", str(out / "dataset.csv"),
                 "--out", str(rec)]) == EXIT_OK
    est = json.loads((rec / "estimates.json").read_text())
    assert est["validation"]["ok"]
    n = next(e for e in est["entries"] if e["m"] == [1] and e["n"] == [1])
    assert abs(n["value"][0] - 1.0) < 5 * n["stderr"]
    assert n["exact"] == [pytest.approx(1.0), 0.0]
    assert "mandel_q_1" in est["metadata"]
    assert (rec / "estimates.csv").exists() and (rec / "validation.json").exists()


def test_flags_override_config(tmp_path, moment_run):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", moment_run, "--out", str(out), "--seed", "11",
                 "--eta", "0.7", "--binary"]) == EXIT_OK
    head, _ = read_header(out / "dataset.bin")
    assert head["seed"] == 11 and head["eta"] == 0.7 and head["layout"] == "binary"
    assert main(["simulate", "--config", moment_run, "--out", str(tmp_path / "e"),
                 "--expanded"]) == EXIT_OK
    assert read_header(tmp_path / "e" / "dataset.csv")[0]["layout"] == "csv-expanded"


def test_threads_do_not_change_output(tmp_path, moment_run, monkeypatch):
    main(["simulate", "--config", moment_run, "--out", str(tmp_path / "a")])
    monkeypatch.setenv("TOMOLAB_THREADS", "3")
    main(["simulate", "--config", moment_run, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "dataset.csv").read_bytes() == \
        (tmp_path / "b" / "dataset.csv").read_bytes()


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("TOMOLAB_THREADS", raising=False)
    assert resolve_threads(None) == 1
    monkeypatch.setenv("TOMOLAB_THREADS", "4")
    assert resolve_threads(None) == 4
    assert resolve_threads(2) == 2
    monkeypatch.setenv("TOMOLAB_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_threads(None)


def test_quasidistribution_task(tmp_path):
    cfg = {"state": {"kind": "vacuum", "modes": 1}, "grid": {"psi_count": 8},
           "per_point": 500, "eta": 0.9, "seed": 2, "task": "q",
           "q": {"s": -1, "cut": {"from": -1, "to": 1, "count": 3}}}
    path = write_config(tmp_path, cfg)
    main(["simulate", "--config", path, "--out", str(tmp_path)])
    assert main(["reconstruct", "--config", path, "--dataset", str(tmp_path / "dataset.csv"),
                 "--out", str(tmp_path / "q")]) == EXIT_OK
    rows = (tmp_path / "q" / "estimates.csv").read_text().splitlines()
    assert rows[0].startswith("alpha_1_re,alpha_1_im,value,stderr,exact")
    assert len(rows) == 4


def test_bound_violation_exit_code(tmp_path, moment_run, capsys):
    main(["simulate", "--config", moment_run, "--out", str(tmp_path)])
    bad = json.loads(open(moment_run).read())
    bad["moments"] = {"indices": [[[0], [5]]]}
    path = write_config(tmp_path, bad, "bad.json")
    code = main(["reconstruct", "--config", path, "--dataset", str(tmp_path / "dataset.csv"),
                 "--out", str(tmp_path / "r")])
    assert code == EXIT_BOUND
    assert "m_j < N_psi and n_j < N_psi" in capsys.readouterr().err
    rep = json.loads((tmp_path / "r" / "validation.json").read_text())
    assert not rep["ok"]


def test_validate_command(tmp_path, capsys):
    cfg = {"state": {"kind": "demo", "r": 1.0}, "eta": 0.8, "task": "moments",
           "grid": {"theta_count": 10, "psi_count": 10}, "moments": {"max_order": 2}}
    path = write_config(tmp_path, cfg)
    assert main(["validate", "--config", path]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert (rep["R"], rep["P"]) == (243, 21)
    cfg["moments"] = {"indices": [[[10, 0, 0], [0, 0, 0]]]}
    path = write_config(tmp_path, cfg)
    assert main(["validate", "--config", path]) == EXIT_BOUND
    assert "M_j < N_theta" in capsys.readouterr().err
    rho = write_config(tmp_path, {"state": {"kind": "vacuum"}, "task": "rho",
                                  "rho": {"cutoff": 1}})
    assert main(["validate", "--config", rho, "--eta", "0.5"]) == EXIT_BOUND
    assert "eta must exceed 1/2" in capsys.readouterr().err


def test_io_errors_exit_code(tmp_path, moment_run, capsys):
    assert main(["reconstruct", "--config", moment_run, "--dataset",
                 str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == EXIT_IO
    bad = tmp_path / "bad.csv"
    bad.write_text("not a dataset\n")
    assert main(["reconstruct", "--config", moment_run, "--dataset", str(bad),
                 "--out", str(tmp_path)]) == EXIT_IO
    cfg = tmp_path / "broken.json"
    cfg.write_text("{")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_IO
    assert "error:" in capsys.readouterr().err


def test_unknown_state_kind(tmp_path):
    path = write_config(tmp_path, {"state": {"kind": "cat"}})
    assert main(["simulate", "--config", path, "--out", str(tmp_path)]) == EXIT_IO


def test_build_state_custom():
    st_ = build_state({"kind": "custom", "modes": 1,
                       "ops": [{"op": "displace", "mode": 0, "alpha": [1.0, 0.0]}]})
    assert st_.mean.tolist() == coherent([1.0]).mean.tolist()


def test_figures_small(tmp_path):
    out = tmp_path / "figs"
    assert main(["figures", "--which", "3", "4", "7", "--scale", "0.01", "--out", str(out),
                 "--seed", "5"]) == EXIT_OK
    names = {p.name for p in out.iterdir()}
    assert {"fig3_s_kernel.csv", "fig4_biorthogonal.csv", "fig7_moments.csv",
            "fig7.json"} <= names
    rows = (out / "fig3_s_kernel.csv").read_text().splitlines()
    assert rows[0] == "xi,S_1,S_2,S_3,S_4" and len(rows) == 402
    info = json.loads((out / "fig7.json").read_text())
    assert info["seed"] == 5 and info["per_point"] == 2


def test_figures_rejects_unknown(tmp_path):
    with pytest.raises(SystemExit):
        main(["figures", "--which", "5", "--out", str(tmp_path)])


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "tomolab", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0
    for cmd in ("simulate", "reconstruct", "figures", "validate"):
        assert cmd in r.stdout
