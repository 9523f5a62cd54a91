import json
import subprocess
import sys

import pytest

from shapehom.cli import (EXIT_INVALID, EXIT_IO, EXIT_OK, ConfigError, RunConfig, build_parser,
                          config_from_args, load_mesh, main, parse_order)

COARSE = "disk:1:0.25"


def test_config_json_round_trip():
    cfg = RunConfig(command="pareto", order=3, strategy="agile-adaptive", deltas=[0.0, 0.2],
                    deterministic=True)
    again = RunConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"colour": "red"})


@pytest.mark.parametrize("bad", [
    {"order": 6}, {"order": -1}, {"strategy": "fast"}, {"strategy": "agile", "order": 0},
    {"strategy": "agile", "order": "secant"}, {"tol_start": 0.0}, {"deltas": [0.5]},
    {"dmax": -1.0}, {"dt0": 0.0}, {"alpha": -0.1}, {"f_target": "banana"}, {"btau": "full"},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad).validate()


def test_parse_order():
    assert parse_order("3") == 3
    assert parse_order("secant") == "secant"


def test_flags_override_config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"order": 1, "alpha": 0.05, "strategy": "agile"}))
    args = build_parser().parse_args(["homotopy", "--config", str(path), "--order", "3"])
    cfg = config_from_args(args)
    assert cfg.order == 3 and cfg.alpha == 0.05 and cfg.strategy == "agile"


def test_lambda_flag(tmp_path):
    cfg = config_from_args(build_parser().parse_args(["newton", "--lambda", "0.5"]))
    assert cfg.lam == 0.5 and cfg.mesh == "disk:1:0.04"


def test_load_mesh_disk_spec():
    m = load_mesh(COARSE)
    assert m.n_boundary == 24


def test_order_out_of_range_exits_2(tmp_path, capsys):
    assert main(["homotopy", "--order", "9", "--out", str(tmp_path)]) == EXIT_INVALID
    assert "order" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    assert main(["homotopy", "--config", str(path), "--out", str(tmp_path)]) == EXIT_INVALID


def test_missing_mesh_file_exits_4(tmp_path):
    rc = main(["homotopy", "--mesh", str(tmp_path / "nope.mesh"), "--out", str(tmp_path)])
    assert rc == EXIT_IO


def test_mismatched_start_exits_2(tmp_path, capsys):
    rc = main(["homotopy", "--mesh", COARSE, "--f-start", "disk{r=2}", "--out", str(tmp_path)])
    assert rc == EXIT_INVALID
    assert "warning" in capsys.readouterr().err


def test_bad_thread_count_exits_2(tmp_path, monkeypatch):
    monkeypatch.setenv("SHAPEHOM_THREADS", "zero")
    assert main(["demo-scalar", "--out", str(tmp_path)]) == EXIT_INVALID


def test_demo_scalar_outputs(tmp_path):
    assert main(["demo-scalar", "--out", str(tmp_path)]) == EXIT_OK
    for name in ("trace_0.csv", "trace_secant.csv", "trace_1.csv", "trace_2.csv", "scalar.svg",
                 "config.json"):
        assert (tmp_path / name).exists(), name
    assert (tmp_path / "scalar.svg").read_text().startswith("<svg")


def test_newton_outputs(tmp_path):
    rc = main(["newton", "--mesh", COARSE, "--out", str(tmp_path)])
    assert rc == EXIT_OK
    for name in ("residuals.csv", "residuals.svg", "before.mesh", "after.mesh"):
        assert (tmp_path / name).exists(), name


def _homotopy(out, *extra):
    return main(["homotopy", "--mesh", COARSE, "--f-target", "ellipse{a=1.25}", "--order", "2",
                 "--strategy", "agile", "--out", str(out), *extra])


def test_homotopy_outputs(tmp_path):
    assert _homotopy(tmp_path) == EXIT_OK
    for name in ("trace.csv", "path.csv", "path.svg", "derivatives.csv", "final.mesh"):
        assert (tmp_path / name).exists(), name
    steps = sorted(tmp_path.glob("step_*_t_*.mesh"))
    assert any(s.name.endswith("_t_1.0000000000.mesh") for s in steps)
    header = (tmp_path / "derivatives.csv").read_text().splitlines()[0].split(",")
    assert header == ["step", "t", "norm_1", "norm_2", "norm_3", "dt_order_1", "dt_order_2"]


def test_deterministic_runs_are_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _homotopy(a, "--deterministic") == EXIT_OK
    assert _homotopy(b, "--deterministic") == EXIT_OK
    for name in ("trace.csv", "path.csv", "derivatives.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "shapehom", "demo-scalar", "--order", "1",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
    assert (tmp_path / "trace_1.csv").exists()
