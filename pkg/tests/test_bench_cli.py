import csv
import json
import math
import subprocess
import sys

import pytest

from geoslice.bench_cli import (
    CSV_HEADER,
    ConfigError,
    main,
    meta_path,
    mix_seed,
    parse_config_text,
    run_experiment,
)

WALL = CSV_HEADER.index("wall_time_s")


def write_config(tmp_path, body, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(body, indent=2))
    return p


def small(tmp_path, **over):
    cfg = {
        "manifold": {"kind": "stiefel", "n": 5, "k": 2},
        "target": {"family": "varying_n"},
        "sampler": {"name": "gss", "w": 1.0},
        "n_steps": 50,
        "n_repetitions": 2,
        "master_seed": 11,
        "output_path": str(tmp_path / "out.csv"),
    }
    cfg.update(over)
    return cfg


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_minimal_config_defaults():
    cfg = parse_config_text(json.dumps({
        "manifold": {"kind": "stiefel", "n": 5, "k": 2},
        "target": {"family": "varying_n"},
        "sampler": {"name": "gss"},
    }))
    assert cfg.m == 1 and cfg.max_shrink_attempts == 10_000
    assert cfg.w == pytest.approx(2 * math.pi)
    assert (cfg.n_steps, cfg.n_repetitions, cfg.master_seed) == (20_000, 10, 0)
    assert cfg.h_a == 0.01 and cfg.adapt


def test_unknown_key_is_named():
    text = json.dumps({
        "manifold": {"kind": "stiefel", "n": 5, "k": 2},
        "target": {"family": "varying_n"},
        "sampler": {"name": "gss", "stepwidth": 2.0},
    }, indent=2)
    with pytest.raises(ConfigError, match="stepwidth.*line 12"):
        parse_config_text(text)


def test_ignored_lambda_warns(caplog):
    cfg = parse_config_text(json.dumps({
        "manifold": {"kind": "stiefel", "n": 5, "k": 2},
        "target": {"family": "varying_n", "lambda": 3.0},
        "sampler": {"name": "gss"},
    }))
    assert cfg.warnings and cfg.lam is None
    assert "ignored" in caplog.text


@pytest.mark.parametrize("mutate", [
    lambda c: c["sampler"].update(name="rmh") or c["manifold"].update(kind="grassmann"),
    lambda c: c["sampler"].update(name="geomala"),
    lambda c: c["target"].update(family="anisotropy"),
    lambda c: c["sampler"].update(m=[1, 0]),
    lambda c: c.update(n_steps=5),
    lambda c: c.update(master_seed=-1),
    lambda c: c["manifold"].update(k=5),
])
def test_invalid_configs(tmp_path, mutate):
    c = small(tmp_path)
    mutate(c)
    with pytest.raises(ConfigError):
        parse_config_text(json.dumps(c))


def test_bad_json_reports_position():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text('{\n  "manifold": ,\n}')


def test_sweep_order(tmp_path):
    c = small(tmp_path)
    c["sampler"].update(w=[1.0, 5.0], m=[1, 3])
    pts = parse_config_text(json.dumps(c)).points()
    assert [(p["m"], p["w"]) for p in pts] == [(1, 1.0), (1, 5.0), (3, 1.0), (3, 5.0)]


def test_mix_seed_known_values():
    # SplitMix64 reference outputs for state 0: the first draws of the
    # published generator.
    assert mix_seed(0, 0) == 0xE220A8397B1DCDAF
    assert mix_seed(0, 1) == 0x6E789E6AA1B965F4
    assert len({mix_seed(5, r) for r in range(100)}) == 100


def test_one_rep_one_summary_and_reproducible(tmp_path):
    c = small(tmp_path, n_steps=10, n_repetitions=1)
    path = write_config(tmp_path, c)
    assert main(["--config", str(path), "--quiet"]) == 0
    rows = read_rows(c["output_path"])
    assert rows[0] == CSV_HEADER
    assert len(rows) == 3 and rows[1][9] == "0" and rows[2][9] == "summary"
    first = [r[:WALL] + r[WALL + 1:] for r in rows]
    assert main(["--config", str(path), "--quiet"]) == 0
    again = [r[:WALL] + r[WALL + 1:] for r in read_rows(c["output_path"])]
    assert first == again
    for r in read_rows(c["output_path"])[1:]:
        assert float(r[WALL]) >= 0


def test_meta_sidecar(tmp_path):
    c = small(tmp_path)
    cfg = parse_config_text(json.dumps(c))
    assert run_experiment(cfg) == 0
    meta = json.loads(meta_path(c["output_path"]).read_text())
    assert meta["per_run_seeds"] == [mix_seed(11, 0), mix_seed(11, 1)]
    assert meta["config"]["n"] == 5 and meta["build"]["version"]
    assert len(meta["final_states"]) == 2
    assert meta["summaries"][0]["n_samples"] == 2


def test_cli_overrides(tmp_path):
    c = small(tmp_path)
    path = write_config(tmp_path, c)
    other = tmp_path / "other.csv"
    assert main(["--config", str(path), "--output", str(other), "--seed", "3", "--quiet"]) == 0
    meta = json.loads(meta_path(other).read_text())
    assert meta["per_run_seeds"][0] == mix_seed(3, 0)


def test_workers_do_not_change_rows(tmp_path):
    c = small(tmp_path)
    cfg = parse_config_text(json.dumps(c))
    run_experiment(cfg, workers=1)
    serial = [r[:WALL] + r[WALL + 1:] for r in read_rows(c["output_path"])]
    run_experiment(cfg, workers=2)
    parallel = [r[:WALL] + r[WALL + 1:] for r in read_rows(c["output_path"])]
    assert serial == parallel


def test_all_samplers_run(tmp_path):
    for kind, fam, lam, name in [("stiefel", "anisotropy", 10.0, "rmh"),
                                 ("stiefel", "varying_n", None, "geormh"),
                                 ("grassmann", "grassmann_variance", 2.0, "geomala"),
                                 ("sphere", "sphere_vmf", 2.0, "gss")]:
        c = small(tmp_path)
        c["manifold"] = {"kind": kind, "n": 3 if kind == "sphere" else 5, "k": 1 if kind == "sphere" else 2}
        c["target"] = {"family": fam} if lam is None else {"family": fam, "lambda": lam}
        c["sampler"] = {"name": name}
        assert run_experiment(parse_config_text(json.dumps(c))) == 0, name
        rows = read_rows(c["output_path"])
        assert rows[1][0] == name and len(rows) == 4


def test_exit_code_config_error(tmp_path, capsys):
    c = small(tmp_path)
    c["sampler"]["stepwidth"] = 1
    assert main(["--config", str(write_config(tmp_path, c))]) == 2
    assert "stepwidth" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.json")]) == 2


def test_exit_code_runtime_error(tmp_path):
    c = small(tmp_path)
    c["manifold"] = {"kind": "stiefel", "n": 30, "k": 2}
    c["target"] = {"family": "anisotropy", "lambda": 100.0}
    c["sampler"] = {"name": "gss", "w": 6.0, "max_shrink_attempts": 1}
    assert main(["--config", str(write_config(tmp_path, c)), "--quiet"]) == 3
    meta = json.loads(meta_path(c["output_path"]).read_text())
    assert meta["errors"]


def test_module_entry_point(tmp_path):
    c = small(tmp_path, n_steps=10, n_repetitions=1)
    path = write_config(tmp_path, c)
    proc = subprocess.run([sys.executable, "-m", "geoslice", "--config", str(path), "--quiet"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
