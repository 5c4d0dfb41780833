import csv
import json
import os
import subprocess
import sys

import pytest

from ihsim.cli import main
from ihsim.errors import ValidationError
from ihsim.harness import (
    HARVEST_COLUMNS,
    HARVEST_PATTERN_COLUMNS,
    LOS_COLUMNS,
    PROTOCOL_COLUMNS,
    SE_COLUMNS,
    SECRECY_COLUMNS,
    ExperimentResult,
    config_from_dict,
    load_config,
    run_experiment,
    save_config,
)
from ihsim.harness.experiments import thread_count
from ihsim.protocol import TRACE_COLUMNS

# small but complete runs of every experiment
QUICK = {
    "los": {"trials": 200, "sweep.ocr": [0.0, 0.3], "sweep.d_m": [1.0, 5.0]},
    "harvest": {"trials": 30, "sweep.ocr": [0.0, 0.5], "sweep.k": [1, 4], "harvest.patterns": 5},
    "se": {"trials": 20, "sweep.ocr": [0.0, 0.9], "sweep.k": [1, 2, 32]},
    "protocol": {"trials": 2, "protocol.frames": 120, "protocol.fault_rates": [0.0, 0.05]},
    "secrecy": {"trials": 300},
}

SCHEMAS = {
    "los": LOS_COLUMNS,
    "harvest": HARVEST_COLUMNS,
    "se": SE_COLUMNS,
    "protocol": PROTOCOL_COLUMNS,
    "secrecy": SECRECY_COLUMNS,
}


def header(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return tuple(next(csv.reader(fh)))


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_defaults_follow_table_1():
    cfg = config_from_dict({})
    assert cfg.total_power_dbm == 10.0
    assert cfg.n_tx == 64
    assert (cfg.d_info, cfg.d_energy) == (20.0, 1.0)
    assert cfg.element_spacing == 0.5
    assert cfg.carrier_freq == 2e9
    assert cfg.array_gain_dbi == 15.0
    assert cfg.angle_offset_sigma == 2.0
    assert cfg.shadow_sigma_db == 8.0
    assert cfg.subcarrier_bw == 15e3
    assert cfg.sweep_ocr[0] == 0.0 and cfg.sweep_ocr[-1] == 0.9
    assert cfg.radius_m == (0.3, 0.6)
    assert cfg.height_m == (5.0, 25.0)


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    assert load_config(p) == config_from_dict({})


def test_round_trip(tmp_path):
    cfg = config_from_dict({"experiment": "se", "seed": 99, "sweep.k": [1, 2], "obstacle.ocr": 0.4})
    p = tmp_path / "c.json"
    save_config(cfg, p)
    again = load_config(p)
    assert again == cfg
    save_config(again, tmp_path / "d.json")
    assert (tmp_path / "d.json").read_text() == p.read_text()


@pytest.mark.parametrize(
    "data,field",
    [
        ({"obstacle.ocr": 1.2}, "obstacle.ocr"),
        ({"sweep.ocr": [0.2, 1.2]}, "sweep.ocr"),
        ({"trials": 0}, "trials"),
        ({"sweep.k": []}, "sweep.k"),
        ({"sweep.k": [65]}, "sweep.k"),
        ({"seed": -1}, "seed"),
        ({"no.such.key": 1}, "no.such.key"),
    ],
)
def test_rejection_names_field(data, field):
    with pytest.raises(ValidationError) as info:
        config_from_dict(data)
    assert field in info.value.fields


def test_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ValidationError):
        load_config(p)


def test_result_table():
    r = ExperimentResult(("a", "b"))
    r.add(1, 0.1234567891)
    r.add(True, None)
    assert r.to_csv() == "a,b\n1,0.123457\n1,\n"
    with pytest.raises(ValueError):
        r.add(1)


def quick_cfg(name, seed=5):
    return config_from_dict({"experiment": name, "seed": seed, **QUICK[name]})


@pytest.mark.parametrize("name", list(QUICK))
def test_schema_lock_and_determinism(name, tmp_path):
    a = run_experiment(quick_cfg(name), tmp_path / "a" / f"{name}.csv")
    b = run_experiment(quick_cfg(name), tmp_path / "b" / f"{name}.csv")
    assert header(a[0]) == SCHEMAS[name]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    if name == "harvest":
        assert header(a[1]) == HARVEST_PATTERN_COLUMNS
    if name == "protocol":
        assert all(header(p) == TRACE_COLUMNS for p in a[1:])
        assert {p.name.split(".trace.")[1] for p in a[1:]} == {"golden.csv", "rate0.0.csv", "rate0.05.csv"}


def test_different_seed_changes_output(tmp_path):
    a = run_experiment(quick_cfg("los", 1), tmp_path / "a.csv")[0]
    b = run_experiment(quick_cfg("los", 2), tmp_path / "b.csv")[0]
    assert a.read_bytes() != b.read_bytes()


def test_row_counts_match_sweep(tmp_path):
    out = run_experiment(quick_cfg("los"), tmp_path / "los.csv")[0]
    assert len(rows(out)) == 4
    out = run_experiment(quick_cfg("se"), tmp_path / "se.csv")[0]
    assert len(rows(out)) == 6
    est = {r["k"]: r["estimator"] for r in rows(out)}
    assert est == {"1": "mi", "2": "mi", "32": "weighted_bound"}


def test_every_statistic_has_uncertainty(tmp_path):
    out = run_experiment(quick_cfg("los"), tmp_path / "los.csv")[0]
    assert all(r["se"] != "" for r in rows(out))
    out = run_experiment(quick_cfg("secrecy"), tmp_path / "s.csv")[0]
    for r in rows(out):
        assert r["ir_bit_se"] != "" and r["eve_bit_se"] != ""


def test_thread_count_env(monkeypatch, tmp_path):
    monkeypatch.setenv("IHSIM_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("IHSIM_THREADS", "0")
    assert thread_count() == (os.cpu_count() or 1)
    monkeypatch.setenv("IHSIM_THREADS", "-2")
    with pytest.raises(ValidationError):
        thread_count()


def test_thread_count_does_not_change_output(monkeypatch, tmp_path):
    monkeypatch.setenv("IHSIM_THREADS", "1")
    a = run_experiment(quick_cfg("harvest"), tmp_path / "a.csv")
    monkeypatch.setenv("IHSIM_THREADS", "4")
    b = run_experiment(quick_cfg("harvest"), tmp_path / "b.csv")
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


# -- CLI -------------------------------------------------------------------------


def write_cfg(tmp_path, data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return str(p)


def test_cli_success(tmp_path):
    out = tmp_path / "los.csv"
    code = main(["los", "--config", write_cfg(tmp_path, {}), "--seed", "3", "--out", str(out),
                 "--trials", "50", "--ocr", "0.1,0.2", "--d", "1,2,3"])
    assert code == 0
    got = rows(out)
    assert len(got) == 6
    assert {r["ocr"] for r in got} == {"0.1", "0.2"}


def test_cli_overrides_are_deterministic(tmp_path):
    args = ["--seed", "0xFFFFFFFFFFFFFFFF", "--trials", "20", "--k", "1,3", "--ocr", "0.3"]
    assert main(["se", "--out", str(tmp_path / "a.csv"), *args]) == 0
    assert main(["se", "--out", str(tmp_path / "b.csv"), *args]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.parametrize(
    "extra",
    [["--ocr", "1.2"], ["--k", "0"], ["--trials", "0"]],
)
def test_cli_validation_exit_2(tmp_path, extra):
    assert main(["los", "--seed", "1", "--out", str(tmp_path / "x.csv"), *extra]) == 2
    assert not (tmp_path / "x.csv").exists()


def test_cli_bad_config_file_exit_2(tmp_path):
    assert main(["los", "--config", write_cfg(tmp_path, {"obstacle.ocr": 1.2}), "--seed", "1",
                 "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["los", "--config", str(tmp_path / "missing.json"), "--seed", "1",
                 "--out", str(tmp_path / "x.csv")]) == 2


def test_cli_guard_exit_3(tmp_path):
    cfg = write_cfg(tmp_path, {"secrecy.n_tx": 64, "secrecy.k": 8})
    assert main(["secrecy", "--config", cfg, "--seed", "1", "--out", str(tmp_path / "x.csv"),
                 "--trials", "5"]) == 3


def test_cli_bad_threads_exit_2(tmp_path, monkeypatch):
    monkeypatch.setenv("IHSIM_THREADS", "lots")
    assert main(["los", "--seed", "1", "--trials", "5", "--out", str(tmp_path / "x.csv")]) == 2


def test_cli_module_entry_point(tmp_path):
    out = tmp_path / "p.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "ihsim", "secrecy", "--seed", "9", "--trials", "50", "--out", str(out)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert header(out) == SECRECY_COLUMNS
    bad = subprocess.run(
        [sys.executable, "-m", "ihsim", "los", "--seed", "1", "--ocr", "2", "--out", str(out)],
        capture_output=True, text=True, check=False,
    )
    assert bad.returncode == 2
    assert "sweep.ocr" in bad.stderr
