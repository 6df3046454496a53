import csv
import time
from pathlib import Path

import pytest

from p2ptv.cli import main
from p2ptv.config import ScenarioConfig
from p2ptv.experiment import SweepSpec, derive_seed, run_scenario, run_sweep, simulate
from p2ptv.metrics import SNAPSHOT_HEADER, SWEEP_HEADER

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def tiny(**changes):
    cfg = ScenarioConfig(peers=30, superpeers=2, sources=1, duration=80.0, seed=11)
    return cfg.replace(**changes).validate()


def test_same_seed_gives_byte_identical_outputs(tmp_path):
    a = run_scenario(tiny(), tmp_path / "a", event_log=True)
    b = run_scenario(tiny(), tmp_path / "b", event_log=True)
    names = sorted(p.name for p in a.files)
    assert names == sorted(p.name for p in b.files)
    assert "events.log" in names and "snapshots.csv" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_different_seed_changes_outputs(tmp_path):
    run_scenario(tiny(), tmp_path / "a")
    run_scenario(tiny(seed=12), tmp_path / "b")
    assert (tmp_path / "a" / "snapshots.csv").read_bytes() != (tmp_path / "b" / "snapshots.csv").read_bytes()


def test_run_shorter_than_first_epoch_writes_header_only(tmp_path):
    result = run_scenario(tiny(duration=0.5), tmp_path)
    lines = (tmp_path / "snapshots.csv").read_text().splitlines()
    assert lines == [",".join(SNAPSHOT_HEADER)]
    assert result.summary is None


def test_fifty_peer_smoke_run_is_fast(tmp_path):
    started = time.perf_counter()
    run_scenario(ScenarioConfig(peers=50, superpeers=2, sources=1, duration=200.0), tmp_path)
    assert time.perf_counter() - started < 5.0


def test_trace_files_follow_trace_count(tmp_path):
    result = run_scenario(tiny(trace_count=4), tmp_path)
    traces = sorted(tmp_path.glob("trace_*.csv"))
    assert len(traces) == 4 == len(result.traces)
    with open(traces[0], newline="") as fh:
        assert next(csv.reader(fh)) == ["time", "dg", "ug_per_conn", "n_in", "n_out"]


def test_seed_derivation_is_stable_and_distinct():
    assert derive_seed(1, 0, 0) == derive_seed(1, 0, 0)
    seeds = {derive_seed(1, p, r) for p in range(10) for r in range(10)}
    assert len(seeds) == 100
    assert all(0 <= s < 2**64 for s in seeds)


def test_sweep_row_count_and_order(tmp_path):
    spec = SweepSpec("peer_R", (1.0, 0.9, 0.8, 0.7), 5, tiny(duration=20.0))
    rows = run_sweep(spec, out_path=tmp_path / "sweep.csv")
    assert len(rows) == 20
    assert [(r.param_value, r.replication) for r in rows] == [(v, k) for v in spec.values for k in range(5)]
    with open(tmp_path / "sweep.csv", newline="") as fh:
        table = list(csv.reader(fh))
    assert table[0] == SWEEP_HEADER and len(table) == 21


def test_sweep_point_reruns_in_isolation():
    spec = SweepSpec("N", (2, 4, 8, 16), 1, tiny(duration=30.0))
    rows = run_sweep(spec)
    assert len({r.param_value for r in rows}) == 4
    third = rows[2]
    assert third.seed == derive_seed(spec.base.seed, 2, 0)
    again = simulate(spec.config_for(8, third.seed))
    assert again.summary.mean_dg == third.mean_dg


def test_sweep_rows_independent_of_workers():
    spec = SweepSpec("sources", (1, 2), 2, tiny(duration=20.0))
    assert run_sweep(spec, workers=1) == run_sweep(spec, workers=2)


def test_failed_point_is_recorded_and_sweep_continues(tmp_path):
    # N = 0 fails validation for that point only
    spec = SweepSpec("N", (0, 4), 1, tiny(duration=20.0))
    rows = run_sweep(spec, out_path=tmp_path / "sweep.csv")
    assert rows[0].error and rows[1].error is None
    text = (tmp_path / "sweep.csv").read_text()
    assert "ERROR: ValidationError" in text


def test_unknown_sweep_param_rejected():
    with pytest.raises(ValueError):
        SweepSpec("dg_max", (1,), 1, tiny())


# -- command line ----------------------------------------------------------


def test_cli_run_writes_outputs(tmp_path, capsys):
    code = main(["run", "--config", str(CONFIGS / "smoke.ini"), "--seed", "4", "--out", str(tmp_path), "--trace", "3"])
    assert code == 0
    assert (tmp_path / "snapshots.csv").exists()
    assert len(list(tmp_path.glob("trace_*.csv"))) == 3
    assert "mean_dg=" in capsys.readouterr().out


def test_cli_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--config", str(CONFIGS / "smoke.ini"), "--param", "N", "--values", "2,4", "--reps", "2", "--out", str(out)])
    assert code == 0
    assert len(out.read_text().splitlines()) == 5


def test_cli_reports_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nsources = 0\n")
    code = main(["run", "--config", str(bad), "--out", str(tmp_path)])
    err = capsys.readouterr().err.strip().splitlines()
    assert code != 0
    assert len(err) == 1 and err[0].startswith("error: ValidationError:")


def test_cli_reports_missing_file(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "nope.ini")])
    assert code != 0
    assert capsys.readouterr().err.startswith("error: FileNotFoundError:")
