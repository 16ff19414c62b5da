"""End-to-end driver tests on tiny meshes.

These exercise the whole artifact contract: CSV layout, config layering
and validation exit codes, determinism of monitors.csv, the failure
marker, sweep orders, and figure rendering.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from mimswe import cli
from mimswe.geometry import build_mesh
from mimswe.swe import default_viscosity
import mimswe.testcases as tcs


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _days(steps, dt):
    return steps * dt / 86400.0


def test_rest_smoke_run_mass_exact(tmp_path):
    out = tmp_path / "rest"
    code = cli.main([
        "--testcase", "rest", "--p", "2", "--ne", "2", "--dt", "120",
        "--days", repr(_days(10, 120.0)), "--out", str(out),
    ])
    assert code == 0
    header, body = _read_csv(out / "monitors.csv")
    assert header == cli.MONITOR_COLUMNS
    assert [row[0] for row in body] == ["0", "10"]
    mass = [abs(float(row[header.index("mass_rel_err")])) for row in body]
    assert all(m <= 1e-13 for m in mass)
    for name in ("config.txt", "run.json", "snap_0.csv", "snap_10.csv", "errors.csv"):
        assert (out / name).exists()
    assert not (out / "FAILED").exists()
    summary = json.loads((out / "run.json").read_text())
    assert summary["status"] == "ok"
    assert summary["steps"] == 10
    assert summary["c0"] == 0.0
    assert summary["final"]["step"] == 10


def test_tc2_run_artifacts(tmp_path):
    out = tmp_path / "tc2"
    code = cli.main([
        "--testcase", "tc2", "--p", "2", "--ne", "2", "--dt", "300",
        "--days", repr(_days(2, 300.0)), "--alpha", repr(math.pi / 4),
        "--monitor-interval", "1", "--out", str(out),
    ])
    assert code == 0
    header, body = _read_csv(out / "monitors.csv")
    assert [row[0] for row in body] == ["0", "1", "2"]
    eheader, ebody = _read_csv(out / "errors.csv")
    assert eheader == cli.ERROR_COLUMNS
    assert len(ebody) == 3
    errs = np.array([[float(v) for v in row] for row in ebody])
    assert np.all(np.isfinite(errs))
    assert np.all(errs[:, 2:] > 0.0)
    sheader, sbody = _read_csv(out / "snap_0.csv")
    assert sheader == cli.SNAPSHOT_COLUMNS
    mesh = build_mesh(2, 2)
    assert len(sbody) == mesh.n_elem * mesh.spaces.quad_w.size
    summary = json.loads((out / "run.json").read_text())
    assert summary["final_errors"]["h_L2"] > 0.0


def test_snapshot_dedup(tmp_path):
    out = tmp_path / "dedup"
    code = cli.main([
        "--testcase", "rest", "--p", "2", "--ne", "2", "--dt", "120",
        "--days", repr(_days(1, 120.0)), "--out", str(out), "--dedup-snapshots",
    ])
    assert code == 0
    _, sbody = _read_csv(out / "snap_0.csv")
    assert len(sbody) == build_mesh(2, 2).n_W


def test_config_file_layering(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# comment line\n"
        "testcase = rest\n"
        "p = 2\n"
        "ne = 2\n"
        "dt = 150\n"
        "days = 0.001\n"
    )
    config = cli.parse_config(file=str(cfg), overrides={"dt": 120.0})
    assert config.testcase == "rest"
    assert config.dt == 120.0
    assert config.p == 2

    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense_key = 3\n")
    with pytest.raises(cli.ConfigError, match="nonsense_key"):
        cli.parse_config(file=str(bad))
    worse = tmp_path / "worse.cfg"
    worse.write_text("p three\n")
    with pytest.raises(cli.ConfigError, match="key = value"):
        cli.parse_config(file=str(worse))


def test_config_echo_is_reusable(tmp_path):
    out = tmp_path / "echo"
    code = cli.main([
        "--testcase", "rest", "--p", "1", "--ne", "2", "--dt", "100",
        "--days", repr(_days(1, 100.0)), "--out", str(out),
    ])
    assert code == 0
    config = cli.parse_config(file=str(out / "config.txt"))
    assert config.testcase == "rest"
    assert config.p == 1
    assert config.dt == 100.0


@pytest.mark.parametrize("argv", [
    ["--ne", "0"],
    ["--p", "0"],
    ["--p", "17"],
    ["--dt", "-5"],
    ["--days", "0"],
    ["--testcase", "tc5"],
    ["--testcase", "tc6", "--alpha", "0.3"],
    ["--c0", "-1"],
    ["--c0", "sometimes"],
    ["--sweep", "4,8"],
    ["--sweep", "ne=8,4"],
    ["--sweep", "ne=4,8", "--testcase", "galewsky"],
    ["--monitor-interval", "0"],
])
def test_invalid_config_exits_2(argv, capsys):
    assert cli.main(argv) == 2
    assert "config error" in capsys.readouterr().err


def test_c0_resolution():
    mesh = build_mesh(2, 2)
    assert cli._resolve_c0("case", tcs.testcase("tc2"), mesh) == 0.0
    assert cli._resolve_c0("case", tcs.testcase("tc6"), mesh) == default_viscosity(mesh)
    assert cli._resolve_c0("auto", tcs.testcase("tc2"), mesh) == default_viscosity(mesh)
    assert cli._resolve_c0("2.5e8", tcs.testcase("tc2"), mesh) == 2.5e8


def test_monitors_are_deterministic(tmp_path):
    argv = ["--testcase", "tc2", "--p", "2", "--ne", "2", "--dt", "240",
            "--days", repr(_days(4, 240.0)), "--monitor-interval", "2"]
    assert cli.main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(argv + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "monitors.csv").read_bytes()
    b = (tmp_path / "b" / "monitors.csv").read_bytes()
    assert a == b


def test_seventeen_digit_serialization(tmp_path):
    out = tmp_path / "digits"
    assert cli.main([
        "--testcase", "tc2", "--p", "2", "--ne", "2", "--dt", "240",
        "--days", repr(_days(1, 240.0)), "--out", str(out),
    ]) == 0
    header, body = _read_csv(out / "errors.csv")
    value = body[-1][header.index("h_L2")]
    # full precision survives a parse round trip
    assert "%.17g" % float(value) == value
    assert len(value.replace("-", "").replace(".", "").split("e")[0]) >= 15


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_failure_writes_marker_and_exit_3(tmp_path, capsys):
    out = tmp_path / "blowup"
    code = cli.main([
        "--testcase", "tc2", "--p", "2", "--ne", "2", "--dt", "1000000",
        "--days", repr(_days(30, 1000000.0)), "--monitor-interval", "1",
        "--out", str(out),
    ])
    assert code == 3
    assert (out / "FAILED").exists()
    assert (out / "monitors.csv").exists()
    summary = json.loads((out / "run.json").read_text())
    assert summary["status"] == "failed"
    assert summary["detail"]
    # a later successful run in the same directory clears the marker
    code = cli.main([
        "--testcase", "rest", "--p", "1", "--ne", "2", "--dt", "100",
        "--days", repr(_days(1, 100.0)), "--out", str(out),
    ])
    assert code == 0
    assert not (out / "FAILED").exists()


def test_cfl_warning(tmp_path, capsys):
    out = tmp_path / "cfl"
    code = cli.main([
        "--testcase", "rest", "--p", "2", "--ne", "2", "--dt", "20000",
        "--days", repr(_days(1, 20000.0)), "--out", str(out),
    ])
    assert code == 0
    assert "CFL" in capsys.readouterr().err


def test_sweep_writes_orders(tmp_path):
    out = tmp_path / "sweep"
    code = cli.main([
        "--testcase", "tc2", "--p", "2", "--ne", "2", "--dt", "600",
        "--days", repr(_days(3, 600.0)), "--alpha", repr(math.pi / 4),
        "--sweep", "ne=2,4", "--out", str(out),
    ])
    assert code == 0
    assert (out / "ne2" / "monitors.csv").exists()
    assert (out / "ne4" / "monitors.csv").exists()
    # time step scales with resolution
    cfg = cli.parse_config(file=str(out / "ne4" / "config.txt"))
    assert cfg.dt == 300.0
    header, body = _read_csv(out / "orders.csv")
    assert header[:2] == ["quantity", "norm"]
    assert len(body) == 9
    by_key = {(row[0], row[1]): row for row in body}
    h_l2 = by_key[("h", "L2")]
    assert (h_l2[2], h_l2[3]) == ("2", "4")
    assert float(h_l2[4]) > float(h_l2[5]) > 0.0
    assert float(h_l2[6]) > 1.0


def test_report_renders_figures(tmp_path):
    out = tmp_path / "run"
    assert cli.main([
        "--testcase", "tc2", "--p", "2", "--ne", "2", "--dt", "300",
        "--days", repr(_days(2, 300.0)), "--out", str(out),
    ]) == 0
    assert cli.main(["--report", str(out)]) == 0
    for name in ("monitors.png", "errors.png", "snap_0.png", "snap_2.png"):
        assert (out / name).exists()
    assert cli.main(["--report", str(tmp_path / "missing")]) == 2


def test_report_orders_figure(tmp_path):
    out = tmp_path / "sweeporders"
    assert cli.main([
        "--testcase", "tc2", "--p", "1", "--ne", "2", "--dt", "600",
        "--days", repr(_days(2, 600.0)), "--sweep", "ne=2,4", "--out", str(out),
    ]) == 0
    assert cli.main(["--report", str(out)]) == 0  # sweep root holds orders.csv
    assert (out / "orders.png").exists()
    assert cli.main(["--report", str(out / "ne2")]) == 0
