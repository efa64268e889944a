import json

import numpy as np
import pytest

from mfpolaron import cli
from mfpolaron.config import ConfigError, ExperimentConfig, load_config, parse_config
from mfpolaron.fields import make_grid
from mfpolaron.io import COMPARE_HEADER, RUN_HEADER, SWEEP_HEADER, read_csv, read_snapshot, write_csv, write_snapshot
from mfpolaron.selftest import run_selftest

SMALL = """\
grid:
  n: 16
  L: 16.0
T0: 0.1
eps: [0.2, 0.1, 0.05]
"""


def write_cfg(tmp_path, text=SMALL, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def header_of(path):
    return path.read_text().splitlines()[0]


# ------------------------------------------------------------------ config


def test_defaults_validate():
    cfg = ExperimentConfig().validate()
    assert cfg.grid.n == 32 and cfg.grid.L == 16.0 and cfg.s == 2.0
    assert cfg.eps == [0.2, 0.1, 0.05, 0.025] and cfg.kick == "plain"


def test_parse_small():
    cfg = parse_config(SMALL)
    assert cfg.grid.n == 16 and cfg.T0 == 0.1 and cfg.eps == [0.2, 0.1, 0.05]
    assert parse_config("") == ExperimentConfig()


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("T0: 1.0\nbogus: 3\n", 2, "unknown key 'bogus'"),
        ("grid:\n  n: 16\n  size: 3\n", 3, "unknown key 'size'"),
        ("grid:\n  n: 7\n", 2, "n must be even >= 8"),
        ("T0: 1.0\neps: [0.1, 0.2, 0.05]\n", 2, "strictly decreasing"),
        ("eps: [0.1, -0.1]\n", 1, "positive"),
        ("s: 1.0\n", 1, "[2, 4]"),
        ("T0: fast\n", 1, "expected a number"),
        ("kick: sideways\n", 1, "kick"),
        ("preparation:\n  mode: medium\n", 2, "mode"),
    ],
)
def test_schema_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    msg = str(info.value)
    assert msg.startswith(f"line {line}:"), msg
    assert fragment in msg


def test_malformed_yaml():
    with pytest.raises(ConfigError, match="line"):
        parse_config("grid: [1, 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        parse_config("- 1\n- 2\n")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")


# ------------------------------------------------------------------ io


def test_csv_round_trip(tmp_path):
    rows = [(0.1, 1 / 3, np.pi, True, 1e-300, 7)]
    p = write_csv(tmp_path / "x.csv", SWEEP_HEADER, rows)
    header, data = read_csv(p)
    assert header == list(SWEEP_HEADER)
    assert data[0, 1] == 1 / 3 and data[0, 2] == np.pi and data[0, 4] == 1e-300
    with pytest.raises(ValueError):
        write_csv(tmp_path / "y.csv", SWEEP_HEADER, [(1, 2)])


def test_snapshot_round_trip(tmp_path):
    g = make_grid(8, 3.0)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    v = rng.standard_normal(g.shape)
    p = write_snapshot(tmp_path / "s.bin", g, 0.25, 0.1, {"u": u, "v": v})
    first = p.read_bytes().split(b"\n", 1)[0].decode()
    assert first == "MFPSNAP1 n=8 L=3 t=0.25 eps=0.10000000000000001 fields=u:complex,v:real"
    snap = read_snapshot(p)
    assert snap["n"] == 8 and snap["t"] == 0.25 and snap["eps"] == 0.1
    assert np.array_equal(snap["fields"]["u"], u) and np.array_equal(snap["fields"]["v"], v)
    # raw layout: little-endian float64, complex interleaved re/im
    raw = np.frombuffer(p.read_bytes()[len(first) + 1 :], dtype="<f8")
    assert raw[0] == u.flat[0].real and raw[1] == u.flat[0].imag


# ------------------------------------------------------------------ cli


def test_empty_args_print_usage(capsys):
    assert cli.main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_run_writes_exact_header(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--eps", "0.1", "--out", str(out), "--snapshots"]) == 0
    csv = out / "run_eps0.10000000000000001.csv"
    assert header_of(csv) == "t,mass,Xs_norm_u,Y_norm_v,Y_norm_w,energy"
    header, data = read_csv(csv)
    assert header == list(RUN_HEADER) and data.shape == (6, 6)
    snap = read_snapshot(next(out.glob("snapshot_*.bin")))
    assert set(snap["fields"]) == {"u", "v", "w"}


@pytest.mark.parametrize("eps", ["0", "-0.1"])
def test_run_rejects_nonpositive_eps(tmp_path, eps):
    cfg = write_cfg(tmp_path)
    assert cli.main(["run", "--config", str(cfg), f"--eps={eps}", "--out", str(tmp_path)]) == 1


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL + "extra: 1\n")
    assert cli.main(["run", "--config", str(cfg), "--eps", "0.1"]) == 1
    assert "line 6" in capsys.readouterr().err


def test_blowup_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL + "ceiling: 1.0e-3\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--eps", "0.1", "--out", str(out)]) == 2
    report = json.loads((out / "run_eps0.10000000000000001.json").read_text())
    assert report["completed"] is False and report["blowup_time"] == pytest.approx(0.02)
    assert "blowup detected" in capsys.readouterr().err


def test_compare_writes_series_and_regenerates_reference(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["compare", "--config", str(cfg), "--eps", "0.1", "--out", str(out)]) == 0
    csv = out / "compare_eps0.10000000000000001.csv"
    assert header_of(csv) == ",".join(COMPARE_HEADER)
    assert COMPARE_HEADER[:5] == ("t", "Ru_Xs", "Rv_Y", "Rw_Y", "S_eps")
    first = csv.read_text()
    refs = list(out.glob("choquard_reference_*.npz"))
    assert len(refs) == 1
    refs[0].unlink()
    assert cli.main(["compare", "--config", str(cfg), "--eps", "0.1", "--out", str(out)]) == 0
    assert len(list(out.glob("choquard_reference_*.npz"))) == 1
    assert csv.read_text() == first
    _, data = read_csv(csv)
    assert np.all(np.isfinite(data)) and np.all(np.diff(data[:, 4]) >= 0)


def test_compare_degenerate_config_is_finite(tmp_path):
    text = "grid:\n  n: 16\n  L: 16.0\nT0: 0.04\nsample_interval: 0.02\neps: [5.0]\n"
    cfg = write_cfg(tmp_path, text)
    out = tmp_path / "out"
    assert cli.main(["compare", "--config", str(cfg), "--eps", "5.0", "--out", str(out)]) == 0
    _, data = read_csv(out / "compare_eps5.csv")
    assert np.all(np.isfinite(data)) and data[-1, 5] > 0


def test_sweep_synthetic_power(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out), "--synthetic-power", "1"]) == 0
    report = json.loads((out / "sweep_report.json").read_text())
    assert report["slope"] == pytest.approx(1.0, abs=1e-12) and report["passed"]
    assert header_of(out / "sweep.csv") == "eps,sup_composite_error,sup_S,completed,dt,seconds"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out), "--synthetic-power", "2"]) == 3


def test_sweep_needs_three_eps(tmp_path):
    cfg = write_cfg(tmp_path, SMALL.replace("[0.2, 0.1, 0.05]", "[0.2, 0.1]"))
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_sweep_deterministic_across_threads(tmp_path):
    cfg = write_cfg(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    codes = {cli.main(["sweep", "--config", str(cfg), "--out", str(a)])}
    codes.add(cli.main(["sweep", "--config", str(cfg), "--out", str(b), "--threads", "3"]))
    assert codes <= {0, 3}
    for name in ("compare_eps0.10000000000000001.csv", "compare_eps0.050000000000000003.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    # wall-clock seconds are the only column allowed to differ
    _, da = read_csv(a / "sweep.csv")
    _, db = read_csv(b / "sweep.csv")
    assert np.array_equal(da[:, :5], db[:, :5])


def test_unwritable_output(tmp_path):
    cfg = write_cfg(tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["run", "--config", str(cfg), "--eps", "0.1", "--out", str(blocker / "sub")]) == 1


def test_groundstate_command(tmp_path):
    text = "grid:\n  n: 16\n  L: 16.0\ninitial:\n  kind: ground_state\n  mass: 60.0\ngs_tol: 1.0e-8\n"
    cfg = write_cfg(tmp_path, text)
    out = tmp_path / "out"
    assert cli.main(["groundstate", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "ground_state.json").read_text())
    assert report["energy"] < 0 and report["residual"] <= 1e-8
    assert read_snapshot(out / "ground_state.bin")["eps"] is None


def test_selftest_all_pass(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert all(r.ok for r in run_selftest())


def test_selftest_corrupted_multiplier_named(capsys):
    assert cli.main(["selftest", "--corrupt", "multiplier"]) == 3
    out = capsys.readouterr().out
    failed = [line for line in out.splitlines() if line.startswith("FAIL")]
    assert any("multiplier_identity" in line for line in failed)
