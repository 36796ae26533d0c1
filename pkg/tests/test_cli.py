import json
import subprocess
import sys

import pytest

from stratcomm.cli import main, params_to_argv, parse_range


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_capacity_text_output(data_dir, capsys):
    code, out, _ = run(["capacity", "--channel", data_dir / "bsc_01.txt"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "capacity 0.531004 bits"


def test_malformed_channel_exits_with_line(data_dir, capsys):
    code, _, err = run(["capacity", "--channel", data_dir / "bad_channel.txt"], capsys)
    assert code == 2
    assert "line 7" in err


def test_missing_file(tmp_path, capsys):
    code, _, err = run(["solve", "--problem", tmp_path / "nope.txt"], capsys)
    assert code == 2 and "nope.txt" in err


def test_solve_record(data_dir, tmp_path, capsys):
    out = tmp_path / "solve.json"
    code, _, _ = run(["solve", "--problem", data_dir / "dsbs_03.txt", "--output", out], capsys)
    assert code == 0
    rec = json.loads(out.read_text())
    assert rec["value"] == pytest.approx(0.1212, abs=2e-3)
    assert rec["support_size"] <= 3
    assert rec["cross_check_gap"] <= 1e-3
    assert rec["zero_capacity_value"] == pytest.approx(0.3)
    manifest = json.loads((tmp_path / "solve.json.manifest.json").read_text())
    assert manifest["command"] == "solve"
    assert set(manifest["inputs"]) == {"problem"} and set(manifest["outputs"]) == {"output"}


def test_solve_capacity_from_channel(data_dir, capsys):
    code, out, _ = run(["solve", "--problem", data_dir / "dsbs_03.txt", "--channel", data_dir / "noiseless2.txt"],
                       capsys)
    assert code == 0
    assert json.loads(out)["capacity_bits"] == pytest.approx(1.0, abs=1e-9)
    assert json.loads(out)["value"] == pytest.approx(0.0, abs=1e-12)


def test_dsbs_command(capsys):
    code, out, _ = run(["dsbs", "--p0", 0.5, "--delta0", 0.05, "--delta1", 0.5, "--kappa", 0.75, "--cap", 0.2], capsys)
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(0.1721, abs=2e-3)
    code, _, err = run(["dsbs", "--delta", 0.3, "--cap", 0.4, "--curve", "0:1:0.1"], capsys)
    assert code == 2 and "--csv" in err
    code, _, _ = run(["dsbs", "--delta", 0.3, "--delta0", 0.2], capsys)
    assert code == 2


def test_dsbs_curve_files(tmp_path, capsys):
    csv_path, svg_path = tmp_path / "c.csv", tmp_path / "c.svg"
    code, _, _ = run(["dsbs", "--delta", 0.3, "--curve", "0:1:0.25", "--csv", csv_path, "--svg", svg_path], capsys)
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 6 and lines[0].startswith("capacity,value,regime")
    assert svg_path.read_text().startswith("<svg")


def test_curve_command(data_dir, tmp_path, capsys):
    csv_path = tmp_path / "lp.csv"
    code, _, _ = run(["curve", "--problem", data_dir / "dsbs_03.txt", "--capacities", "0:0.9:0.3",
                      "--grid-step", 0.01, "--csv", csv_path], capsys)
    assert code == 0
    rows = [line.split(",") for line in csv_path.read_text().splitlines()[1:]]
    values = [float(r[1]) for r in rows]
    assert len(rows) == 4 and values[0] == pytest.approx(0.3)
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_simulate_needs_target(data_dir, capsys):
    code, _, err = run(["simulate", "--problem", data_dir / "dsbs_03.txt", "--channel", data_dir / "noiseless2.txt",
                        "--n", 6], capsys)
    assert code == 2 and "--target" in err


def test_simulate_rejects_long_blocks_and_bad_rates(data_dir, capsys):
    base = ["simulate", "--problem", data_dir / "dsbs_03.txt", "--target", data_dir / "dsbs_target.txt",
            "--channel", data_dir / "noiseless2.txt"]
    code, _, err = run(base + ["--n", 17], capsys)
    assert code == 2 and "17" in err
    code, _, err = run(base + ["--n", 6, "--rate", 0.9], capsys)
    assert code == 2 and "I(U;W)" in err
    code, _, _ = run(base + ["--n", 6, "--rate", 0.9, "--trials", 3, "--allow-rate-violation"], capsys)
    assert code == 0


def test_simulate_outputs(data_dir, tmp_path, capsys):
    csv_path, out = tmp_path / "t.csv", tmp_path / "s.json"
    code, _, _ = run(["simulate", "--problem", data_dir / "dsbs_03.txt", "--target", data_dir / "dsbs_target.txt",
                      "--channel", data_dir / "noiseless2.txt", "--n", 6, "--trials", 20, "--seed", 3,
                      "--delta-typ", 0.45, "--csv", csv_path, "--output", out], capsys)
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "trial,encode_failed,index_error,error_event,d_e,d_d,kl_mean,t_alpha_fraction,agreement"
    assert len(lines) == 21
    rec = json.loads(out.read_text())
    assert rec["trials"] == 20 and rec["m_size"] == 8 and rec["l_size"] == 2  # ceil(6 * 0.0173) = 1 bit of bin index


def test_replay_reproduces_outputs(data_dir, tmp_path, capsys):
    csv_path = tmp_path / "c.csv"
    code, _, _ = run(["dsbs", "--delta", 0.3, "--curve", "0:0.9:0.05", "--csv", csv_path,
                      "--output", tmp_path / "d.json"], capsys)
    assert code == 0
    code, _, _ = run(["replay", "--manifest", tmp_path / "d.json.manifest.json", "--output-dir", tmp_path / "again"],
                     capsys)
    assert code == 0
    assert (tmp_path / "again" / "c.csv").read_bytes() == csv_path.read_bytes()


def test_replay_detects_changed_output(data_dir, tmp_path, capsys):
    out = tmp_path / "cap.json"
    assert run(["capacity", "--channel", data_dir / "bsc_01.txt", "--output", out], capsys)[0] == 0
    manifest = tmp_path / "cap.json.manifest.json"
    rec = json.loads(manifest.read_text())
    rec["outputs"]["output"] = "0" * 64
    manifest.write_text(json.dumps(rec))
    assert run(["replay", "--manifest", manifest], capsys)[0] == 1


def test_params_round_trip_through_argv():
    argv = params_to_argv("simulate", {"problem": "p.txt", "n": 6, "eta": 0.05, "allow_rate_violation": True,
                                       "rate": None})
    assert argv == ["simulate", "--problem", "p.txt", "--n", "6", "--eta", "0.05", "--allow-rate-violation"]


def test_parse_range():
    assert parse_range("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    with pytest.raises(ValueError):
        parse_range("0:1")


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "stratcomm.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("stratcomm ")
