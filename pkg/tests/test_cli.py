import numpy as np
import pytest

from tonells.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_simulate_then_estimate_csv(tmp_path, capsys):
    path = tmp_path / "tone.csv"
    code, out, _ = run(capsys, "simulate", "--f", "320000", "--noiseless",
                       "--fs", "1e7", "--duration", "500e-6",
                       "--seed", "3", "--out", str(path))
    assert code == 0
    assert path.exists()
    code, out, _ = run(capsys, "estimate", "--in", str(path), "--fr", "320000",
                       "--tn", "500e-6")
    assert code == 0
    f_hat = float([line for line in out.splitlines()
                   if line.startswith("f_hat_hz:")][0].split()[1])
    assert f_hat == pytest.approx(320000.0, abs=1e-5)
    assert "windows_used: 227" in out
    assert "q_eff: 0.704" in out


def test_simulate_raw_format(tmp_path, capsys):
    path = tmp_path / "tone.f64"
    code, *_ = run(capsys, "simulate", "--f", "100000", "--snr-db", "30",
                   "--fs", "5e6", "--duration", "1e-3", "--seed", "1",
                   "--out", str(path))
    assert code == 0
    assert (tmp_path / "tone.f64.json").exists()
    code, out, _ = run(capsys, "estimate", "--in", str(path), "--fr", "100000")
    assert code == 0
    f_hat = float(out.splitlines()[0].split()[1])
    assert f_hat == pytest.approx(100000.0, abs=5.0)


def test_estimate_insufficient_data_exit_code(tmp_path, capsys):
    path = tmp_path / "short.csv"
    code, *_ = run(capsys, "simulate", "--f", "320000", "--noiseless",
                   "--fs", "1e7", "--duration", "3e-6", "--seed", "0",
                   "--out", str(path))
    assert code == 0
    code, _, err = run(capsys, "estimate", "--in", str(path), "--fr", "320000")
    assert code == 2
    assert "error:" in err


def test_track_streams_csv(tmp_path, capsys):
    path = tmp_path / "tone.csv"
    run(capsys, "simulate", "--f", "320000", "--snr-db", "30", "--fs", "1e7",
        "--duration", "1e-3", "--seed", "5", "--out", str(path))
    code, out, _ = run(capsys, "track", "--in", str(path), "--fr", "320000",
                       "--tn", "250e-6")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "time,f_hat"
    assert len(lines) == 1 + 4
    times = [float(l.split(",")[0]) for l in lines[1:]]
    f_hats = [float(l.split(",")[1]) for l in lines[1:]]
    assert times == sorted(times)
    for f in f_hats:
        assert f == pytest.approx(320000.0, abs=20.0)


def test_montecarlo_flags_mode(tmp_path, capsys):
    out_path = tmp_path / "report.csv"
    code, out, _ = run(capsys, "montecarlo", "--kind", "mse-table",
                       "--f", "500000", "--fr", "505000", "--snr-db", "20",
                       "--tn", "0.2e-3", "--trials", "30", "--seed", "2",
                       "--out", str(out_path))
    assert code == 0
    text = out_path.read_text()
    assert "# kind: mse-table" in text
    assert "# root_seed: 2" in text
    data_line = text.strip().splitlines()[-1]
    assert data_line.split(",")[0] == "500000"


def test_montecarlo_toml_mode(tmp_path, capsys):
    spec_path = tmp_path / "spec.toml"
    spec_path.write_text(
        'kind = "bias-table"\n'
        "phase_sweep = 16\n"
        "[[rows]]\n"
        "f = 320000.0\n"
        "fr = 320000.0\n"
        "tn = 500e-6\n"
    )
    out_path = tmp_path / "bias.csv"
    code, *_ = run(capsys, "montecarlo", "--spec", str(spec_path),
                   "--out", str(out_path))
    assert code == 0
    assert "# kind: bias-table" in out_path.read_text()


def test_bias_sweep_command(tmp_path, capsys):
    out_path = tmp_path / "sweep.csv"
    code, *_ = run(capsys, "bias-sweep", "--f", "300300", "--fr", "300000",
                   "--qmin", "0.6", "--qmax", "0.85", "--steps", "120",
                   "--out", str(out_path))
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert lines[2] == "q,bias_variance"
    data = np.loadtxt(str(out_path), delimiter=",", skiprows=3)
    assert data.shape[0] == 120


def test_compare_command(tmp_path, capsys):
    spec_path = tmp_path / "cmp.toml"
    spec_path.write_text(
        'kind = "compare-nls"\n'
        "trials = 6\n"
        "root_seed = 3\n"
        "[[rows]]\n"
        "f = 200e3\n"
        "fr = 195e3\n"
        "snr_db = 27.0\n"
        "tn = 0.2e-3\n"
    )
    out_path = tmp_path / "cmp.csv"
    code, *_ = run(capsys, "compare", "--baseline", "nls", "--spec",
                   str(spec_path), "--out", str(out_path))
    assert code == 0
    assert "baseline_std_hz" in out_path.read_text()

    code, _, err = run(capsys, "compare", "--baseline", "dpll", "--spec",
                       str(spec_path), "--out", str(out_path))
    assert code != 0 or "does not match" in err


def test_missing_input_file_is_an_error(tmp_path, capsys):
    code, _, err = run(capsys, "estimate", "--in", str(tmp_path / "nope.csv"),
                       "--fr", "1000")
    assert code == 1
    assert "error:" in err


def test_montecarlo_fig_data_kind(tmp_path, capsys):
    spec_path = tmp_path / "fig.toml"
    spec_path.write_text(
        'kind = "fig-data"\n'
        "[params]\n"
        'fig = "fig-5"\n'
        "f_hz = 300300.0\n"
        "fr_hz = 300000.0\n"
        "q_min = 0.6\n"
        "q_max = 0.8\n"
        "steps = 60\n"
    )
    out_path = tmp_path / "fig5.csv"
    code, *_ = run(capsys, "montecarlo", "--spec", str(spec_path),
                   "--out", str(out_path))
    assert code == 0
    data = np.loadtxt(str(out_path), delimiter=",", skiprows=2)
    assert data.shape == (60, 2)


def test_compare_dpll_with_traces(tmp_path, capsys):
    spec_path = tmp_path / "loop.toml"
    spec_path.write_text(
        'kind = "compare-dpll"\n'
        "trials = 3\n"
        "root_seed = 11\n"
        "[params]\n"
        "scenario_settling = 0.5e-3\n"
        "[[rows]]\n"
        "f = 400e3\n"
        "fr = 395e3\n"
        "snr_db = 27.0\n"
        "settling = 0.2e-3\n"
    )
    out_path = tmp_path / "loop.csv"
    trace_dir = tmp_path / "traces"
    code, *_ = run(capsys, "compare", "--baseline", "dpll", "--spec",
                   str(spec_path), "--out", str(out_path),
                   "--trace-dir", str(trace_dir))
    assert code == 0
    assert (trace_dir / "scenario_startup_dpll.csv").exists()
    assert (trace_dir / "scenario_jump_lls.csv").exists()
    assert "baseline_std_hz" in out_path.read_text()
