import json
import math

import numpy as np
import pytest

from cohdec import cli, exper
from cohdec.exper import (SweepConfig, collapse_fit, crossing_estimate,
                          parse_config_file, read_csv_rows, run_sweep,
                          sweep_summary)


def mini_config(tmp_path, **kw):
    cfg = SweepConfig(model="x-xx", thetas=[0.08 * math.pi], phis=[0.05 * math.pi],
                      sizes=[2], aspect=1, chi_max=32, tol=1e-12, samples=4,
                      seed=9, out=str(tmp_path / "sweep.csv"),
                      trace_out=str(tmp_path / "sweep.jsonl"))
    for k, v in kw.items():
        setattr(cfg, k, v)
    return cfg


def test_config_file_roundtrip(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text(
        "# comment\n"
        "model = x-xx\n"
        "thetas = 0.05pi, 0.1pi\n"
        "phis = 0.0\n"
        "sizes = 2, 3\n"
        "aspect = 2\n"
        "samples = 3\n"
        "chi_max = 16\n"
        "out = run.csv\n")
    cfg = parse_config_file(str(path))
    assert cfg.model == "x-xx"
    assert np.allclose(cfg.thetas, [0.05 * math.pi, 0.1 * math.pi])
    assert cfg.sizes == [2, 3] and cfg.aspect == 2
    assert len(cfg.points()) == 4


def test_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("bogus = 1\n")
    with pytest.raises(ValueError):
        parse_config_file(str(path))


def test_config_phi_equals_theta_points():
    cfg = SweepConfig(thetas=[0.1, 0.2], phi_equals_theta=True, sizes=[2, 3])
    pts = cfg.points()
    assert len(pts) == 4
    assert all(p["phi"] == p["theta"] for p in pts)


def test_sweep_single_point_trivial_angle(tmp_path):
    cfg = mini_config(tmp_path, thetas=[0.0], phis=[0.0], samples=1)
    run_sweep(cfg)
    rows = read_csv_rows(cfg.out)
    assert len(rows) == 1
    row = rows[0]
    assert float(row["df_abs"]) == 1e6        # sentinel for the infinite ratio
    assert float(row["steady_s"]) == 0.0
    assert float(row["success_prob"]) == 1.0
    assert row["degenerate"] == "0"


def test_sweep_deterministic_across_worker_counts(tmp_path):
    cfg1 = mini_config(tmp_path, out=str(tmp_path / "w1.csv"), workers=1,
                       trace_out=None)
    cfg2 = mini_config(tmp_path, out=str(tmp_path / "w2.csv"), workers=2,
                       trace_out=None)
    run_sweep(cfg1)
    run_sweep(cfg2)
    assert open(cfg1.out, "rb").read() == open(cfg2.out, "rb").read()


def test_sweep_rows_match_oracle_amplitudes(tmp_path):
    from cohdec import code, decode as dec
    cfg = mini_config(tmp_path, samples=3)
    run_sweep(cfg)
    lat = code.Lattice(2, 2)
    model = code.ErrorModel.x_xx(0.08 * math.pi, 0.05 * math.pi)
    choi = code.exact_corrupt(code.logical_choi_state(lat), lat, model)
    for row in read_csv_rows(cfg.out):
        syn = code.Syndrome.from_hex(lat, row["syndrome"])
        amps = dec.class_amplitudes(model, lat, syn, 1 << 20, 0.0)
        exact = code.exact_class_amplitudes(choi, lat, syn, amps.rx_edges,
                                            amps.rz_edges)
        logz0 = float(row["logz10_00"]) * math.log(10)
        assert np.isclose(logz0, np.log(abs(exact[(0, 0)])), atol=1e-8)
        assert np.isclose(float(row["argz_00"]),
                          np.angle(exact[(0, 0)]), atol=1e-8)


def test_sweep_sidecar_holds_traces_and_timing(tmp_path):
    cfg = mini_config(tmp_path, samples=2)
    run_sweep(cfg)
    lines = [json.loads(l) for l in open(cfg.trace_out)]
    assert len(lines) == 2
    assert all("wall_ms" in l and "s_trace" in l for l in lines)
    lat_layers = 2 * 2 + 1  # Ly=2: three h layers + two v layers
    assert all(len(l["s_trace"]) == lat_layers for l in lines)


def test_failed_sample_becomes_flagged_row():
    exper._init_worker(SweepConfig(model="x-xx"))
    params = {"point": 3, "lx": 1, "ly": 1, "theta": 0.1, "phi": 0.0}  # bad Lx
    point, sample, row, trace = exper._run_task_safe((params, 7))
    assert (point, sample) == (3, 7)
    assert row["degenerate"] == 1 and row["syndrome"] == ""
    assert "error" in trace


def test_sweep_summary_reports_filtered_and_unfiltered(tmp_path):
    cfg = mini_config(tmp_path, samples=3)
    run_sweep(cfg)
    summary = sweep_summary(cfg.out)
    assert len(summary) == 1
    assert "df_abs" in summary[0] and "df_abs_filtered" in summary[0]


GOLDEN_COLUMNS = ["syndrome", "logz10_00", "argz_00", "df_abs", "steady_s"]


def test_golden_mini_sweep(tmp_path):
    """Fixed-seed miniature sweep against frozen values.

    Guards the CSV schema, the sampler's RNG stream and the decoder output
    at once; numeric comparisons carry a small tolerance for BLAS variation.
    """
    cfg = mini_config(tmp_path, samples=2, thetas=[0.1 * math.pi],
                      phis=[0.06 * math.pi], seed=5, trace_out=None)
    run_sweep(cfg)
    rows = read_csv_rows(cfg.out)
    assert [",".join(r.keys()) for r in rows[:1]] == [",".join(exper.CSV_COLUMNS)]
    golden = [
        {"syndrome": "10", "logz10_00": -0.721006818626,
         "argz_00": 1.90238999416, "df_abs": 2.63081789071,
         "success_prob": 0.880972807875, "sample_log_prob": -3.87039903077},
        {"syndrome": "00", "logz10_00": -0.226912019633,
         "argz_00": -0.16969269352, "df_abs": 2.46671689834,
         "success_prob": 0.992724798288, "sample_log_prob": -0.883805471076},
    ]
    for row, ref in zip(rows, golden):
        assert row["syndrome"] == ref["syndrome"]
        for col in ("logz10_00", "argz_00", "df_abs", "success_prob",
                    "sample_log_prob"):
            assert np.isclose(float(row[col]), ref[col], atol=1e-9), col


def test_collapse_fit_recovers_planted_parameters():
    rng = np.random.default_rng(0)
    theta_c, nu = 0.3, 2.0
    data = []
    for L in (8, 16, 32):
        thetas = np.linspace(0.2, 0.4, 13)
        x = (thetas - theta_c) * L ** (1 / nu)
        y = np.tanh(-2.0 * x) + 1.0
        noise = 0.01 * rng.normal(size=len(y))
        for t, v, e in zip(thetas, y + noise, np.full(len(y), 0.01)):
            data.append((t, L, v, e))
    fit = collapse_fit(np.array(data), (0.25, 0.35), (1.0, 4.0))
    assert abs(fit.theta_c - theta_c) < 0.01
    assert abs(fit.nu - nu) < 0.15
    assert not fit.nu_unidentifiable


def test_collapse_fit_perfect_data_low_residual():
    data = []
    for L in (8, 16):
        thetas = np.linspace(0.2, 0.4, 9)
        x = (thetas - 0.3) * L ** (1 / 2.0)
        for t, v in zip(thetas, np.tanh(-2 * x)):
            data.append((t, L, v, 0.01))
    fit = collapse_fit(np.array(data), (0.28, 0.32), (1.5, 2.5))
    assert fit.residual < 0.05


def test_collapse_fit_flags_size_independent_data():
    data = []
    for L in (8, 16, 32):
        for t in np.linspace(0.2, 0.4, 9):
            data.append((t, L, math.sin(8 * t), 0.01))
    fit = collapse_fit(np.array(data), (0.25, 0.35), (1.0, 4.0))
    assert fit.nu_unidentifiable


def test_collapse_fit_rejects_single_size():
    data = [(t, 8, t, 0.01) for t in np.linspace(0.1, 0.3, 8)]
    with pytest.raises(ValueError):
        collapse_fit(np.array(data), (0.1, 0.3), (1.0, 3.0))


def test_crossing_estimate_planted():
    thetas = np.linspace(0.0, 1.0, 21)
    data = []
    for L, slope in ((8, 1.0), (16, 2.0)):
        for t in thetas:
            data.append((t, L, slope * (t - 0.4)))  # cross exactly at 0.4
    crossings = crossing_estimate(np.array(data))
    assert np.isclose(crossings[(8.0, 16.0)][0], 0.4, atol=1e-6)


def test_crossing_estimate_parallel_lines_flagged():
    thetas = np.linspace(0.0, 1.0, 11)
    data = [(t, L, t + L) for L in (8, 16) for t in thetas]
    crossings = crossing_estimate(np.array(data))
    assert crossings[(8.0, 16.0)] == []


def test_oracle_check_function_passes():
    results = exper.oracle_check(model_kinds=("x",), lattice_sizes=((2, 1),),
                                 instances=2)
    assert all(r["ok"] for r in results)


# ------------------------------------------------------------------- CLI


def test_cli_sample_and_decode(capsys):
    rc = cli.main(["sample", "--model", "x-xx", "--theta", "0.1pi", "--phi",
                   "0.05pi", "--lx", "2", "--ly", "1", "--samples", "2",
                   "--chi", "16", "--seed", "3"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "log_prob=" in out and len(out.strip().splitlines()) == 2

    rc = cli.main(["decode", "--model", "x-xx", "--theta", "0.1pi", "--phi",
                   "0.05pi", "--lx", "2", "--ly", "1", "--chi", "16",
                   "--seed", "3", "--trace"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "class 0:" in out and "layer h0" in out and "S(y):" in out


def test_cli_sample_zero_init_uses_dense_oracle(tmp_path, capsys):
    out = str(tmp_path / "syn.txt")
    rc = cli.main(["sample", "--model", "x", "--theta", "0.15pi", "--lx", "2",
                   "--ly", "1", "--init", "zero", "--samples", "3",
                   "--seed", "5", "--out", out])
    assert rc == 0
    lines = open(out).read().strip().splitlines()
    assert len(lines) == 3 and all("oracle=dense" in l for l in lines)


def test_cli_decode_accepts_syndrome_hex(capsys):
    rc = cli.main(["decode", "--model", "x", "--theta", "0.1pi", "--lx", "2",
                   "--ly", "1", "--syndrome", "00", "--chi", "8"])
    assert rc == 0
    assert "chosen=0" in capsys.readouterr().out


def test_cli_sweep_and_collapse(tmp_path, capsys):
    out = str(tmp_path / "s.csv")
    rc = cli.main(["sweep", "--model", "x-xx", "--thetas", "0.06pi,0.1pi,0.14pi,0.18pi",
                   "--phis", "0.05pi", "--sizes", "2,3", "--samples", "2",
                   "--seed", "2", "--chi-max", "16", "--out", out])
    assert rc == 0
    rows = read_csv_rows(out)
    assert len(rows) == 16
    rc = cli.main(["collapse", "--csv", out, "--value", "df_abs",
                   "--theta-min", "0.05pi", "--theta-max", "0.18pi"])
    assert rc == 0
    assert "theta_c=" in capsys.readouterr().out


def test_cli_oracle_check(capsys):
    rc = cli.main(["oracle-check", "--models", "x", "--sizes", "2x1",
                   "--instances", "1"])
    assert rc == 0
    assert "passed" in capsys.readouterr().out
