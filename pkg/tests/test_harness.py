import json
import logging


from pathlib import Path


import pytest

from egmc import cli
from egmc.errors import ConfigError
from egmc.harness import (ExperimentSpec, default_dt_ladder,
                          load_config, read_result, run_experiment,
                          spec_from_meta)
from egmc.analytic import ChannelGeometry


def table_bytes(path):
    return b"".join(line for line in Path(path).read_bytes().splitlines(keepends=True)
                    if not line.startswith(b"#"))


def test_load_config_minimal_3d(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# a comment\n"
        "D_um2_per_s = 80\n"
        "L_um = 30\n"
        "R_um = 10\n"
        "dt_s = 0.05   # inline comment\n"
        "n_steps = 40\n"
        "n_particles = 1000\n"
        "alpha = 0.8235\n"
        "seed = 7\n",
        encoding="utf-8")
    params = load_config(cfg)
    assert params == {"D_um2_per_s": 80.0, "L_um": 30.0, "R_um": 10.0,
                      "dt_s": 0.05, "n_steps": 40, "n_particles": 1000,
                      "alpha": 0.8235, "seed": 7}


def test_load_config_unknown_key_lists_valid_keys(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("diffusion = 80\n", encoding="utf-8")
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    message = str(exc.value)
    assert "diffusion" in message
    assert "D_um2_per_s" in message  # valid keys are listed


def test_load_config_bad_value(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("dt_s = fast\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="dt_s"):
        load_config(cfg)


def test_missing_required_key_is_named(tmp_path):
    spec = ExperimentSpec(kind="run3d", params={"L_um": 30.0, "D_um2_per_s": 80.0},
                          output_path=tmp_path / "x.csv")
    with pytest.raises(ConfigError, match="R_um"):
        run_experiment(spec)


def test_geometry_invariant_rejected(tmp_path):
    spec = ExperimentSpec(kind="run3d",
                          params={"R_um": 30.0, "L_um": 20.0,
                                  "D_um2_per_s": 80.0, "dt_s": 0.05},
                          output_path=tmp_path / "x.csv")
    with pytest.raises(ConfigError):
        run_experiment(spec)


def test_alpha_default_is_logged(tmp_path, caplog):
    spec = ExperimentSpec(kind="run3d",
                          params={"R_um": 10.0, "L_um": 30.0,
                                  "D_um2_per_s": 80.0, "dt_s": 0.1,
                                  "n_steps": 20, "n_particles": 200, "seed": 5},
                          output_path=tmp_path / "x.csv")
    with caplog.at_level(logging.INFO, logger="egmc.harness"):
        run_experiment(spec)
    assert any("0.8235" in record.message for record in caplog.records)
    meta, _, _ = read_result(tmp_path / "x.csv")
    assert float(meta["alpha"]) == 0.8235


def test_empty_and_non_monotone_sweeps_rejected(tmp_path):
    base = {"R_um": 10.0, "L_um": 30.0, "D_um2_per_s": 80.0}
    spec = ExperimentSpec(kind="inaccuracy",
                          params=dict(base, dt_list_s=[]),
                          output_path=tmp_path / "x.csv")
    with pytest.raises(ConfigError, match="empty"):
        run_experiment(spec)
    spec = ExperimentSpec(kind="inaccuracy",
                          params=dict(base, dt_list_s=[0.5, 0.2]),
                          output_path=tmp_path / "x.csv")
    with pytest.raises(ConfigError, match="increasing"):
        run_experiment(spec)
    spec = ExperimentSpec(kind="calibrate3d",
                          params=dict(base, alpha_points=0),
                          output_path=tmp_path / "x.csv")
    with pytest.raises(ConfigError):
        run_experiment(spec)


def test_unknown_kind_and_figure():
    with pytest.raises(ConfigError):
        ExperimentSpec(kind="run5d")
    spec = ExperimentSpec(kind="repro", params={"figure": "fig99"})
    with pytest.raises(ConfigError, match="fig99"):
        run_experiment(spec)


RUN3D_PARAMS = {"R_um": 10.0, "L_um": 30.0, "D_um2_per_s": 80.0,
                "dt_s": 0.1, "n_steps": 30, "n_particles": 2_000, "seed": 42,
                "alpha": 0.8235}


def test_run3d_csv_schema(tmp_path):
    out = tmp_path / "run.csv"
    run_experiment(ExperimentSpec(kind="run3d", params=dict(RUN3D_PARAMS),
                                  output_path=out))
    meta, columns, rows = read_result(out)
    assert columns == ["step", "time_s", "absorbed_count",
                       "cumulative_fraction", "analytic_cumulative",
                       "analytic_per_step_fraction"]
    assert len(rows) == 30
    for key in ("tool_version", "kind", "seed", "isdcd", "chi2_red",
                "locality_ok", "absorbed_total", "survivors"):
        assert key in meta
    # conservation is visible straight from the metadata
    assert int(meta["absorbed_total"]) + int(meta["survivors"]) == 2000


def test_json_mirrors_csv(tmp_path):
    csv_out = tmp_path / "run.csv"
    json_out = tmp_path / "run.json"
    run_experiment(ExperimentSpec(kind="run3d", params=dict(RUN3D_PARAMS),
                                  output_path=csv_out))
    run_experiment(ExperimentSpec(kind="run3d", params=dict(RUN3D_PARAMS),
                                  output_path=json_out, format="json"))
    payload = json.loads(json_out.read_text())
    meta, columns, rows = read_result(csv_out)
    assert payload["columns"] == columns
    assert len(payload["rows"]) == len(rows)
    assert payload["meta"]["kind"] == "run3d"
    assert payload["meta"]["seed"] == 42
    # same numbers in both formats
    assert payload["rows"][5][2] == int(rows[5][2])


def test_round_trip_reproduces_table_bytes(tmp_path):
    out = tmp_path / "first.csv"
    run_experiment(ExperimentSpec(kind="run3d", params=dict(RUN3D_PARAMS),
                                  output_path=out, threads=1))
    meta, _, _ = read_result(out)
    rerun = spec_from_meta(meta, output_path=tmp_path / "second.csv", threads=3)
    run_experiment(rerun)
    assert table_bytes(out) == table_bytes(tmp_path / "second.csv")
    # the metadata block is deterministic too
    assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()


def test_thread_count_does_not_change_bytes(tmp_path):
    params = dict(RUN3D_PARAMS, n_streams=4)
    for threads, name in ((1, "a.csv"), (4, "b.csv")):
        run_experiment(ExperimentSpec(kind="run3d", params=dict(params),
                                      output_path=tmp_path / name,
                                      threads=threads))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_run1d_reports_absorption_index(tmp_path):
    out = tmp_path / "run1d.csv"
    run_experiment(ExperimentSpec(
        kind="run1d",
        params={"L_um": 30.0, "D_um2_per_s": 80.0, "n_steps": 50,
                "n_particles": 5_000, "seed": 3, "alpha": 0.8235},
        output_path=out))
    meta, columns, rows = read_result(out)
    assert columns == ["step", "time_s", "absorbed_count", "cumulative_fraction"]
    assert "absorption_index_um" in meta
    assert "scaled_absorption_index" in meta


def test_inaccuracy_schema_and_ladder(tmp_path):
    geom = ChannelGeometry(R=10.0, L=30.0, D=80.0)
    ladder = default_dt_ladder(geom, ratios=(0.5, 1.0))
    assert ladder[1] == pytest.approx(2.5)
    out = tmp_path / "inac.csv"
    run_experiment(ExperimentSpec(
        kind="inaccuracy",
        params={"R_um": 10.0, "L_um": 30.0, "D_um2_per_s": 80.0,
                "dt_list_s": ladder, "n_particles": 2_000, "seed": 4},
        output_path=out))
    meta, columns, rows = read_result(out)
    assert columns[:4] == ["R_um", "L_um", "D_um2_per_s", "dt_s"]
    assert len(rows) == 2
    assert rows[1][5] == "1.0"  # step_length_ratio at the cutoff


def test_calibrate3d_experiment_and_plot(tmp_path):
    out = tmp_path / "cal.csv"
    run_experiment(ExperimentSpec(
        kind="calibrate3d",
        params={"R_um": 10.0, "L_um": 35.0, "D_um2_per_s": 80.0,
                "n_steps": 60, "n_particles": 2_000, "n_repeats": 2,
                "seed": 6, "alpha_points": 5},
        output_path=out, plot=True))
    meta, columns, rows = read_result(out)
    assert columns == ["alpha", "isdcd_mean", "isdcd_stderr"]
    assert len(rows) == 5
    assert "alpha_opt" in meta
    png = out.with_suffix(".png")
    assert png.is_file() and png.stat().st_size > 1_000


def test_noise_experiment_schema(tmp_path):
    out = tmp_path / "noise.csv"
    run_experiment(ExperimentSpec(
        kind="noise",
        params={"R_um": 10.0, "L_um": 35.0, "D_um2_per_s": 80.0,
                "n_steps": 40, "n_particles": 1_000, "n_repeats": 10,
                "seed": 8},
        output_path=out))
    meta, columns, rows = read_result(out)
    assert columns == ["step", "time_s", "measured_std", "poisson_std",
                       "band_halfwidth"]
    assert 0.0 <= float(meta["inside_band_fraction"]) <= 1.0


def test_unwritable_output_raises_oserror(tmp_path):
    spec = ExperimentSpec(kind="run3d", params=dict(RUN3D_PARAMS),
                          output_path=tmp_path / "no_dir" / "x.csv")
    with pytest.raises(OSError):
        run_experiment(spec)


# ---------------------------------------------------------------------------
# CLI surface

def test_cli_run3d_and_exit_codes(tmp_path, capsys):
    out = tmp_path / "cli.csv"
    code = cli.main(["run3d", "--R", "10", "--L", "30", "--D", "80",
                     "--steps", "25", "--particles", "500", "--seed", "1",
                     "--out", str(out)])
    assert code == 0
    assert out.is_file()

    code = cli.main(["run3d", "--R", "30", "--L", "20", "--D", "80",
                     "--out", str(tmp_path / "bad.csv")])
    assert code == 2

    code = cli.main(["run3d", "--R", "10", "--L", "30", "--D", "80",
                     "--steps", "5", "--particles", "100",
                     "--out", str(tmp_path / "missing" / "x.csv")])
    assert code == 3

    # nothing absorbed anywhere: the line fit cannot be built
    code = cli.main(["calibrate1d", "--L", "5000", "--D", "1",
                     "--dt", "0.0001", "--steps", "2", "--particles", "20",
                     "--seed", "3", "--out", str(tmp_path / "cal.csv")])
    assert code == 4


def test_cli_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("R_um=10\nL_um=30\nD_um2_per_s=80\ndt_s=0.1\n"
                   "n_steps=20\nn_particles=300\nseed=9\nalpha=0.5\n",
                   encoding="utf-8")
    out = tmp_path / "a.csv"
    assert cli.main(["run3d", "--config", str(cfg), "--out", str(out),
                     "--alpha", "0.8235"]) == 0
    meta, _, _ = read_result(out)
    assert float(meta["alpha"]) == 0.8235  # flag wins over file
    assert int(meta["n_steps"]) == 20


def test_cli_kind_mismatch_rejected(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("kind=run3d\nR_um=10\nL_um=30\nD_um2_per_s=80\ndt_s=0.1\n",
                   encoding="utf-8")
    assert cli.main(["run1d", "--config", str(cfg),
                     "--out", str(tmp_path / "x.csv")]) == 2


def test_cli_inaccuracy_dts_flag(tmp_path):
    out = tmp_path / "inac.csv"
    code = cli.main(["inaccuracy", "--R", "10", "--L", "30", "--D", "80",
                     "--particles", "1000", "--seed", "2",
                     "--dts", "0.5,2.5", "--out", str(out)])
    assert code == 0
    _, _, rows = read_result(out)
    assert len(rows) == 2
