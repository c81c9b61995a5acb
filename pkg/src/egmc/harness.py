"""Experiment orchestration and result export.

One experiment = one result file.  CSV files carry a ``#``-prefixed metadata
header (full resolved configuration, seed, tool version) followed by an
RFC-4180-compatible table; JSON mirrors the same structure.  The metadata is
complete enough to re-run the experiment and reproduce the table byte for
byte, independent of the thread count used.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import ChannelGeometry, discretize, peak_time
from .calibration import (calibrate_1d, calibrate_1d_averaged, calibrate_3d,
                          weighted_alpha_mean)
from .engines import (Receiver1D, RunConfig, absorption_index_1d,
                      default_step_count, run_1d, run_3d)
from .errors import ConfigError
from .metrics import (REFERENCE_ALPHA, error_report, inaccuracy_cell,
                      poisson_noise_profile)
from .streams import derive_seeds

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("run1d", "run3d", "calibrate1d", "calibrate3d",
                    "noise", "inaccuracy", "repro")
FIGURES = ("fig4", "fig5", "fig6", "fig7", "fig8", "fig9")

DEFAULT_SEED = 12345
DEFAULT_PARTICLES = 100_000

# Figure-reproduction settings.  The seed and particle count come from the
# experiment spec; everything else is fixed here and echoed into metadata.
FIG4_L_VALUES = tuple(np.linspace(30.0, 200.0, 5))
FIG4_D_VALUES = tuple(np.linspace(80.0, 600.0, 5))
FIG4_STEPS = 100
FIG5_CASES = ((10.0, 20.0, 80.0), (10.0, 30.0, 80.0), (10.0, 40.0, 80.0))
FIG5_STEPS = 300
FIG6_CASE = (10.0, 35.0, 80.0)
FIG6_STEPS = 100
FIG6_REPEATS = 20
FIG7_CASE = (10.0, 35.0, 80.0)
FIG7_STEPS = 1000
FIG7_REPEATS = 30
FIG8_CASES = ((10.0, 35.0, 80.0, 100), (5.0, 30.0, 200.0, 100),
              (15.0, 50.0, 600.0, 300), (10.0, 30.0, 80.0, 300))
FIG8_REPEATS = 5
FIG9_CASES = ((10.0, 30.0, 80.0), (10.0, 35.0, 200.0),
              (5.0, 25.0, 80.0), (15.0, 60.0, 600.0))
FIG9_STEP_RATIOS = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.7)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


# key name -> parser; every physical quantity carries its unit in the name
CONFIG_KEYS = {
    "kind": str,
    "figure": str,
    "out": str,
    "format": str,
    "plot": _parse_bool,
    "threads": int,
    "seed": int,
    "R_um": float,
    "L_um": float,
    "r_x_um": float,
    "D_um2_per_s": float,
    "dt_s": float,
    "n_steps": int,
    "n_particles": int,
    "alpha": float,
    "n_streams": int,
    "record_positions": _parse_bool,
    "alpha_min": float,
    "alpha_max": float,
    "alpha_points": int,
    "n_repeats": int,
    "t_factor": float,
    "dt_list_s": _parse_float_list,
}


@dataclass
class ExperimentSpec:
    """A fully resolved experiment: what to run and where to write it."""

    kind: str
    params: dict = field(default_factory=dict)
    output_path: Path | None = None
    format: str = "csv"
    plot: bool | None = None
    threads: int = 1

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"unknown experiment kind {self.kind!r}; valid: {', '.join(EXPERIMENT_KINDS)}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}; valid: csv, json")
        if self.threads < 1:
            raise ConfigError(f"thread count must be at least 1, got {self.threads}")

    @property
    def render_plot(self) -> bool:
        # figure reproduction renders by default; everything else opts in
        return self.kind == "repro" if self.plot is None else self.plot

    def resolved_output_path(self) -> Path:
        if self.output_path is not None:
            return Path(self.output_path)
        stem = self.kind
        if self.kind == "repro":
            stem = f"repro_{self.params['figure']}"
        return Path(f"{stem}.{self.format}")


def load_config(path) -> dict:
    """Parse a UTF-8 key=value config file ('#' starts a comment)."""
    raw: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r}; valid keys: "
                + ", ".join(sorted(CONFIG_KEYS)))
        try:
            raw[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return raw


def _require(params: dict, kind: str, *keys: str):
    for key in keys:
        if key not in params:
            raise ConfigError(f"{kind}: missing required key {key!r}")


def _geometry_3d(params: dict, kind: str) -> ChannelGeometry:
    _require(params, kind, "R_um", "L_um", "D_um2_per_s")
    try:
        return ChannelGeometry(R=params["R_um"], L=params["L_um"],
                               D=params["D_um2_per_s"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _receiver_1d(params: dict, kind: str) -> Receiver1D:
    _require(params, kind, "L_um", "D_um2_per_s")
    try:
        return Receiver1D(L=params["L_um"], D=params["D_um2_per_s"],
                          r_x=params.get("r_x_um", 0.0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_alpha(params: dict) -> float:
    if "alpha" in params:
        return params["alpha"]
    logger.info("alpha not given; defaulting to the calibrated value %.4f",
                REFERENCE_ALPHA)
    return REFERENCE_ALPHA


def _alpha_grid(params: dict, lo: float, hi: float, points: int) -> np.ndarray:
    a_min = params.get("alpha_min", lo)
    a_max = params.get("alpha_max", hi)
    n = params.get("alpha_points", points)
    if n < 1:
        raise ConfigError(f"alpha grid is empty (alpha_points={n})")
    if n > 1 and not a_max > a_min:
        raise ConfigError(f"alpha grid not monotone: [{a_min}, {a_max}]")
    return np.linspace(a_min, a_max, n)


def _meta_common(spec: ExperimentSpec, params: dict) -> dict:
    meta = {"tool": "egmc", "tool_version": __version__, "kind": spec.kind}
    meta.update(params)
    meta["format"] = spec.format
    return meta


# ---------------------------------------------------------------------------
# experiment executors: each returns (meta, columns, rows)

def _exp_run1d(spec: ExperimentSpec):
    p = spec.params
    receiver = _receiver_1d(p, "run1d")
    n_steps = p.get("n_steps", 100)
    dt = p.get("dt_s", receiver.L ** 2 / (receiver.D * n_steps))
    alpha = _resolve_alpha(p)
    seed = p.get("seed", DEFAULT_SEED)
    resolved = {"L_um": receiver.L, "D_um2_per_s": receiver.D,
                "r_x_um": receiver.r_x, "dt_s": dt, "n_steps": n_steps,
                "n_particles": p.get("n_particles", DEFAULT_PARTICLES),
                "alpha": alpha, "seed": seed,
                "n_streams": p.get("n_streams", 1),
                "record_positions": p.get("record_positions", True)}
    config = RunConfig(geometry=receiver, dt=dt, n_steps=n_steps,
                       alpha=alpha, seed=seed,
                       n_particles=resolved["n_particles"],
                       record_positions=resolved["record_positions"],
                       n_streams=resolved["n_streams"])
    record = run_1d(config, threads=spec.threads)

    meta = _meta_common(spec, resolved)
    meta["absorbed_total"] = int(record.counts.sum())
    meta["survivors"] = record.survivors
    if record.positions is not None and record.positions.shape[0]:
        index = absorption_index_1d(record, receiver)
        meta["absorption_index_um"] = index
        meta["scaled_absorption_index"] = index / config.step_scale
    columns = ["step", "time_s", "absorbed_count", "cumulative_fraction"]
    cum = record.cumulative_fraction()
    rows = [(i + 1, (i + 1) * dt, int(record.counts[i]), cum[i])
            for i in range(n_steps)]
    return meta, columns, rows


def _exp_run3d(spec: ExperimentSpec):
    p = spec.params
    geom = _geometry_3d(p, "run3d")
    dt = p.get("dt_s")
    n_steps = p.get("n_steps")
    if dt is None and n_steps is None:
        raise ConfigError("run3d: give dt_s, n_steps or both")
    if dt is None:
        dt = 6.0 * peak_time(geom) / n_steps
    if n_steps is None:
        n_steps = default_step_count(geom, dt)
    alpha = _resolve_alpha(p)
    seed = p.get("seed", DEFAULT_SEED)
    resolved = {"R_um": geom.R, "L_um": geom.L, "D_um2_per_s": geom.D,
                "dt_s": dt, "n_steps": n_steps,
                "n_particles": p.get("n_particles", DEFAULT_PARTICLES),
                "alpha": alpha, "seed": seed,
                "n_streams": p.get("n_streams", 1),
                "record_positions": p.get("record_positions", False)}
    config = RunConfig(geometry=geom, dt=dt, n_steps=n_steps, alpha=alpha,
                       seed=seed, n_particles=resolved["n_particles"],
                       record_positions=resolved["record_positions"],
                       n_streams=resolved["n_streams"])
    record = run_3d(config, threads=spec.threads)
    curve = discretize(geom, dt, n_steps)
    report = error_report(record, curve, config)

    meta = _meta_common(spec, resolved)
    meta.update({
        "absorbed_total": int(record.counts.sum()),
        "survivors": record.survivors,
        "isdcd": report.isdcd,
        "chi2_red": report.chi2_red,
        "n_dof": report.n_dof,
        "step_length_ratio": report.step_length_ratio,
        "locality_ok": report.locality_ok,
    })
    columns = ["step", "time_s", "absorbed_count", "cumulative_fraction",
               "analytic_cumulative", "analytic_per_step_fraction"]
    cum = record.cumulative_fraction()
    rows = [(i + 1, curve.times[i], int(record.counts[i]), cum[i],
             curve.cumulative[i], curve.per_step_fraction[i])
            for i in range(n_steps)]
    return meta, columns, rows


def _calibration_rows(result):
    rows = []
    for j in range(result.grid.size):
        err = (result.per_alpha_stderr[j]
               if result.per_alpha_stderr is not None else float("nan"))
        rows.append((result.grid[j], result.per_alpha_metric[j], err))
    return rows


def _exp_calibrate1d(spec: ExperimentSpec):
    p = spec.params
    receiver = _receiver_1d(p, "calibrate1d")
    n_steps = p.get("n_steps", 100)
    t_factor = p.get("t_factor", 1.0)
    dt = p.get("dt_s", t_factor * receiver.L ** 2 / (receiver.D * n_steps))
    grid = _alpha_grid(p, 0.0, 1.5, 13)
    seed = p.get("seed", DEFAULT_SEED)
    n_particles = p.get("n_particles", DEFAULT_PARTICLES)
    result = calibrate_1d(receiver, dt, n_steps=n_steps,
                          n_particles=n_particles, alpha_grid=grid,
                          seed=seed, threads=spec.threads)
    resolved = {"L_um": receiver.L, "D_um2_per_s": receiver.D,
                "r_x_um": receiver.r_x, "dt_s": dt, "n_steps": n_steps,
                "n_particles": n_particles, "seed": seed,
                "alpha_min": float(grid[0]), "alpha_max": float(grid[-1]),
                "alpha_points": int(grid.size)}
    meta = _meta_common(spec, resolved)
    meta.update({"alpha_opt": result.alpha_opt,
                 "alpha_stderr": result.alpha_stderr,
                 "fit_slope": result.fit_coefficients[0],
                 "fit_intercept": result.fit_coefficients[1]})
    columns = ["alpha", "scaled_absorption_index", "stderr"]
    return meta, columns, _calibration_rows(result)


def _exp_calibrate3d(spec: ExperimentSpec):
    p = spec.params
    geom = _geometry_3d(p, "calibrate3d")
    n_steps = p.get("n_steps", 100)
    dt = p.get("dt_s", 6.0 * peak_time(geom) / n_steps)
    grid = _alpha_grid(p, 0.4, 1.2, 9)
    n_repeats = p.get("n_repeats", 20)
    seed = p.get("seed", DEFAULT_SEED)
    n_particles = p.get("n_particles", DEFAULT_PARTICLES)
    result = calibrate_3d(geom, dt, n_steps, n_particles=n_particles,
                          alpha_grid=grid, n_repeats=n_repeats, seed=seed,
                          threads=spec.threads)
    resolved = {"R_um": geom.R, "L_um": geom.L, "D_um2_per_s": geom.D,
                "dt_s": dt, "n_steps": n_steps, "n_particles": n_particles,
                "n_repeats": n_repeats, "seed": seed,
                "alpha_min": float(grid[0]), "alpha_max": float(grid[-1]),
                "alpha_points": int(grid.size)}
    meta = _meta_common(spec, resolved)
    a, b, c = result.fit_coefficients
    meta.update({"alpha_opt": result.alpha_opt,
                 "alpha_stderr": result.alpha_stderr,
                 "fit_a": a, "fit_b": b, "fit_c": c})
    columns = ["alpha", "isdcd_mean", "isdcd_stderr"]
    return meta, columns, _calibration_rows(result)


def _exp_noise(spec: ExperimentSpec):
    p = spec.params
    geom = _geometry_3d(p, "noise")
    n_steps = p.get("n_steps", FIG7_STEPS)
    dt = p.get("dt_s", 6.0 * peak_time(geom) / n_steps)
    alpha = _resolve_alpha(p)
    n_repeats = p.get("n_repeats", FIG7_REPEATS)
    seed = p.get("seed", DEFAULT_SEED)
    n_particles = p.get("n_particles", DEFAULT_PARTICLES)
    config = RunConfig(geometry=geom, dt=dt, n_steps=n_steps, alpha=alpha,
                       seed=seed, n_particles=n_particles)
    profile = poisson_noise_profile(config, n_repeats, threads=spec.threads)
    resolved = {"R_um": geom.R, "L_um": geom.L, "D_um2_per_s": geom.D,
                "dt_s": dt, "n_steps": n_steps, "n_particles": n_particles,
                "alpha": alpha, "n_repeats": n_repeats, "seed": seed}
    meta = _meta_common(spec, resolved)
    meta["inside_band_fraction"] = profile.inside_band_fraction()
    band = profile.band_halfwidth()
    columns = ["step", "time_s", "measured_std", "poisson_std", "band_halfwidth"]
    rows = [(i + 1, profile.times[i], profile.measured_std[i],
             profile.predicted_std[i], band[i]) for i in range(n_steps)]
    return meta, columns, rows


_INACCURACY_COLUMNS = ["R_um", "L_um", "D_um2_per_s", "dt_s", "step_length_um",
                       "step_length_ratio", "isdcd_egmc", "isdcd_mc",
                       "relative_inaccuracy", "locality_ok"]


def _inaccuracy_row(geom: ChannelGeometry, cell):
    return (geom.R, geom.L, geom.D, cell.dt, cell.step_length,
            cell.step_length_ratio, cell.isdcd_egmc, cell.isdcd_mc,
            cell.relative_inaccuracy, cell.locality_ok)


def default_dt_ladder(geom: ChannelGeometry,
                      ratios=FIG9_STEP_RATIOS) -> list[float]:
    """Step sizes hitting the given sqrt(2 D dt)/(L-R) ratios."""
    return [(rho * geom.gap) ** 2 / (2.0 * geom.D) for rho in ratios]


def _exp_inaccuracy(spec: ExperimentSpec):
    p = spec.params
    geom = _geometry_3d(p, "inaccuracy")
    dts = p.get("dt_list_s", default_dt_ladder(geom))
    if not dts:
        raise ConfigError("inaccuracy: empty step-size sweep")
    if any(b <= a for a, b in zip(dts, dts[1:])):
        raise ConfigError("inaccuracy: dt_list_s must be strictly increasing")
    alpha = _resolve_alpha(p)
    seed = p.get("seed", DEFAULT_SEED)
    n_particles = p.get("n_particles", DEFAULT_PARTICLES)
    sub_seeds = derive_seeds(seed, len(dts), salt=23)
    rows = []
    for dt, sub in zip(dts, sub_seeds):
        cell = inaccuracy_cell(geom, dt, sub, n_particles=n_particles,
                               alpha=alpha, threads=spec.threads)
        rows.append(_inaccuracy_row(geom, cell))
    resolved = {"R_um": geom.R, "L_um": geom.L, "D_um2_per_s": geom.D,
                "dt_list_s": list(dts), "alpha": alpha,
                "n_particles": n_particles, "seed": seed}
    meta = _meta_common(spec, resolved)
    return meta, _INACCURACY_COLUMNS, rows


# ---------------------------------------------------------------------------
# figure reproductions

def _repro_fig4(spec: ExperimentSpec, seed, n_particles):
    receivers = [Receiver1D(L=L, D=D)
                 for L in FIG4_L_VALUES for D in FIG4_D_VALUES]
    result = calibrate_1d_averaged(receivers, n_steps=FIG4_STEPS,
                                   n_particles=n_particles, seed=seed,
                                   threads=spec.threads)
    meta = {"L_values_um": list(FIG4_L_VALUES),
            "D_values_um2_per_s": list(FIG4_D_VALUES),
            "n_steps": FIG4_STEPS,
            "alpha_opt": result.alpha_opt,
            "alpha_stderr": result.alpha_stderr,
            "fit_slope": result.fit_coefficients[0],
            "fit_intercept": result.fit_coefficients[1]}
    columns = ["alpha", "scaled_absorption_index_mean", "stderr"]
    rows = [(result.grid[j], result.per_alpha_metric[j],
             result.per_alpha_stderr[j]) for j in range(result.grid.size)]
    return meta, columns, rows


def _repro_fig5(spec: ExperimentSpec, seed, n_particles):
    columns = ["L_um", "step", "time_s", "analytic_hit_rate",
               "egmc_hit_rate", "mc_hit_rate"]
    rows = []
    case_seeds = derive_seeds(seed, 2 * len(FIG5_CASES), salt=31)
    for c, (R, L, D) in enumerate(FIG5_CASES):
        geom = ChannelGeometry(R=R, L=L, D=D)
        dt = 6.0 * peak_time(geom) / FIG5_STEPS
        curve = discretize(geom, dt, FIG5_STEPS)
        rates = {}
        for idx, alpha in enumerate((REFERENCE_ALPHA, 0.0)):
            config = RunConfig(geometry=geom, dt=dt, n_steps=FIG5_STEPS,
                               alpha=alpha, seed=case_seeds[2 * c + idx],
                               n_particles=n_particles)
            record = run_3d(config, threads=spec.threads)
            rates[alpha] = record.counts / (n_particles * dt)
        for i in range(FIG5_STEPS):
            rows.append((L, i + 1, curve.times[i], curve.hit_rate[i],
                         rates[REFERENCE_ALPHA][i], rates[0.0][i]))
    meta = {"cases_R_um": [c[0] for c in FIG5_CASES],
            "cases_L_um": [c[1] for c in FIG5_CASES],
            "cases_D_um2_per_s": [c[2] for c in FIG5_CASES],
            "n_steps": FIG5_STEPS, "alpha": REFERENCE_ALPHA}
    return meta, columns, rows


def _repro_fig6(spec: ExperimentSpec, seed, n_particles):
    R, L, D = FIG6_CASE
    sub = ExperimentSpec(kind="calibrate3d",
                         params={"R_um": R, "L_um": L, "D_um2_per_s": D,
                                 "n_steps": FIG6_STEPS,
                                 "n_repeats": spec.params.get("n_repeats", FIG6_REPEATS),
                                 "seed": seed, "n_particles": n_particles},
                         threads=spec.threads)
    return _exp_calibrate3d(sub)


def _repro_fig7(spec: ExperimentSpec, seed, n_particles):
    R, L, D = FIG7_CASE
    sub = ExperimentSpec(kind="noise",
                         params={"R_um": R, "L_um": L, "D_um2_per_s": D,
                                 "n_steps": FIG7_STEPS,
                                 "n_repeats": spec.params.get("n_repeats", FIG7_REPEATS),
                                 "seed": seed, "n_particles": n_particles},
                         threads=spec.threads)
    return _exp_noise(sub)


def _repro_fig8(spec: ExperimentSpec, seed, n_particles):
    from .metrics import chi2_red  # local import keeps module load light
    n_repeats = spec.params.get("n_repeats", FIG8_REPEATS)
    columns = ["R_um", "L_um", "D_um2_per_s", "n_steps", "alpha_opt",
               "alpha_stderr", "chi2_red_opt", "chi2_red_alpha0"]
    rows = []
    results = []
    case_seeds = derive_seeds(seed, 3 * len(FIG8_CASES), salt=37)
    for c, (R, L, D, n_steps) in enumerate(FIG8_CASES):
        geom = ChannelGeometry(R=R, L=L, D=D)
        dt = 6.0 * peak_time(geom) / n_steps
        result = calibrate_3d(geom, dt, n_steps, n_particles=n_particles,
                              n_repeats=n_repeats, seed=case_seeds[3 * c],
                              threads=spec.threads)
        results.append(result)
        curve = discretize(geom, dt, n_steps)
        chi2 = {}
        for idx, alpha in enumerate((result.alpha_opt, 0.0)):
            config = RunConfig(geometry=geom, dt=dt, n_steps=n_steps,
                               alpha=alpha, seed=case_seeds[3 * c + 1 + idx],
                               n_particles=n_particles)
            record = run_3d(config, threads=spec.threads)
            chi2[idx] = chi2_red(record.counts, curve.per_step_fraction,
                                 n_particles)
        rows.append((R, L, D, n_steps, result.alpha_opt, result.alpha_stderr,
                     chi2[0], chi2[1]))
    mean, err = weighted_alpha_mean(results)
    meta = {"n_repeats": n_repeats, "weighted_alpha_mean": mean,
            "weighted_alpha_stderr": err}
    return meta, columns, rows


def _repro_fig9(spec: ExperimentSpec, seed, n_particles):
    rows = []
    case_seeds = derive_seeds(seed, len(FIG9_CASES), salt=41)
    for c, (R, L, D) in enumerate(FIG9_CASES):
        geom = ChannelGeometry(R=R, L=L, D=D)
        sub_seeds = derive_seeds(case_seeds[c], len(FIG9_STEP_RATIOS), salt=43)
        for dt, sub in zip(default_dt_ladder(geom), sub_seeds):
            cell = inaccuracy_cell(geom, dt, sub, n_particles=n_particles,
                                   threads=spec.threads)
            rows.append(_inaccuracy_row(geom, cell))
    meta = {"step_ratios": list(FIG9_STEP_RATIOS), "alpha": REFERENCE_ALPHA,
            "cases_R_um": [c[0] for c in FIG9_CASES],
            "cases_L_um": [c[1] for c in FIG9_CASES],
            "cases_D_um2_per_s": [c[2] for c in FIG9_CASES]}
    return meta, _INACCURACY_COLUMNS, rows


_FIGURE_BUILDERS = {"fig4": _repro_fig4, "fig5": _repro_fig5,
                    "fig6": _repro_fig6, "fig7": _repro_fig7,
                    "fig8": _repro_fig8, "fig9": _repro_fig9}


def _exp_repro(spec: ExperimentSpec):
    figure = spec.params.get("figure")
    if figure not in FIGURES:
        raise ConfigError(
            f"repro: figure must be one of {', '.join(FIGURES)}, got {figure!r}")
    seed = spec.params.get("seed", DEFAULT_SEED)
    n_particles = spec.params.get("n_particles", DEFAULT_PARTICLES)
    meta, columns, rows = _FIGURE_BUILDERS[figure](spec, seed, n_particles)
    base = _meta_common(spec, {"figure": figure, "seed": seed,
                               "n_particles": n_particles})
    if "n_repeats" in spec.params:
        base["n_repeats"] = spec.params["n_repeats"]
    base.update(meta)
    return base, columns, rows


_EXECUTORS = {"run1d": _exp_run1d, "run3d": _exp_run3d,
              "calibrate1d": _exp_calibrate1d, "calibrate3d": _exp_calibrate3d,
              "noise": _exp_noise, "inaccuracy": _exp_inaccuracy,
              "repro": _exp_repro}


# ---------------------------------------------------------------------------
# result files

def _fmt_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt_value(v) for v in value)
    return str(value)


def write_csv(path: Path, meta: dict, columns, rows):
    buffer = io.StringIO()
    for key, value in meta.items():
        buffer.write(f"# {key}={_fmt_value(value)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt_value(v) for v in row])
    Path(path).write_text(buffer.getvalue(), encoding="utf-8")


def _json_safe(value):
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_json(path: Path, meta: dict, columns, rows):
    payload = {
        "meta": {k: _json_safe(v) for k, v in meta.items()},
        "columns": list(columns),
        "rows": [[_json_safe(v) for v in row] for row in rows],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_result(path):
    """Parse a result file back into (meta, columns, rows of strings)."""
    path = Path(path)
    if path.suffix == ".json":
        payload = json.loads(path.read_text(encoding="utf-8"))
        return payload["meta"], payload["columns"], payload["rows"]
    meta: dict = {}
    columns: list[str] = []
    rows: list[list[str]] = []
    with path.open(encoding="utf-8", newline="") as handle:
        table_lines = []
        for line in handle:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value
            else:
                table_lines.append(line)
        reader = csv.reader(table_lines)
        for i, row in enumerate(reader):
            if i == 0:
                columns = row
            elif row:
                rows.append(row)
    return meta, columns, rows


def spec_from_meta(meta: dict, output_path=None,
                   threads: int = 1) -> ExperimentSpec:
    """Rebuild the experiment spec embedded in a result file's metadata."""
    if "kind" not in meta:
        raise ConfigError("metadata does not name an experiment kind")
    params = {}
    for key, parser in CONFIG_KEYS.items():
        if key in ("kind", "out", "format", "plot", "threads"):
            continue
        if key in meta:
            value = meta[key]
            params[key] = parser(value) if isinstance(value, str) else value
    return ExperimentSpec(kind=str(meta["kind"]), params=params,
                          output_path=output_path,
                          format=str(meta.get("format", "csv")),
                          plot=False, threads=threads)


def _check_writable(path: Path):
    parent = path.resolve().parent
    if not parent.is_dir():
        raise OSError(f"output directory does not exist: {parent}")
    if not os.access(parent, os.W_OK):
        raise OSError(f"output directory is not writable: {parent}")
    if path.exists() and not os.access(path, os.W_OK):
        raise OSError(f"output file is not writable: {path}")


def run_experiment(spec: ExperimentSpec) -> Path:
    """Execute one experiment and write its result file.

    Returns the output path.  Raises ConfigError for invalid specs, OSError
    for unwritable outputs and CalibrationError/UndefinedStatisticError for
    numerical failures; the CLI maps these to exit codes 2, 3 and 4.
    """
    out_path = spec.resolved_output_path()
    _check_writable(out_path)
    started = time.perf_counter()
    meta, columns, rows = _EXECUTORS[spec.kind](spec)
    elapsed = time.perf_counter() - started
    logger.info("%s finished in %.2f s (%d rows)", spec.kind, elapsed, len(rows))
    if spec.format == "json":
        write_json(out_path, meta, columns, rows)
    else:
        write_csv(out_path, meta, columns, rows)
    if spec.render_plot:
        from . import figures
        png_path = out_path.with_suffix(".png")
        figures.render(meta, columns, rows, png_path)
        logger.info("figure written to %s", png_path)
    return out_path
