"""Estimation of the optimal boundary-shift coefficient alpha.

Two routes: in 1D the scaled absorption index is linear in alpha and the
optimum is the root of that line; in 3D the ISDCD against the analytic
response is a parabola in alpha and the optimum is its vertex, with the
spread over repeated runs supplying the uncertainty.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytic import ChannelGeometry, discretize
from .engines import Receiver1D, RunConfig, absorption_index_1d, run_1d, run_3d
from .errors import CalibrationError, UndefinedStatisticError
from .metrics import isdcd
from .streams import derive_seeds

DEFAULT_ALPHA_GRID_1D = np.linspace(0.0, 1.5, 13)
DEFAULT_ALPHA_GRID_3D = np.linspace(0.4, 1.2, 9)


@dataclass(frozen=True)
class CalibrationResult:
    """Estimated optimum alpha with uncertainty and fit diagnostics.

    ``fit_coefficients`` is (slope, intercept) for the 1D line and (a, b, c)
    for the 3D parabola.  ``per_alpha_metric`` holds the fitted quantity on
    the probed grid: the scaled absorption index in 1D, the mean ISDCD in 3D.
    """

    alpha_opt: float
    alpha_stderr: float
    fit_coefficients: tuple
    grid: np.ndarray
    per_alpha_metric: np.ndarray
    per_alpha_stderr: np.ndarray | None = None


def linear_fit(x, y):
    """Ordinary least squares line fit returning (slope, intercept, covariance).

    The 2x2 covariance uses the residual variance with n-2 degrees of
    freedom, so at least three points are required.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 3:
        raise CalibrationError(f"need at least 3 points for a line fit, got {n}")
    design = np.column_stack([x, np.ones(n)])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coef
    s2 = float(residuals @ residuals) / (n - 2)
    cov = s2 * np.linalg.inv(design.T @ design)
    return float(coef[0]), float(coef[1]), cov


def parabola_fit(x, y):
    """Least squares parabola a*x^2 + b*x + c; returns (a, b, c)."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 3:
        raise CalibrationError(f"need at least 3 points for a parabola fit, got {x.size}")
    a, b, c = np.polyfit(x, np.asarray(y, dtype=np.float64), 2)
    return float(a), float(b), float(c)


def parabola_vertex(a: float, b: float) -> float:
    if a <= 0.0:
        raise CalibrationError(f"parabola is not convex (a={a:.3g}); no minimum")
    return -b / (2.0 * a)


def _line_root(slope, intercept, cov):
    """Root -intercept/slope with first-order error propagation."""
    if slope == 0.0:
        raise CalibrationError("fitted line has zero slope; no root")
    root = -intercept / slope
    d_slope = intercept / slope ** 2
    d_intercept = -1.0 / slope
    var = (d_slope ** 2 * cov[0, 0]
           + 2.0 * d_slope * d_intercept * cov[0, 1]
           + d_intercept ** 2 * cov[1, 1])
    return root, math.sqrt(max(var, 0.0))


def _scaled_index_for_alpha(receiver, dt, n_steps, n_particles, alpha, seed):
    """One 1D run; returns (index/sqrt(D dt), stderr) or None if nothing absorbed."""
    cfg = RunConfig(geometry=receiver, dt=dt, n_steps=n_steps, alpha=alpha,
                    seed=seed, n_particles=n_particles, record_positions=True)
    record = run_1d(cfg)
    try:
        index = absorption_index_1d(record, receiver)
    except UndefinedStatisticError:
        return None
    scale = cfg.step_scale
    offsets = record.positions[:, 0] - receiver.r_x
    stderr = float(offsets.std(ddof=1)) / math.sqrt(offsets.size) if offsets.size > 1 else float("nan")
    return index / scale, stderr / scale


def calibrate_1d(receiver: Receiver1D, dt: float, n_steps: int = 100,
                 n_particles: int = 100_000, alpha_grid=None,
                 seed: int = 0, threads: int = 1) -> CalibrationResult:
    """Fit the scaled absorption index against alpha and return its root.

    Grid points where no particle is absorbed are dropped with a warning;
    fewer than three surviving points is a calibration error.
    """
    grid = DEFAULT_ALPHA_GRID_1D if alpha_grid is None else np.asarray(alpha_grid, dtype=np.float64)
    if grid.size == 0:
        raise CalibrationError("alpha grid is empty")
    seeds = derive_seeds(seed, grid.size, salt=1)

    def one(j):
        return _scaled_index_for_alpha(receiver, dt, n_steps, n_particles,
                                       float(grid[j]), seeds[j])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(grid.size)))
    else:
        results = [one(j) for j in range(grid.size)]

    kept = [j for j, r in enumerate(results) if r is not None]
    if len(kept) < grid.size:
        dropped = [float(grid[j]) for j in range(grid.size) if j not in kept]
        warnings.warn(f"no absorbed particles at alpha={dropped}; grid points dropped")
    if len(kept) < 3:
        raise CalibrationError("fewer than 3 usable grid points; cannot fit a line")

    x = grid[kept]
    y = np.array([results[j][0] for j in kept])
    y_err = np.array([results[j][1] for j in kept])
    slope, intercept, cov = linear_fit(x, y)
    root, root_err = _line_root(slope, intercept, cov)
    return CalibrationResult(
        alpha_opt=root,
        alpha_stderr=root_err,
        fit_coefficients=(slope, intercept),
        grid=x,
        per_alpha_metric=y,
        per_alpha_stderr=y_err,
    )


def calibrate_1d_averaged(receivers, n_steps: int = 100,
                          n_particles: int = 100_000, alpha_grid=None,
                          seed: int = 0, t_factor: float = 1.0,
                          threads: int = 1) -> CalibrationResult:
    """1D calibration averaged over a set of receiver configurations.

    Each configuration runs with dt = t_factor * L^2 / (D * n_steps) so the
    step length is the same fixed fraction of L everywhere, the scaled
    indices are averaged per alpha across configurations, and the line is
    fitted to the means.
    """
    receivers = list(receivers)
    if not receivers:
        raise CalibrationError("need at least one receiver configuration")
    grid = DEFAULT_ALPHA_GRID_1D if alpha_grid is None else np.asarray(alpha_grid, dtype=np.float64)
    if grid.size == 0:
        raise CalibrationError("alpha grid is empty")
    seeds = derive_seeds(seed, len(receivers) * grid.size, salt=2)

    def one(task):
        i, j = task
        rec = receivers[i]
        dt = t_factor * rec.L ** 2 / (rec.D * n_steps)
        out = _scaled_index_for_alpha(rec, dt, n_steps, n_particles,
                                      float(grid[j]), seeds[i * grid.size + j])
        if out is None:
            raise CalibrationError(
                f"no absorbed particles for L={rec.L}, D={rec.D}, alpha={grid[j]}")
        return out[0]

    tasks = [(i, j) for i in range(len(receivers)) for j in range(grid.size)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, tasks))
    else:
        values = [one(t) for t in tasks]
    table = np.array(values).reshape(len(receivers), grid.size)

    y = table.mean(axis=0)
    y_err = (table.std(axis=0, ddof=1) / math.sqrt(len(receivers))
             if len(receivers) > 1 else np.full(grid.size, np.nan))
    slope, intercept, cov = linear_fit(grid, y)
    root, root_err = _line_root(slope, intercept, cov)
    return CalibrationResult(
        alpha_opt=root,
        alpha_stderr=root_err,
        fit_coefficients=(slope, intercept),
        grid=grid,
        per_alpha_metric=y,
        per_alpha_stderr=y_err,
    )


def calibrate_3d(geom: ChannelGeometry, dt: float, n_steps: int,
                 n_particles: int = 100_000, alpha_grid=None,
                 n_repeats: int = 20, seed: int = 0,
                 threads: int = 1) -> CalibrationResult:
    """Locate the ISDCD minimum in alpha by repeated parabola fits.

    Each repeat sweeps the grid with fresh seeds, fits a parabola and takes
    its vertex; the estimate is the mean vertex and the uncertainty the
    standard deviation across repeats.  Repeats whose fit is non-convex or
    whose vertex escapes the probed grid (the grid must bracket the minimum)
    are discarded with a warning; losing the majority is a calibration error.
    """
    grid = DEFAULT_ALPHA_GRID_3D if alpha_grid is None else np.asarray(alpha_grid, dtype=np.float64)
    if grid.size < 3:
        raise CalibrationError("alpha grid needs at least 3 points")
    if n_repeats < 2:
        raise CalibrationError("need at least two repeats for an uncertainty")
    curve = discretize(geom, dt, n_steps)
    seeds = derive_seeds(seed, n_repeats * grid.size, salt=3)

    def one_run(task):
        r, j = task
        cfg = RunConfig(geometry=geom, dt=dt, n_steps=n_steps,
                        alpha=float(grid[j]), seed=seeds[r * grid.size + j],
                        n_particles=n_particles)
        record = run_3d(cfg)
        return isdcd(record.cumulative_fraction(), curve.cumulative)

    tasks = [(r, j) for r in range(n_repeats) for j in range(grid.size)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flat = list(pool.map(one_run, tasks))
    else:
        flat = [one_run(t) for t in tasks]
    table = np.array(flat).reshape(n_repeats, grid.size)

    vertices = []
    lo, hi = float(grid[0]), float(grid[-1])
    for r in range(n_repeats):
        a, b, _ = parabola_fit(grid, table[r])
        if a <= 0.0:
            warnings.warn(f"repeat {r}: non-convex ISDCD fit discarded (a={a:.3g})")
            continue
        vertex = -b / (2.0 * a)
        if not lo <= vertex <= hi:
            warnings.warn(f"repeat {r}: vertex {vertex:.3g} outside the probed "
                          f"grid [{lo:.3g}, {hi:.3g}]; discarded")
            continue
        vertices.append(vertex)
    if len(vertices) <= n_repeats // 2:
        raise CalibrationError(
            f"only {len(vertices)}/{n_repeats} repeats produced a convex fit")

    mean_metric = table.mean(axis=0)
    coeffs = parabola_fit(grid, mean_metric)
    return CalibrationResult(
        alpha_opt=float(np.mean(vertices)),
        alpha_stderr=float(np.std(vertices, ddof=1)),
        fit_coefficients=coeffs,
        grid=grid,
        per_alpha_metric=mean_metric,
        per_alpha_stderr=table.std(axis=0, ddof=1) / math.sqrt(n_repeats),
    )


def weighted_alpha_mean(results) -> tuple[float, float]:
    """Inverse-variance weighted mean of calibrated alphas across settings."""
    results = list(results)
    if not results:
        raise CalibrationError("no calibration results to combine")
    alphas = np.array([r.alpha_opt for r in results])
    errs = np.array([r.alpha_stderr for r in results])
    if np.any(~np.isfinite(errs)) or np.any(errs <= 0.0):
        raise CalibrationError("every result needs a positive alpha_stderr")
    weights = 1.0 / errs ** 2
    mean = float(np.sum(weights * alphas) / np.sum(weights))
    return mean, float(math.sqrt(1.0 / np.sum(weights)))
