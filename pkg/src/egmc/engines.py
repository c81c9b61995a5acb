"""Brownian-dynamics absorption engines.

Conventional Monte Carlo and its effective-geometry variant share one
kernel: per step every particle takes an independent Gaussian step, then any
particle strictly inside the absorption boundary is removed and counted.
The only difference between the two methods is the boundary itself, which
the effective-geometry variant inflates by ``alpha * sqrt(D * dt)``;
``alpha = 0`` is the conventional algorithm.

Runs can be partitioned into independent sub-ensembles, one RNG stream each.
The result depends only on the stream layout, never on how the streams are
scheduled, so thread counts do not affect output bytes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytic import ChannelGeometry, peak_time
from .errors import ConfigError, UndefinedStatisticError
from .streams import RngStream


@dataclass(frozen=True)
class Receiver1D:
    """Half-line absorber at ``r_x`` receiving from a source at ``L > r_x``."""

    L: float
    D: float
    r_x: float = 0.0

    def __post_init__(self):
        if not self.L > self.r_x:
            raise ValueError(f"source must sit beyond the receiver: L={self.L}, r_x={self.r_x}")
        if self.D <= 0.0:
            raise ValueError(f"need D > 0, got {self.D}")


@dataclass(frozen=True)
class RunConfig:
    """Physical and numerical parameters of one simulation run.

    ``record_positions`` defaults by dimension: absorbed positions are kept
    in 1D (needed for the absorption index) and dropped in 3D (memory).
    """

    geometry: ChannelGeometry | Receiver1D
    dt: float
    n_steps: int
    alpha: float
    seed: int
    n_particles: int = 100_000
    record_positions: bool | None = None
    n_streams: int = 1

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigError(f"time step must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ConfigError(f"need at least one step, got {self.n_steps}")
        if self.n_particles < 0:
            raise ConfigError(f"particle count must be non-negative, got {self.n_particles}")
        if self.alpha < 0.0:
            raise ConfigError(f"alpha must be non-negative, got {self.alpha}")
        if self.n_streams < 1:
            raise ConfigError(f"need at least one stream, got {self.n_streams}")
        if self.effective_boundary >= self.source_position:
            raise ConfigError(
                f"effective boundary {self.effective_boundary:.4g} um reaches the "
                f"source at {self.source_position:.4g} um; reduce alpha or dt")

    @property
    def dimension(self) -> int:
        return 1 if isinstance(self.geometry, Receiver1D) else 3

    @property
    def step_scale(self) -> float:
        """The local length scale sqrt(D * dt) of one simulation step."""
        return math.sqrt(self.geometry.D * self.dt)

    @property
    def effective_boundary(self) -> float:
        """Absorption threshold: receiver position plus alpha * sqrt(D*dt)."""
        base = self.geometry.r_x if self.dimension == 1 else self.geometry.R
        return base + self.alpha * self.step_scale

    @property
    def source_position(self) -> float:
        return self.geometry.L

    @property
    def keep_positions(self) -> bool:
        if self.record_positions is None:
            return self.dimension == 1
        return self.record_positions


@dataclass
class AbsorptionRecord:
    """Per-step absorbed counts plus, optionally, the absorbed positions."""

    counts: np.ndarray
    survivors: int
    positions: np.ndarray | None = None

    @property
    def n_particles(self) -> int:
        return int(self.counts.sum()) + self.survivors

    def cumulative_fraction(self) -> np.ndarray:
        return np.cumsum(self.counts) / self.n_particles


def partition_sizes(n_particles: int, n_streams: int) -> list[int]:
    """Split ``n_particles`` across streams; the first ``n % k`` get one extra."""
    base, extra = divmod(n_particles, n_streams)
    return [base + (1 if k < extra else 0) for k in range(n_streams)]


def _run_stream(config: RunConfig, stream_id: int, size: int):
    """Simulate one sub-ensemble on its own RNG stream."""
    d = config.dimension
    rng = RngStream(config.seed, stream_id).generator()
    sigma = math.sqrt(2.0 * config.geometry.D * config.dt)
    boundary = config.effective_boundary

    pos = np.zeros((size, d))
    pos[:, d - 1] = config.geometry.L

    counts = np.zeros(config.n_steps, dtype=np.int64)
    collected: list[np.ndarray] = []
    for i in range(config.n_steps):
        if pos.shape[0]:
            pos += rng.normal(0.0, sigma, size=pos.shape)
        if d == 1:
            coord = pos[:, 0]
        else:
            coord = np.sqrt(np.einsum("ij,ij->i", pos, pos))
        hit = coord < boundary
        n_hit = int(np.count_nonzero(hit))
        counts[i] = n_hit
        if n_hit:
            if config.keep_positions:
                collected.append(pos[hit].copy())
            pos = pos[~hit]
    return counts, collected, pos.shape[0]


def _run(config: RunConfig, threads: int = 1) -> AbsorptionRecord:
    sizes = partition_sizes(config.n_particles, config.n_streams)
    args = [(config, k, size) for k, size in enumerate(sizes)]
    if threads > 1 and config.n_streams > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda a: _run_stream(*a), args))
    else:
        results = [_run_stream(*a) for a in args]

    counts = np.zeros(config.n_steps, dtype=np.int64)
    survivors = 0
    chunks: list[np.ndarray] = []
    for stream_counts, collected, alive in results:
        counts += stream_counts
        survivors += alive
        chunks.extend(collected)
    positions = None
    if config.keep_positions:
        if chunks:
            positions = np.concatenate(chunks, axis=0)
        else:
            positions = np.empty((0, config.dimension))
    return AbsorptionRecord(counts=counts, survivors=survivors, positions=positions)


def run_1d(config: RunConfig, threads: int = 1) -> AbsorptionRecord:
    """Simulate the 1D toy channel: source at L, absorber on x < boundary."""
    if not isinstance(config.geometry, Receiver1D):
        raise ConfigError("run_1d needs a Receiver1D geometry")
    return _run(config, threads=threads)


def run_3d(config: RunConfig, threads: int = 1) -> AbsorptionRecord:
    """Simulate the spherical receiver: source at (0, 0, L), absorb at r < boundary."""
    if not isinstance(config.geometry, ChannelGeometry):
        raise ConfigError("run_3d needs a ChannelGeometry geometry")
    return _run(config, threads=threads)


def absorption_index_1d(record: AbsorptionRecord, receiver: Receiver1D) -> float:
    """Mean signed overshoot of the absorbed positions past the receiver.

    Negative values are the finite-step bias the boundary shift corrects for.
    """
    if record.positions is None:
        raise ValueError("record was produced without absorbed positions")
    if record.positions.shape[0] == 0:
        raise UndefinedStatisticError("no particle was absorbed")
    return float(np.mean(record.positions[:, 0] - receiver.r_x))


def default_step_count(geom: ChannelGeometry, dt: float) -> int:
    """Step-count policy for comparisons: cover six peak times, at least 100."""
    return max(100, math.ceil(6.0 * peak_time(geom) / dt))
