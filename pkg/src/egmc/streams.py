"""Seeded random-number streams and the Brownian stepping kernel.

All engines draw randomness through :class:`RngStream` so that a run is fully
determined by its seed and stream layout, and so sub-ensembles can be stepped
in parallel without sharing generator state.  Philox is used underneath: it is
counter-based, has a period far beyond 2^64, and seeds derived through
``SeedSequence`` spawn keys are statistically independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """One independent substream of the seeded generator.

    Identical ``(seed, stream_id)`` pairs reproduce the same sample sequence
    bit for bit; distinct stream ids under one seed are independent.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed),
                                    spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))


def derive_seeds(seed: int, n: int, salt: int = 0) -> list[int]:
    """Derive ``n`` reproducible 64-bit sub-seeds for independent runs.

    ``salt`` separates different consumers of the same base seed (e.g. the
    two engines inside a comparison) so their runs stay uncorrelated.
    """
    ss = np.random.SeedSequence(entropy=(int(seed), int(salt)))
    return [int(s) for s in ss.generate_state(n, dtype=np.uint64)]


def gaussian_increment(rng: np.random.Generator, D: float, dt: float,
                       size=None):
    """Sample Brownian displacements: Normal(0, 2*D*dt) per coordinate.

    ``rng`` is a live generator, typically obtained from
    :meth:`RngStream.generator`.  Returns a scalar when ``size`` is None.
    """
    if D <= 0.0:
        raise ValueError(f"diffusion coefficient must be positive, got {D}")
    if dt <= 0.0:
        raise ValueError(f"time step must be positive, got {dt}")
    return rng.normal(0.0, math.sqrt(2.0 * D * dt), size=size)


@dataclass
class ParticleEnsemble:
    """Live positions (micrometres) of the unabsorbed particles.

    ``positions`` has shape (n, d) with d in {1, 3}.  The number of rows only
    ever shrinks over a run: molecules are absorbed, never injected.
    """

    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] not in (1, 3):
            raise ValueError("positions must have shape (n, d) with d in {1, 3}")
        self.positions = pos

    @property
    def alive_count(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]


def step_ensemble(ensemble: ParticleEnsemble, rng: np.random.Generator,
                  D: float, dt: float) -> ParticleEnsemble:
    """Displace every particle by an independent Gaussian increment per axis."""
    if ensemble.alive_count:
        ensemble.positions += gaussian_increment(rng, D, dt,
                                                 size=ensemble.positions.shape)
    else:
        # validate parameters even for the no-op case
        gaussian_increment(rng, D, dt, size=0)
    return ensemble
