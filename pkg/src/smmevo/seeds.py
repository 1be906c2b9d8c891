"""Deterministic derivation of RNG streams from one master seed.

Every random draw in a run comes from numpy's PCG64 generator, constructed
as ``default_rng(SeedSequence(master_seed, spawn_key=key))``. The keys are:

* ``(trial, 0)``            — population initialization for a trial
* ``(trial, 1, generation)`` — selection and mutation within a generation
* ``(trial, 2, generation)`` — payoff-engine sampling (Monte Carlo backend)

Trials and generations therefore never share a stream, so trials can run
concurrently without changing any result.
"""

from __future__ import annotations

import numpy as np

PURPOSE_INIT = 0
PURPOSE_EVOLVE = 1
PURPOSE_ENGINE = 2

PRNG_FAMILY = "numpy.random.PCG64 via default_rng(SeedSequence(seed, spawn_key=key))"


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def init_rng(seed: int, trial: int) -> np.random.Generator:
    return stream(seed, trial, PURPOSE_INIT)


def generation_rng(seed: int, trial: int, generation: int) -> np.random.Generator:
    return stream(seed, trial, PURPOSE_EVOLVE, generation)


def engine_rng(seed: int, trial: int, generation: int) -> np.random.Generator:
    return stream(seed, trial, PURPOSE_ENGINE, generation)
