"""Thin scikit-learn-style wrapper around the simulation loop.

The library itself is functional; this estimator exists so the simulator
slots into sklearn tooling (``get_params``/``set_params``, ``clone``, grid
search over paradigms or mutation scales). ``fit`` ignores its data
arguments — evolution here is self-play, there is no training set.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .config import ConfigError
from .evolution import run_simulation
from .games import get_game
from .metrics import trial_summary
from .mutation import MutationParams
from .payoff import EngineParams


class EvolutionSimulator(BaseEstimator):
    """Evolve a population of stochastic Moore machines.

    Parameters mirror the run-config keys. After ``fit``:

    * ``records_``  — list of per-generation records (trial-major when
      ``trials > 1``: ``records_[trial][generation]``)
    * ``trial_means_`` — post-burn-in mean score per trial
    * ``score_`` — mean of ``trial_means_``
    """

    def __init__(self, game="prisoners_dilemma", paradigm="a", n_agents=20,
                 n_states=2, generations=300, trials=1, burn_in=100,
                 sigma=0.2, mechanism="pairwise", boundary="clamp",
                 backend="marginal", seed=0):
        self.game = game
        self.paradigm = paradigm
        self.n_agents = n_agents
        self.n_states = n_states
        self.generations = generations
        self.trials = trials
        self.burn_in = burn_in
        self.sigma = sigma
        self.mechanism = mechanism
        self.boundary = boundary
        self.backend = backend
        self.seed = seed

    def fit(self, X=None, y=None):
        if self.burn_in >= self.generations:
            raise ConfigError(
                f"burn_in: must be below generations "
                f"({self.burn_in} >= {self.generations})")
        game = get_game(self.game)
        mutation = MutationParams(sigma=self.sigma, mechanism=self.mechanism,
                                  boundary=self.boundary)
        engine = EngineParams(backend=self.backend)
        self.records_ = [
            run_simulation(self.n_agents, self.n_states, self.generations,
                           self.paradigm, game, mutation, engine,
                           seed=self.seed, trial=t)
            for t in range(self.trials)]
        self.trial_means_ = np.array(
            [trial_summary(r, self.burn_in).mean_score for r in self.records_])
        self.score_ = float(self.trial_means_.mean())
        if self.trials == 1:
            self.records_ = self.records_[0]
        return self

    def score(self, X=None, y=None) -> float:
        """Mean post-burn-in score across trials (higher = more cooperation)."""
        if not hasattr(self, "score_"):
            raise ConfigError("call fit() before score()")
        return self.score_
