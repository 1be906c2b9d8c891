"""Run configuration: schema, defaults, and file loading.

A run is described by a flat key-value mapping, loadable from YAML or JSON.
Unknown keys and out-of-range values raise :class:`ConfigError` naming the
offending key, so a typo in a config file fails before any compute starts.
"""

from __future__ import annotations

import dataclasses
import json
import secrets
from dataclasses import dataclass, field

import yaml

from .evolution import get_paradigm
from .games import get_game
from .mutation import MutationParams
from .payoff import EngineParams

KINDS = ("evolve", "sweep", "validate-mutation", "payoff", "figures")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    kind: str = "evolve"
    game: object = "prisoners_dilemma"   # name or {"name", "payoff"} mapping
    paradigm: object = "a"               # label or explicit triple mapping
    n_agents: int = 20
    n_states: int = 2
    generations: int = 300
    trials: int = 10
    burn_in: int = 100
    window: int = 5                      # smoothing window for ratio plots
    # mutation; sigma and boundary default per experiment kind (see
    # __post_init__): evolution runs use the clamped transfer at sigma 0.2,
    # which is the regime where trigger strategies crystallize and
    # cooperation emerges, while the distribution-validation harness uses
    # the reflecting transfer at sigma 0.1, whose stationary law is exactly
    # the uniform simplex
    sigma: float | None = None
    ops_per_vector: int = 1
    mechanism: str = "pairwise"
    boundary: str | None = None
    g_flip_rate: float = 0.0
    # payoff engine
    backend: str = "marginal"
    tol: float = 1e-6
    max_iter: int = 100
    k: int = 100
    reps: int = 100
    action_update: str = "current"
    survival_eval: str = "parents"
    # mutation-validation harness
    dims: tuple = (2, 3, 4, 5, 6, 7, 8)
    iterations: int = 100_000
    bins: int = 20
    # bookkeeping
    seed: int | None = None              # generated and recorded when absent
    out_dir: str = "runs/latest"
    plot: bool = True
    snapshot_every: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind: unknown value {self.kind!r}; choose from {KINDS}")
        for key in ("n_agents", "generations", "trials", "window"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key}: must be >= 1, got {getattr(self, key)}")
        if self.n_agents < 2:
            raise ConfigError(f"n_agents: must be >= 2, got {self.n_agents}")
        if self.n_states < 1:
            raise ConfigError(f"n_states: must be >= 1, got {self.n_states}")
        if self.burn_in < 0:
            raise ConfigError(f"burn_in: must be >= 0, got {self.burn_in}")
        if self.burn_in >= self.generations:
            raise ConfigError(
                f"burn_in: must be below generations "
                f"({self.burn_in} >= {self.generations})")
        if self.seed is None:
            self.seed = secrets.randbits(32)
        harness = self.kind == "validate-mutation"
        if self.sigma is None:
            self.sigma = 0.1 if harness else 0.2
        if self.boundary is None:
            self.boundary = "reflect" if harness else "clamp"
        self.dims = tuple(int(d) for d in self.dims)
        if any(d < 2 for d in self.dims):
            raise ConfigError(f"dims: every dimension must be >= 2, got {self.dims}")
        try:
            get_game(self.game)
        except ValueError as e:
            raise ConfigError(f"game: {e}") from e
        try:
            get_paradigm(self.paradigm)
        except ValueError as e:
            raise ConfigError(f"paradigm: {e}") from e
        # delegate range checks on the grouped parameters
        try:
            self.mutation_params()
        except ValueError as e:
            raise ConfigError(f"mutation parameters: {e}") from e
        try:
            self.engine_params()
        except ValueError as e:
            raise ConfigError(f"engine parameters: {e}") from e

    def mutation_params(self) -> MutationParams:
        return MutationParams(sigma=self.sigma, ops_per_vector=self.ops_per_vector,
                              mechanism=self.mechanism, boundary=self.boundary,
                              g_flip_rate=self.g_flip_rate)

    def engine_params(self) -> EngineParams:
        return EngineParams(backend=self.backend, tol=self.tol,
                            max_iter=self.max_iter, k=self.k, reps=self.reps,
                            action_update=self.action_update)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["dims"] = list(self.dims)
        return d


_FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)}


def config_from_mapping(mapping: dict, **overrides) -> RunConfig:
    """Build a RunConfig from a plain mapping, rejecting unknown keys."""
    if not isinstance(mapping, dict):
        raise ConfigError(
            f"config root must be a mapping, got {type(mapping).__name__}")
    merged = dict(mapping)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(merged) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    try:
        return RunConfig(**merged)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def load_config(path, **overrides) -> RunConfig:
    """Load a YAML or JSON config file; CLI flags arrive as overrides."""
    with open(path) as f:
        text = f.read()
    try:
        if str(path).endswith(".json"):
            mapping = json.loads(text)
        else:
            mapping = yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f"{path}: cannot parse: {e}") from e
    if mapping is None:
        mapping = {}
    try:
        return config_from_mapping(mapping, **overrides)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from e
