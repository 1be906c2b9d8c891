"""Generational loop: selection paradigms, reproduction, survival.

Each generation evaluates the population's pairwise payoffs, picks parents
with the reproductive method, mutates one batch of offspring, and then runs
survival selection over a pool of twice the population size:

* overlap paradigms: the pool is the current population plus one offspring
  per selected parent;
* non-overlap paradigms: parents die, so each selected parent contributes a
  brood of two — one exact copy and one mutant — and survival selects among
  offspring only. The faithful copy is what lets a good genotype persist
  across generations when parents are excluded; with an all-mutant brood the
  per-generation mutation load washes out any strategy selection builds.

Either way survival chooses n of 2n candidates, which keeps selection
pressure comparable across the paradigm table. Candidates are scored by
their mean per-opponent payoff against the current population (a full
candidate-vs-candidate tournament is available via ``survival_eval``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import seeds
from .automaton import SmmGenotype, random_genotype, to_dict
from .games import GameSpec
from .metrics import homogeneity
from .mutation import MutationParams, mutate_genotype
from .payoff import EngineParams, PairwiseMatrix, cross_payoffs, pairwise_matrix

log = logging.getLogger(__name__)

SELECTION_METHODS = ("truncation", "roulette", "uniform")


class EvolutionError(ValueError):
    pass


@dataclass(frozen=True)
class SelectionParadigm:
    reproductive: str
    survival: str
    overlap: bool
    label: str = ""

    def __post_init__(self):
        for m in (self.reproductive, self.survival):
            if m not in SELECTION_METHODS:
                raise EvolutionError(f"unknown selection method {m!r}")


PARADIGMS = {
    "a": SelectionParadigm("truncation", "truncation", True, "a"),
    "b": SelectionParadigm("roulette", "truncation", True, "b"),
    "c": SelectionParadigm("truncation", "truncation", False, "c"),
    "d": SelectionParadigm("uniform", "truncation", False, "d"),
    "e": SelectionParadigm("truncation", "uniform", True, "e"),
    "f": SelectionParadigm("roulette", "uniform", True, "f"),
    "g": SelectionParadigm("truncation", "uniform", False, "g"),
    "h": SelectionParadigm("roulette", "uniform", False, "h"),
    "i": SelectionParadigm("uniform", "uniform", True, "i"),
}


def get_paradigm(spec) -> SelectionParadigm:
    """Resolve a paradigm from a label like "a"/"(a)" or an explicit triple."""
    if isinstance(spec, SelectionParadigm):
        return spec
    if isinstance(spec, str):
        label = spec.strip().strip("()")
        try:
            return PARADIGMS[label]
        except KeyError:
            raise EvolutionError(
                f"unknown paradigm label {spec!r}; labels are (a)-(i)") from None
    if isinstance(spec, dict):
        p = SelectionParadigm(spec["reproductive"], spec["survival"],
                              bool(spec["overlap"]), spec.get("label", ""))
        if p.label:
            expected = PARADIGMS.get(p.label)
            if expected is None or (expected.reproductive, expected.survival,
                                    expected.overlap) != (p.reproductive,
                                                          p.survival, p.overlap):
                raise EvolutionError(
                    f"label {p.label!r} does not match the paradigm table entry")
        return p
    raise EvolutionError(f"cannot interpret paradigm spec of type {type(spec).__name__}")


def select(fitness: np.ndarray, method: str, count: int,
           rng: np.random.Generator) -> np.ndarray:
    """Pick ``count`` distinct indices by fitness; returns them in draw order."""
    fitness = np.asarray(fitness, dtype=np.float64)
    n = fitness.shape[0]
    if count > n:
        raise EvolutionError(f"cannot select {count} from a pool of {n}")
    if method == "truncation":
        # descending fitness, ties broken by lower index
        order = np.lexsort((np.arange(n), -fitness))
        return order[:count]
    if method == "uniform":
        return rng.choice(n, size=count, replace=False)
    if method == "roulette":
        if np.any(fitness < 0):
            raise EvolutionError("roulette selection requires nonnegative fitness")
        total = fitness.sum()
        if total == 0:
            log.warning("roulette selection saw all-zero fitness; falling back to uniform")
            return rng.choice(n, size=count, replace=False)
        chosen = []
        weights = fitness.copy()
        for _ in range(count):
            total = weights.sum()
            if total == 0:
                remaining = np.flatnonzero(weights >= 0)
                remaining = np.setdiff1d(remaining, chosen, assume_unique=False)
                chosen.extend(rng.choice(remaining, size=count - len(chosen),
                                         replace=False).tolist())
                break
            pick = int(np.searchsorted(np.cumsum(weights), rng.random() * total,
                                       side="right").clip(0, n - 1))
            chosen.append(pick)
            weights[pick] = 0.0
        return np.array(chosen, dtype=np.int64)
    raise EvolutionError(f"unknown selection method {method!r}")


@dataclass
class GenerationRecord:
    generation: int
    fitness: np.ndarray
    mean_score: float
    ratio_cc: float
    ratio_cd: float
    ratio_dd: float
    homogeneity: float
    genotypes: list | None = None


def _record(generation: int, matrix: PairwiseMatrix, pop,
            snapshot: bool) -> GenerationRecord:
    cc, cd, dd = matrix.interaction_ratios()
    return GenerationRecord(
        generation=generation,
        fitness=matrix.fitness(),
        mean_score=matrix.mean_score(),
        ratio_cc=cc, ratio_cd=cd, ratio_dd=dd,
        homogeneity=homogeneity(matrix.mean_horizon_actions()),
        genotypes=[to_dict(g) for g in pop] if snapshot else None)


def run_generation(pop: list, matrix: PairwiseMatrix, paradigm: SelectionParadigm,
                   game: GameSpec, mutation_params: MutationParams,
                   engine_params: EngineParams, rng: np.random.Generator,
                   engine_rng: np.random.Generator | None = None,
                   survival_eval: str = "parents",
                   parents_per_generation: int | None = None):
    """Advance one generation; returns (new population, its pairwise matrix)."""
    n = len(pop)
    fitness = matrix.fitness()
    n_parents = parents_per_generation or n
    parent_idx = select(fitness, paradigm.reproductive, n_parents, rng)
    offspring = [mutate_genotype(pop[parent_idx[o % n_parents]], mutation_params, rng)
                 for o in range(n)]

    if paradigm.overlap:
        candidates = list(pop) + offspring
    else:
        # brood of two per parent: one faithful copy, one mutant
        copies = [pop[parent_idx[o % n_parents]] for o in range(n)]
        candidates = offspring = copies + offspring

    if survival_eval == "tournament":
        pool_matrix = pairwise_matrix(candidates, game, engine_params, engine_rng)
        scores = pool_matrix.fitness() / (len(candidates) - 1)
    elif survival_eval == "parents":
        # per-opponent means keep parent scores (n-1 opponents) comparable
        # with offspring scores (n opponents)
        off_scores = cross_payoffs(offspring, pop, game, engine_params,
                                   engine_rng).mean(axis=1)
        if paradigm.overlap:
            scores = np.concatenate([fitness / (n - 1), off_scores])
        else:
            scores = off_scores
    else:
        raise EvolutionError(f"unknown survival_eval {survival_eval!r}")

    survivors = select(scores, paradigm.survival, n, rng)
    new_pop = [candidates[s] for s in sorted(survivors)]
    new_matrix = pairwise_matrix(new_pop, game, engine_params, engine_rng)
    return new_pop, new_matrix


def run_simulation(n_agents: int, n_states: int, generations: int, paradigm,
                   game: GameSpec, mutation_params: MutationParams | None = None,
                   engine_params: EngineParams | None = None, seed: int = 0,
                   trial: int = 0, survival_eval: str = "parents",
                   parents_per_generation: int | None = None,
                   snapshot_every: int = 0) -> list:
    """Run one trial; returns one GenerationRecord per generation.

    Fully deterministic given (seed, trial): all randomness flows through
    the keyed streams in :mod:`smmevo.seeds`.
    """
    if n_agents < 2:
        raise EvolutionError("n_agents must be >= 2")
    paradigm = get_paradigm(paradigm)
    mutation_params = mutation_params or MutationParams()
    engine_params = engine_params or EngineParams()

    rng0 = seeds.init_rng(seed, trial)
    pop = [random_genotype(n_states, rng0) for _ in range(n_agents)]

    matrix = pairwise_matrix(pop, game, engine_params,
                             seeds.engine_rng(seed, trial, 0))
    records = [_record(0, matrix, pop, snapshot_every > 0)]
    for gen in range(1, generations + 1):
        pop, matrix = run_generation(
            pop, matrix, paradigm, game, mutation_params, engine_params,
            seeds.generation_rng(seed, trial, gen),
            seeds.engine_rng(seed, trial, gen),
            survival_eval, parents_per_generation)
        snapshot = snapshot_every > 0 and (gen % snapshot_every == 0
                                           or gen == generations)
        records.append(_record(gen, matrix, pop, snapshot))
    return records
