"""Evolution of stochastic Moore machines in iterated 2x2 games.

Populations of probabilistic finite-state strategies play repeated games
(prisoner's dilemma, chicken, stag hunt, battle); fitness comes from a
mean-field fixed point, an exact joint Markov chain, or Monte Carlo
rollouts; mutation is a simplex-preserving paired Gaussian transfer; nine
selection paradigms cover the reproductive/survival/overlap design grid.
"""

from .automaton import (SmmGenotype, canonical, from_dict, is_valid,
                        load_file, random_genotype, save_file, to_dict,
                        validate)
from .config import RunConfig, load_config
from .estimator import EvolutionSimulator
from .evolution import (PARADIGMS, SelectionParadigm, get_paradigm,
                        run_generation, run_simulation, select)
from .games import GameSpec, get_game
from .metrics import (chi_square_gof, density_fit, homogeneity,
                      mutation_bias_trace, trial_summary)
from .mutation import MutationParams, mutate_genotype, mutate_vector
from .payoff import (EngineParams, PairwiseResult, joint_chain_payoff,
                     marginal_fixed_point, monte_carlo_payoff,
                     pairwise_matrix, population_fitness)

__all__ = [
    "SmmGenotype", "canonical", "from_dict", "is_valid", "load_file",
    "random_genotype", "save_file", "to_dict", "validate",
    "RunConfig", "load_config",
    "EvolutionSimulator",
    "PARADIGMS", "SelectionParadigm", "get_paradigm", "run_generation",
    "run_simulation", "select",
    "GameSpec", "get_game",
    "chi_square_gof", "density_fit", "homogeneity", "mutation_bias_trace",
    "trial_summary",
    "MutationParams", "mutate_genotype", "mutate_vector",
    "EngineParams", "PairwiseResult", "joint_chain_payoff",
    "marginal_fixed_point", "monte_carlo_payoff", "pairwise_matrix",
    "population_fitness",
]
