"""End-to-end acceptance suite.

Nine headline checks, one test each, printing an explicit PASS line with
the measured quantity. These run the library at experiment scale (several
minutes total); everything is seeded, so results are reproducible bit for
bit.
"""

import itertools

import numpy as np
import pytest

from smmevo import automaton as am
from smmevo import seeds
from smmevo.evolution import run_simulation
from smmevo.games import battle, prisoners_dilemma
from smmevo.metrics import density_fit, mutation_bias_trace, trial_summary
from smmevo.mutation import MutationParams, advance, sample_simplex, with_mechanism
from smmevo.payoff import (EngineParams, joint_chain_payoff,
                           marginal_fixed_point, monte_carlo_payoff)

SEED = 1
PD = prisoners_dilemma()

# evolution-experiment mutation settings: clamped pairwise transfer at
# sigma 0.2, the regime where near-deterministic trigger strategies form
EVO_MP = MutationParams(sigma=0.2, boundary="clamp")
# distribution-validation settings: reflecting transfer, whose stationary
# law is exactly uniform on the simplex
FIT_MP = MutationParams(sigma=0.1, boundary="reflect")

COOP_THRESHOLD = 2.75  # mean score implying >= 50% mutual cooperation


def _trial_means(label, game, n_trials=10, generations=300, burn_in=100,
                 mutation=EVO_MP):
    means = []
    for trial in range(n_trials):
        records = run_simulation(20, 2, generations, label, game, mutation,
                                 seed=SEED, trial=trial)
        means.append(trial_summary(records, burn_in).mean_score)
    return np.array(means)


def test_01_mutation_unbiasedness():
    """Gene-value histograms fit the simplex marginal; the baseline does not."""
    p_values = {}
    for dim in range(2, 9):
        fit = density_fit(FIT_MP, dim, 100_000, rng=seeds.stream(SEED, 3, dim, 0))
        p_values[dim] = fit.gof.p_value
        assert not fit.gof.rejected(0.05), \
            f"pairwise dim {dim} rejected (p={fit.gof.p_value:.4f})"
    baseline = density_fit(with_mechanism(FIT_MP, "linear_normalization"), 2,
                           100_000, rng=seeds.stream(SEED, 3, 2, 1))
    assert baseline.gof.rejected(0.05), "baseline unexpectedly fit"
    print(f"\nPASS 1 mutation unbiasedness: pairwise p-values "
          f"{ {d: round(p, 3) for d, p in p_values.items()} }, "
          f"baseline p={baseline.gof.p_value:.2e} (rejected)")


def test_02_bias_trace_dominance():
    """Pairwise bias trace ends below the baseline's in >= 8 of 10 streams."""
    params = MutationParams(sigma=0.3, boundary="reflect")
    lin = with_mechanism(params, "linear_normalization")
    wins = 0
    for s in range(10):
        tp = mutation_bias_trace(params, 2, 100_000, rng=seeds.stream(SEED, 4, s, 0))
        tl = mutation_bias_trace(lin, 2, 100_000, rng=seeds.stream(SEED, 4, s, 1))
        wins += tp[-1][1] < tl[-1][1]
    assert wins >= 8, f"pairwise won only {wins}/10 streams"
    print(f"\nPASS 2 bias-trace dominance: pairwise below baseline in {wins}/10 streams")


def test_03_fixed_point_convergence():
    """Median iterations to converge <= 10 over 100 random 2-state pairs."""
    rng = np.random.default_rng(SEED)
    iters = []
    for _ in range(100):
        a, b = am.random_genotype(2, rng), am.random_genotype(2, rng)
        r = marginal_fixed_point(a, b, PD, tol=1e-6)
        assert r.converged
        iters.append(r.iterations)
    med = float(np.median(iters))
    assert med <= 10, f"median {med} iterations"
    print(f"\nPASS 3 fixed-point convergence: median {med} iterations (max {max(iters)})")


def test_04_oracle_equivalence():
    """All three payoff backends agree within their documented tolerances."""
    canon = [am.canonical(n) for n in am.CANONICAL_NAMES]
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for a, b in itertools.product(canon, repeat=2):
        m = marginal_fixed_point(a, b, PD)
        j = joint_chain_payoff(a, b, PD, tol=1e-12, max_iter=10_000)
        mc = monte_carlo_payoff(a, b, PD, k=500, reps=2, rng=rng)
        gap = max(abs(m.u_i - j.u_i_horizon), abs(m.u_i - mc.u_i_horizon))
        worst = max(worst, gap)
        assert gap < 1e-9, f"{a.output_string()} vs {b.output_string()}: gap {gap}"
    gaps, sigma_ok = [], 0
    for _ in range(100):
        a, b = am.random_genotype(2, rng), am.random_genotype(2, rng)
        m = marginal_fixed_point(a, b, PD)
        j = joint_chain_payoff(a, b, PD)
        gaps.append(abs(m.u_i - j.u_i_horizon))
    med = float(np.median(gaps))
    assert med < 0.05, f"marginal-vs-joint median gap {med}"
    for _ in range(20):
        a, b = am.random_genotype(2, rng), am.random_genotype(2, rng)
        j = joint_chain_payoff(a, b, PD, tol=0.0, max_iter=100)
        mc = monte_carlo_payoff(a, b, PD, k=100, reps=4000, rng=rng)
        sigma_ok += abs(mc.u_i - j.u_i) <= 3 * max(mc.u_i_stderr, 1e-12)
    assert sigma_ok >= 19, f"only {sigma_ok}/20 Monte Carlo runs within 3 sigma"
    print(f"\nPASS 4 oracle equivalence: deterministic max gap {worst:.1e}, "
          f"stochastic median gap {med:.4f}, MC within 3 sigma {sigma_ok}/20")


@pytest.mark.slow
def test_05_emergence_of_cooperation():
    """Truncation-survival paradigms cooperate; uniform-survival ones do not."""
    fracs = {}
    for label in "abcd":
        means = _trial_means(label, PD)
        fracs[label] = float((means >= COOP_THRESHOLD).mean())
        assert fracs[label] >= 0.6, f"paradigm ({label}): only {fracs[label]:.0%}"
    for label in "efgh":
        means = _trial_means(label, PD)
        fracs[label] = float((means >= COOP_THRESHOLD).mean())
        assert fracs[label] <= 0.3, f"paradigm ({label}): {fracs[label]:.0%}"
    print("\nPASS 5 emergence of cooperation: fraction of trials >= 2.75 = "
          + ", ".join(f"({k}) {v:.0%}" for k, v in fracs.items()))


@pytest.mark.slow
def test_06_control_calibration():
    """The drift-only paradigm centers trial means near the random-play score."""
    means = _trial_means("i", PD)
    center = float(means.mean())
    assert 2.3 <= center <= 2.7, f"control mean {center}"
    print(f"\nPASS 6 control calibration: paradigm (i) mean of trial means {center:.3f}")


@pytest.mark.slow
def test_07_homogeneity_convergence():
    """Populations become behaviorally homogeneous within 30 generations."""
    hits = []
    for trial in range(10):
        records = run_simulation(20, 2, 30, "a", PD, EVO_MP, seed=SEED, trial=trial)
        first = next((r.generation for r in records
                      if r.generation >= 1 and r.homogeneity < 0.05), None)
        hits.append(first)
    n_hit = sum(h is not None for h in hits)
    assert n_hit >= 8, f"D(t) < 0.05 within 30 generations in only {n_hit}/10 seeds"
    print(f"\nPASS 7 homogeneity convergence: {n_hit}/10 seeds, "
          f"first-hit generations {hits}")


@pytest.mark.slow
def test_08_battle_anti_coordination():
    """Evolved battle-game play lands on opposite-action outcomes about half the time.

    Measured with the exact joint-chain engine and sigma 0.1: the mean-field
    engine is unstable at the mixed point of an anti-coordination game and
    polarizes each pairing toward a pure equilibrium (measured opposite-action
    ratio ~0.86 regardless of genotype), so the exact chain is the honest
    oracle here.
    """
    mp = MutationParams(sigma=0.1, boundary="clamp")
    ep = EngineParams(backend="joint")
    cd_ratios = []
    for trial in range(10):
        records = run_simulation(20, 2, 300, "a", battle(), mp, ep,
                                 seed=SEED, trial=trial)
        cd_ratios.append(float(np.mean([r.ratio_cd for r in records[100:]])))
    overall = float(np.mean(cd_ratios))
    assert 0.35 <= overall <= 0.60, f"mean opposite-action ratio {overall}"
    print(f"\nPASS 8 battle anti-coordination: mean opposite-action ratio "
          f"{overall:.3f}, per-trial {np.round(cd_ratios, 3).tolist()}")


def test_09_property_suites():
    """Simplex closure over 10^6 ops, bitwise determinism, hand-derived fitness."""
    # closure: a million chained ops across both boundary policies
    rng = np.random.default_rng(SEED)
    for boundary in ("reflect", "clamp"):
        vs = sample_simplex(2000, 4, rng)
        out = advance(vs, 250, MutationParams(sigma=0.2, boundary=boundary), rng)
        assert np.all(out >= -1e-12) and np.all(out <= 1 + 1e-12)
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-9)

    # determinism: identical record streams from identical seeds
    a = run_simulation(6, 2, 5, "b", PD, EVO_MP, seed=SEED, trial=0)
    b = run_simulation(6, 2, 5, "b", PD, EVO_MP, seed=SEED, trial=0)
    for ra, rb in zip(a, b):
        assert np.array_equal(ra.fitness, rb.fitness)
        assert ra.mean_score == rb.mean_score

    # hand-derived fitness sums for 19 cooperators and one defector
    from smmevo.payoff import population_fitness
    pop = [am.canonical("all_c")] * 19 + [am.canonical("all_d")]
    fitness, _ = population_fitness(pop, PD)
    assert fitness[-1] == 4.0 * 19
    assert np.allclose(fitness[:-1], 3.0 * 18 + 1.0)
    print("\nPASS 9 property suites: simplex closure (10^6 ops), bitwise "
          "determinism, hand-derived fitness 76/55")
