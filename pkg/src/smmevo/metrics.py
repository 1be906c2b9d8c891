"""Population metrics and the mutation validation harnesses.

Includes the behavioral-homogeneity metric, chi-square goodness-of-fit
machinery, the gene-value distribution fit against the theoretical
uniform-simplex marginal, and the highest-value-frequency bias trace that
compares mutation mechanisms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .mutation import (MutationParams, advance, marginal_cdf, mutate_vector,
                       sample_simplex)


class MetricsError(ValueError):
    pass


def homogeneity(horizon_actions) -> float:
    """Average squared L2 distance between agents' horizon action vectors.

    Averaged over all ordered pairs i != j; zero iff all vectors agree.
    """
    a = np.asarray(horizon_actions, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 2:
        raise MetricsError("homogeneity needs at least 2 vectors of equal dimension")
    n = a.shape[0]
    sq_norms = (a * a).sum(axis=1)
    gram = a @ a.T
    # sum over ordered pairs of |a_i|^2 + |a_j|^2 - 2 a_i . a_j; the i = j
    # terms vanish, so summing over all (i, j) is equivalent
    total = 2.0 * n * sq_norms.sum() - 2.0 * gram.sum()
    return float(max(total, 0.0) / (n * (n - 1)))


@dataclass
class GofResult:
    statistic: float
    degrees_of_freedom: int
    p_value: float
    complement_p: float  # 1 - p_value; the convention used by the bias trace

    def rejected(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


def chi_square_gof(observed_counts, expected_probs) -> GofResult:
    """Pearson goodness-of-fit test with upper-tail p-value.

    Requires every expected bin count to be at least 5; re-bin the data
    otherwise (see :func:`merge_small_bins`).
    """
    obs = np.asarray(observed_counts, dtype=np.float64)
    probs = np.asarray(expected_probs, dtype=np.float64)
    if obs.shape != probs.shape or obs.ndim != 1:
        raise MetricsError("observed counts and expected probabilities must be "
                           "1-D and the same length")
    if np.any(obs < 0) or obs.sum() <= 0:
        raise MetricsError("observed counts must be nonnegative with positive total")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise MetricsError("expected probabilities must form a valid probability vector")
    expected = probs * obs.sum()
    if np.any(expected < 5):
        raise MetricsError(
            f"expected count below 5 (min {expected.min():.3g}); merge bins before testing")
    statistic = float(((obs - expected) ** 2 / expected).sum())
    dof = obs.shape[0] - 1
    p = float(stats.chi2.sf(statistic, dof))
    return GofResult(statistic, dof, p, 1.0 - p)


def merge_small_bins(counts, probs, total, min_expected: float = 5.0):
    """Merge adjacent bins rightward until every expected count is >= 5."""
    out_c, out_p = [], []
    acc_c = acc_p = 0.0
    for c, p in zip(counts, probs):
        acc_c += c
        acc_p += p
        if acc_p * total >= min_expected:
            out_c.append(acc_c)
            out_p.append(acc_p)
            acc_c = acc_p = 0.0
    if acc_p > 0:
        if not out_c:
            raise MetricsError("too few samples to form a single valid bin")
        out_c[-1] += acc_c
        out_p[-1] += acc_p
    return np.array(out_c), np.array(out_p)


@dataclass
class DensityFitResult:
    gof: GofResult
    histogram: np.ndarray
    bin_edges: np.ndarray
    expected_probs: np.ndarray
    samples: int


def density_fit(params: MutationParams, dim: int, iterations: int,
                bins: int = 20, rng: np.random.Generator | None = None,
                mode: str = "independent", steps: int = 50) -> DensityFitResult:
    """Fit the long-run gene-value distribution against the simplex marginal.

    ``independent`` mode draws ``iterations`` vectors uniformly from the
    simplex, advances each by ``steps`` mutation ops, and histograms the
    first entry: samples are independent, so the chi-square test is exact.
    ``trajectory`` mode follows a single vector for ``iterations`` ops,
    matching the single-run histogram figures (autocorrelated samples; use
    for plots, not tests).
    """
    if dim < 2:
        raise MetricsError("dim must be >= 2")
    rng = np.random.default_rng() if rng is None else rng
    if mode == "independent":
        vs = sample_simplex(iterations, dim, rng)
        vs = advance(vs, steps, params, rng)
        values = vs[:, 0]
    elif mode == "trajectory":
        v = sample_simplex(1, dim, rng)[0]
        values = np.empty(iterations)
        for t in range(iterations):
            v = mutate_vector(v, params, rng)
            values[t] = v[0]
    else:
        raise MetricsError(f"unknown density_fit mode {mode!r}")
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(np.clip(values, 0.0, 1.0), bins=edges)
    probs = np.diff(marginal_cdf(edges, dim))
    merged_counts, merged_probs = merge_small_bins(counts, probs, len(values))
    gof = chi_square_gof(merged_counts, merged_probs)
    return DensityFitResult(gof, counts, edges, probs, len(values))


def mutation_bias_trace(params: MutationParams, dim: int, iterations: int,
                        checkpoints=None,
                        rng: np.random.Generator | None = None) -> list:
    """Trace the uniformity of the highest-valued-gene frequency over time.

    Runs the mechanism on a single vector; each iteration tallies which
    index currently holds the maximum. At every checkpoint the tally is
    fitted against the uniform distribution and the complement p-value
    (one minus the upper-tail probability) is recorded: low values mean
    the mechanism favors no particular gene.
    """
    if dim < 2:
        raise MetricsError("dim must be >= 2")
    rng = np.random.default_rng() if rng is None else rng
    if checkpoints is None:
        checkpoints = np.unique(np.logspace(2, np.log10(iterations), 12).astype(int))
    checkpoints = sorted(int(c) for c in checkpoints if c <= iterations)
    v = sample_simplex(1, dim, rng)[0]
    counts = np.zeros(dim)
    trace = []
    cp = set(checkpoints)
    uniform = np.full(dim, 1.0 / dim)
    for t in range(1, iterations + 1):
        v = mutate_vector(v, params, rng)
        counts[int(np.argmax(v))] += 1
        if t in cp:
            gof = chi_square_gof(counts, uniform)
            trace.append((t, gof.complement_p))
    return trace


@dataclass
class TrialSummary:
    mean_score: float
    min_cooperation_bound: float


def trial_summary(records, burn_in: int) -> TrialSummary:
    """Post-burn-in mean score and the implied lower bound on mutual cooperation.

    A mean score of 3.0 means every interaction was mutual cooperation,
    2.75 means at least half were, 2.5 or lower means cooperation was a
    minority; the bound interpolates linearly between 2.5 and 3.0.
    """
    if len(records) <= burn_in:
        raise MetricsError(
            f"need more than burn_in={burn_in} records, got {len(records)}")
    scores = np.array([r.mean_score for r in records[burn_in:]])
    mean = float(scores.mean())
    bound = min(1.0, max(0.0, 2.0 * (mean - 2.5)))
    return TrialSummary(mean, bound)
