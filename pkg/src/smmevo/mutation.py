"""Simplex-preserving mutation operators for probability vectors.

The headline operator transfers a Gaussian-distributed amount of mass
between two randomly paired entries, so the vector sum is invariant by
construction. Two boundary policies are provided for keeping entries in
[0, 1]:

* ``reflect`` (default): the transfer amount is reflected back into its
  feasible interval. This leaves the uniform distribution on the simplex
  exactly invariant, so long-run gene-value histograms match the
  theoretical marginal density (see :func:`marginal_density`).
* ``clamp``: the transfer amount is clipped to the nearest feasible bound.
  Simpler, but it parks probability mass exactly on the boundary and
  measurably distorts the long-run gene-value distribution.

A conventional add-noise-then-normalize operator is included as the
baseline for the bias-comparison harness in :mod:`smmevo.metrics`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .automaton import SmmGenotype

MECHANISMS = ("pairwise", "linear_normalization")
BOUNDARY_POLICIES = ("reflect", "clamp")

_LINNORM_MAX_RETRIES = 100


class MutationError(ValueError):
    pass


@dataclass
class MutationParams:
    sigma: float = 0.1
    ops_per_vector: int = 1
    mechanism: str = "pairwise"
    boundary: str = "reflect"
    g_flip_rate: float = 0.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise MutationError(f"sigma must be > 0, got {self.sigma}")
        if self.ops_per_vector < 1:
            raise MutationError(f"ops_per_vector must be >= 1, got {self.ops_per_vector}")
        if self.mechanism not in MECHANISMS:
            raise MutationError(f"unknown mechanism {self.mechanism!r}")
        if self.boundary not in BOUNDARY_POLICIES:
            raise MutationError(f"unknown boundary policy {self.boundary!r}")
        if not 0.0 <= self.g_flip_rate <= 1.0:
            raise MutationError(f"g_flip_rate must be in [0, 1], got {self.g_flip_rate}")


def marginal_density(k: float, dim: int) -> float:
    """Density of a single entry of a uniformly drawn probability vector."""
    if dim < 2:
        raise MutationError(f"dim must be >= 2, got {dim}")
    if not 0.0 <= k <= 1.0:
        raise MutationError(f"k must be in [0, 1], got {k}")
    return (dim - 1) * (1.0 - k) ** (dim - 2)


def marginal_cdf(k, dim):
    """CDF matching :func:`marginal_density`; accepts scalars or arrays."""
    if dim < 2:
        raise MutationError(f"dim must be >= 2, got {dim}")
    k = np.asarray(k, dtype=np.float64)
    return 1.0 - (1.0 - k) ** (dim - 1)


def _feasible_interval(vi: float, vj: float):
    # delta must keep vi + delta and vj - delta inside [0, 1]
    return max(-vi, vj - 1.0), min(1.0 - vi, vj)


def _bound_delta(delta: float, lo: float, hi: float, boundary: str) -> float:
    if boundary == "clamp":
        return min(max(delta, lo), hi)
    # reflect into [lo, hi]
    span = hi - lo
    if span <= 0.0:
        return lo
    y = (delta - lo) % (2.0 * span)
    if y > span:
        y = 2.0 * span - y
    return lo + y


def apply_pairwise_op(v: np.ndarray, i: int, j: int, delta: float,
                      boundary: str = "reflect") -> np.ndarray:
    """One mass transfer between entries i and j; returns a new vector."""
    if i == j:
        raise MutationError("pair entries must differ")
    out = np.array(v, dtype=np.float64)
    lo, hi = _feasible_interval(out[i], out[j])
    d = _bound_delta(delta, lo, hi, boundary)
    out[i] += d
    out[j] -= d
    return out


def mutate_pairwise(v: np.ndarray, params: MutationParams,
                    rng: np.random.Generator) -> np.ndarray:
    """Apply ``params.ops_per_vector`` paired Gaussian transfers to ``v``."""
    v = np.asarray(v, dtype=np.float64)
    dim = v.shape[0]
    if dim < 2:
        raise MutationError("pairwise mutation needs dimension >= 2")
    out = v.copy()
    for _ in range(params.ops_per_vector):
        i = int(rng.integers(dim))
        j = int(rng.integers(dim - 1))
        if j >= i:
            j += 1
        delta = rng.normal(0.0, params.sigma)
        lo, hi = _feasible_interval(out[i], out[j])
        d = _bound_delta(delta, lo, hi, params.boundary)
        out[i] += d
        out[j] -= d
    return out


def mutate_linear_normalization(v: np.ndarray, params: MutationParams,
                                rng: np.random.Generator) -> np.ndarray:
    """Baseline: add independent Gaussian noise, clamp negatives, renormalize."""
    v = np.asarray(v, dtype=np.float64)
    for _ in range(_LINNORM_MAX_RETRIES):
        out = np.maximum(v + rng.normal(0.0, params.sigma, size=v.shape), 0.0)
        s = out.sum()
        if s > 0.0:
            return out / s
    raise MutationError(
        f"all entries clamped to zero in {_LINNORM_MAX_RETRIES} consecutive draws")


def mutate_vector(v: np.ndarray, params: MutationParams,
                  rng: np.random.Generator) -> np.ndarray:
    if params.mechanism == "pairwise":
        return mutate_pairwise(v, params, rng)
    return mutate_linear_normalization(v, params, rng)


def mutate_genotype(g: SmmGenotype, params: MutationParams,
                    rng: np.random.Generator) -> SmmGenotype:
    """Mutate every transition row and the initial distribution independently.

    The state-to-action map is left untouched unless ``g_flip_rate`` is
    positive, in which case each state's action flips with that probability.
    """
    n = g.n_states
    if n < 2 and params.mechanism == "pairwise":
        # one-point simplex: nothing to mutate but the output map
        transitions = g.transitions.copy()
        initial = g.initial.copy()
    else:
        transitions = np.empty_like(g.transitions)
        for s in range(n):
            for a in range(g.transitions.shape[1]):
                transitions[s, a] = mutate_vector(g.transitions[s, a], params, rng)
        initial = mutate_vector(g.initial, params, rng)
    outputs = g.outputs.copy()
    if params.g_flip_rate > 0.0:
        flips = rng.random(n) < params.g_flip_rate
        outputs[flips] = 1 - outputs[flips]
    return SmmGenotype(transitions, initial, outputs)


# -- vectorized chains for the validation harnesses -------------------------


def sample_simplex(n_vectors: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws from the probability simplex, one per row."""
    return rng.dirichlet(np.ones(dim), size=n_vectors)


def advance_pairwise(vs: np.ndarray, steps: int, params: MutationParams,
                     rng: np.random.Generator) -> np.ndarray:
    """Advance many vectors by ``steps`` pairwise ops each, in lockstep."""
    vs = np.array(vs, dtype=np.float64)
    n, dim = vs.shape
    rows = np.arange(n)
    for _ in range(steps):
        i = rng.integers(dim, size=n)
        j = rng.integers(dim - 1, size=n)
        j = np.where(j >= i, j + 1, j)
        vi = vs[rows, i]
        vj = vs[rows, j]
        lo = np.maximum(-vi, vj - 1.0)
        hi = np.minimum(1.0 - vi, vj)
        delta = rng.normal(0.0, params.sigma, size=n)
        if params.boundary == "clamp":
            d = np.clip(delta, lo, hi)
        else:
            span = hi - lo
            with np.errstate(invalid="ignore", divide="ignore"):
                y = np.mod(delta - lo, 2.0 * span)
                y = np.where(y > span, 2.0 * span - y, y)
            d = np.where(span > 0.0, lo + y, lo)
        vs[rows, i] = vi + d
        vs[rows, j] = vj - d
    return vs


def advance_linear_normalization(vs: np.ndarray, steps: int, params: MutationParams,
                                 rng: np.random.Generator) -> np.ndarray:
    """Advance many vectors by ``steps`` normalize-after-noise ops each."""
    vs = np.array(vs, dtype=np.float64)
    for _ in range(steps):
        out = np.maximum(vs + rng.normal(0.0, params.sigma, size=vs.shape), 0.0)
        sums = out.sum(axis=1)
        dead = sums <= 0.0
        # all-zero rows keep their previous value and retry on the next step
        out[dead] = vs[dead]
        sums[dead] = 1.0
        vs = out / sums[:, None]
    return vs


def advance(vs: np.ndarray, steps: int, params: MutationParams,
            rng: np.random.Generator) -> np.ndarray:
    if params.mechanism == "pairwise":
        return advance_pairwise(vs, steps, params, rng)
    return advance_linear_normalization(vs, steps, params, rng)


def with_mechanism(params: MutationParams, mechanism: str) -> MutationParams:
    return replace(params, mechanism=mechanism)
