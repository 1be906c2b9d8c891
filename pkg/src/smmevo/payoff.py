"""Pairwise payoffs between stochastic Moore machines.

Three backends compute the per-round payoff of an iterated 2x2 game:

* ``marginal`` — the mean-field fixed point: each machine's marginal state
  distribution is updated against the opponent's marginal action
  distribution until both stop moving. Fast (a handful of small matrix
  products) and exact for deterministic machines, approximate in general
  because it factorizes the joint state distribution.
* ``joint`` — the exact oracle: iterates the full distribution over state
  pairs, reporting both a running per-round mean and the stage payoff at
  the horizon distribution.
* ``monte_carlo`` — sampled rollouts of the actual game.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .automaton import SmmGenotype, N_ACTIONS
from .games import GameSpec, expected_stage_payoff

BACKENDS = ("marginal", "joint", "monte_carlo")


class PayoffError(ValueError):
    pass


@dataclass
class EngineParams:
    backend: str = "marginal"
    tol: float = 1e-6
    max_iter: int = 100
    k: int = 100          # rounds per Monte Carlo game
    reps: int = 100       # independent Monte Carlo games
    action_update: str = "current"  # "current": accelerated sweep (default);
                                    # "lagged": the plain simultaneous recurrence

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise PayoffError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        if self.tol < 0:
            raise PayoffError("tol must be >= 0")
        if self.action_update not in ("lagged", "current"):
            raise PayoffError(f"unknown action_update {self.action_update!r}")


@dataclass
class PairwiseResult:
    """Outcome of one pairwise interaction.

    ``u_i``/``u_j`` follow each backend's headline convention: the horizon
    stage payoff for ``marginal``, the running per-round mean for ``joint``
    and ``monte_carlo``. ``u_i_horizon``/``u_j_horizon`` are the stage
    payoffs at the horizon action distributions for every backend, which is
    the comparable quantity across backends once transients are discarded.
    """

    u_i: float
    u_j: float
    u_i_horizon: float
    u_j_horizon: float
    a_i_horizon: np.ndarray
    a_j_horizon: np.ndarray
    iterations: int
    converged: bool
    backend: str
    u_i_stderr: float | None = None
    u_j_stderr: float | None = None

    def as_dict(self) -> dict:
        return {
            "backend": self.backend,
            "u_i": self.u_i, "u_j": self.u_j,
            "u_i_horizon": self.u_i_horizon, "u_j_horizon": self.u_j_horizon,
            "a_i_horizon": [float(x) for x in self.a_i_horizon],
            "a_j_horizon": [float(x) for x in self.a_j_horizon],
            "iterations": self.iterations,
            "converged": self.converged,
            "u_i_stderr": self.u_i_stderr, "u_j_stderr": self.u_j_stderr,
        }


def _onehot_outputs(g: SmmGenotype) -> np.ndarray:
    out = np.zeros((g.n_states, N_ACTIONS))
    out[np.arange(g.n_states), g.outputs] = 1.0
    return out


# -- mean-field fixed point --------------------------------------------------


def _marginal_batch(T_a, O_a, th_a, T_b, O_b, th_b, game: GameSpec,
                    tol: float, max_iter: int, action_update: str):
    """Solve many mean-field fixed points in lockstep.

    All ``a``-side machines share one state count, likewise the ``b`` side.
    Shapes: T (P, S, 2, S); O (P, S, 2) one-hot outputs; th (P, S).

    ``action_update="current"`` (default) sweeps the two machines in
    sequence and extrapolates every third step (SQUAREM-style), which
    converges in a handful of iterations; ``"lagged"`` iterates the plain
    simultaneous recurrence where each action vector follows the previous
    state distribution. Both converge to the same fixed point.
    """
    if action_update == "lagged":
        return _marginal_batch_lagged(T_a, O_a, th_a, T_b, O_b, th_b,
                                      game, tol, max_iter)

    n_pairs = th_a.shape[0]

    def apply_map(p_a, p_b):
        a_b = np.einsum("ps,psa->pa", p_b, O_b)
        f_a = np.einsum("psot,po->pst", T_a, a_b)
        q_a = np.einsum("pst,ps->pt", f_a, p_a)
        q_a /= q_a.sum(axis=1, keepdims=True)
        a_a = np.einsum("ps,psa->pa", q_a, O_a)
        f_b = np.einsum("psot,po->pst", T_b, a_a)
        q_b = np.einsum("pst,ps->pt", f_b, p_b)
        q_b /= q_b.sum(axis=1, keepdims=True)
        return q_a, q_b

    p_a, p_b = th_a.copy(), th_b.copy()
    iters = np.full(n_pairs, max_iter, dtype=np.int64)
    done = np.zeros(n_pairs, dtype=bool)
    count = 0

    def check(new_a, new_b, old_a, old_b):
        nonlocal done
        small = (np.abs(new_a - old_a).sum(axis=1) < tol) \
            & (np.abs(new_b - old_b).sum(axis=1) < tol)
        newly = small & ~done
        iters[newly] = count
        done |= small

    while count < max_iter and not done.all():
        x1_a, x1_b = apply_map(p_a, p_b)
        count += 1
        check(x1_a, x1_b, p_a, p_b)
        if count >= max_iter or done.all():
            p_a, p_b = x1_a, x1_b
            break
        x2_a, x2_b = apply_map(x1_a, x1_b)
        count += 1
        check(x2_a, x2_b, x1_a, x1_b)
        if count >= max_iter or done.all():
            p_a, p_b = x2_a, x2_b
            break
        # SQUAREM extrapolation on the concatenated state, with fallback
        # to the plain iterate wherever the step is degenerate or leaves
        # the simplex
        r = np.concatenate([x1_a - p_a, x1_b - p_b], axis=1)
        v = np.concatenate([x2_a - x1_a, x2_b - x1_b], axis=1) - r
        nv = np.linalg.norm(v, axis=1)
        safe = nv > 1e-13
        alpha = np.where(safe, -np.linalg.norm(r, axis=1) / np.where(safe, nv, 1.0), 0.0)
        x0 = np.concatenate([p_a, p_b], axis=1)
        xp = x0 - 2.0 * alpha[:, None] * r + (alpha ** 2)[:, None] * v
        xp = np.clip(xp, 0.0, None)
        s = T_a.shape[1]
        xp_a, xp_b = xp[:, :s], xp[:, s:]
        sum_a = xp_a.sum(axis=1)
        sum_b = xp_b.sum(axis=1)
        ok = safe & (sum_a > 0) & (sum_b > 0) & np.isfinite(xp).all(axis=1)
        xp_a = np.where(ok[:, None], xp_a / np.where(ok, sum_a, 1.0)[:, None], x2_a)
        xp_b = np.where(ok[:, None], xp_b / np.where(ok, sum_b, 1.0)[:, None], x2_b)
        x3_a, x3_b = apply_map(xp_a, xp_b)
        count += 1
        check(x3_a, x3_b, xp_a, xp_b)
        p_a, p_b = x3_a, x3_b

    a_a = np.einsum("ps,psa->pa", p_a, O_a)
    a_b = np.einsum("ps,psa->pa", p_b, O_b)
    u = np.einsum("pa,abk,pb->pk", a_a, game.table, a_b)  # (P, 2)
    return u[:, 0], u[:, 1], a_a, a_b, iters, done


def _marginal_batch_lagged(T_a, O_a, th_a, T_b, O_b, th_b, game: GameSpec,
                           tol: float, max_iter: int):
    """Plain simultaneous recurrence: actions follow the previous state
    distribution, both machines update in lockstep, no acceleration."""
    p_a = th_a.copy()
    p_b = th_b.copy()
    a_a = np.einsum("ps,psa->pa", p_a, O_a)
    a_b = np.einsum("ps,psa->pa", p_b, O_b)
    n_pairs = p_a.shape[0]
    iters = np.full(n_pairs, max_iter, dtype=np.int64)
    done = np.zeros(n_pairs, dtype=bool)
    for it in range(1, max_iter + 1):
        f_a = np.einsum("psot,po->pst", T_a, a_b)
        f_b = np.einsum("psot,po->pst", T_b, a_a)
        p_a_new = np.einsum("pst,ps->pt", f_a, p_a)
        p_b_new = np.einsum("pst,ps->pt", f_b, p_b)
        # renormalize: float round-off in the mutual feedback otherwise
        # compounds geometrically over long iterations
        p_a_new /= p_a_new.sum(axis=1, keepdims=True)
        p_b_new /= p_b_new.sum(axis=1, keepdims=True)
        a_a = np.einsum("ps,psa->pa", p_a, O_a)
        a_b = np.einsum("ps,psa->pa", p_b, O_b)
        small = (np.abs(p_a_new - p_a).sum(axis=1) < tol) \
            & (np.abs(p_b_new - p_b).sum(axis=1) < tol)
        newly = small & ~done
        iters[newly] = it
        done |= small
        p_a, p_b = p_a_new, p_b_new
        if done.all():
            break
    a_a = np.einsum("ps,psa->pa", p_a, O_a)
    a_b = np.einsum("ps,psa->pa", p_b, O_b)
    u = np.einsum("pa,abk,pb->pk", a_a, game.table, a_b)  # (P, 2)
    return u[:, 0], u[:, 1], a_a, a_b, iters, done


def marginal_fixed_point(m_i: SmmGenotype, m_j: SmmGenotype, g: GameSpec,
                         tol: float = 1e-6, max_iter: int = 100,
                         action_update: str = "current") -> PairwiseResult:
    """Per-round payoff from the mean-field fixed point of the pair."""
    u_i, u_j, a_i, a_j, iters, done = _marginal_batch(
        m_i.transitions[None], _onehot_outputs(m_i)[None], m_i.initial[None],
        m_j.transitions[None], _onehot_outputs(m_j)[None], m_j.initial[None],
        g, tol, max_iter, action_update)
    return PairwiseResult(
        u_i=float(u_i[0]), u_j=float(u_j[0]),
        u_i_horizon=float(u_i[0]), u_j_horizon=float(u_j[0]),
        a_i_horizon=a_i[0], a_j_horizon=a_j[0],
        iterations=int(iters[0]), converged=bool(done[0]), backend="marginal")


# -- exact joint chain -------------------------------------------------------


def joint_chain_payoff(m_i: SmmGenotype, m_j: SmmGenotype, g: GameSpec,
                       tol: float = 1e-6, max_iter: int = 10_000) -> PairwiseResult:
    """Exact payoff via the joint Markov chain over state pairs.

    ``u_i``/``u_j`` are running per-round means from the initial
    distribution (transient included); the horizon fields evaluate the
    stage payoff under the converged joint distribution. With ``tol=0``
    the chain runs exactly ``max_iter`` rounds, which matches the
    expectation of a ``max_iter``-round sampled game.
    """
    act_i = m_i.outputs
    act_j = m_j.outputs
    u_stage_i = g.table[act_i[:, None], act_j[None, :], 0]
    u_stage_j = g.table[act_i[:, None], act_j[None, :], 1]
    # kernel[s, t, s', t']: each machine transitions on the other's action
    kernel = (m_i.transitions[:, act_j, :][:, :, :, None]
              * np.swapaxes(m_j.transitions[:, act_i, :], 0, 1)[:, :, None, :])
    q = np.outer(m_i.initial, m_j.initial)
    total_i = total_j = 0.0
    rounds = 0
    converged = False
    for _ in range(max_iter):
        total_i += float((q * u_stage_i).sum())
        total_j += float((q * u_stage_j).sum())
        rounds += 1
        q_next = np.einsum("st,stuv->uv", q, kernel)
        delta = np.abs(q_next - q).sum()
        q = q_next
        if tol > 0 and delta < tol:
            converged = True
            break
    a_i = np.zeros(N_ACTIONS)
    np.add.at(a_i, act_i, q.sum(axis=1))
    a_j = np.zeros(N_ACTIONS)
    np.add.at(a_j, act_j, q.sum(axis=0))
    u_i_h = float((q * u_stage_i).sum())
    u_j_h = float((q * u_stage_j).sum())
    return PairwiseResult(
        u_i=total_i / rounds, u_j=total_j / rounds,
        u_i_horizon=u_i_h, u_j_horizon=u_j_h,
        a_i_horizon=a_i, a_j_horizon=a_j,
        iterations=rounds, converged=converged or tol == 0, backend="joint")


# -- Monte Carlo rollouts ----------------------------------------------------


def _sample_states(cum_rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # cum_rows: (reps, S) cumulative transition rows, one per rollout
    u = rng.random(cum_rows.shape[0])
    return (u[:, None] >= cum_rows).sum(axis=1).clip(0, cum_rows.shape[1] - 1)


def monte_carlo_payoff(m_i: SmmGenotype, m_j: SmmGenotype, g: GameSpec,
                       k: int = 100, reps: int = 100,
                       rng: np.random.Generator | None = None) -> PairwiseResult:
    """Mean per-round payoff over ``reps`` sampled ``k``-round games."""
    if k < 1 or reps < 1:
        raise PayoffError("k and reps must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    cum_init_i = np.cumsum(m_i.initial)
    cum_init_j = np.cumsum(m_j.initial)
    s_i = _sample_states(np.broadcast_to(cum_init_i, (reps, m_i.n_states)), rng)
    s_j = _sample_states(np.broadcast_to(cum_init_j, (reps, m_j.n_states)), rng)
    cum_t_i = np.cumsum(m_i.transitions, axis=2)
    cum_t_j = np.cumsum(m_j.transitions, axis=2)
    total_i = np.zeros(reps)
    total_j = np.zeros(reps)
    act_i = act_j = None
    for _ in range(k):
        act_i = m_i.outputs[s_i]
        act_j = m_j.outputs[s_j]
        total_i += g.table[act_i, act_j, 0]
        total_j += g.table[act_i, act_j, 1]
        s_i = _sample_states(cum_t_i[s_i, act_j], rng)
        s_j = _sample_states(cum_t_j[s_j, act_i], rng)
    per_round_i = total_i / k
    per_round_j = total_j / k
    a_i = np.bincount(act_i, minlength=N_ACTIONS) / reps
    a_j = np.bincount(act_j, minlength=N_ACTIONS) / reps
    u_i_h, u_j_h = expected_stage_payoff(a_i, a_j, g)
    se_i = float(per_round_i.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
    se_j = float(per_round_j.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
    return PairwiseResult(
        u_i=float(per_round_i.mean()), u_j=float(per_round_j.mean()),
        u_i_horizon=u_i_h, u_j_horizon=u_j_h,
        a_i_horizon=a_i, a_j_horizon=a_j,
        iterations=k, converged=True, backend="monte_carlo",
        u_i_stderr=se_i, u_j_stderr=se_j)


def compute_pair(m_i: SmmGenotype, m_j: SmmGenotype, g: GameSpec,
                 params: EngineParams,
                 rng: np.random.Generator | None = None) -> PairwiseResult:
    if params.backend == "marginal":
        return marginal_fixed_point(m_i, m_j, g, params.tol, params.max_iter,
                                    params.action_update)
    if params.backend == "joint":
        return joint_chain_payoff(m_i, m_j, g, params.tol, params.max_iter)
    return monte_carlo_payoff(m_i, m_j, g, params.k, params.reps, rng)


# -- population-level evaluation ---------------------------------------------


@dataclass
class PairwiseMatrix:
    """Dense pairwise results over a population.

    ``u[i, j]`` is the per-round payoff of agent i against agent j;
    ``a_horizon[i, j]`` is agent i's horizon action distribution in that
    pairing. Diagonals are zero and never read.
    """

    u: np.ndarray
    a_horizon: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray

    @property
    def n(self) -> int:
        return self.u.shape[0]

    def fitness(self) -> np.ndarray:
        """Cumulative score: each agent's payoffs summed over all opponents."""
        return self.u.sum(axis=1)

    def mean_score(self) -> float:
        n = self.n
        return float(self.u.sum() / (n * (n - 1)))

    def interaction_ratios(self) -> tuple:
        """Population-average horizon probabilities of (CC, CD-or-DC, DD)."""
        iu, ju = np.triu_indices(self.n, k=1)
        pc_i = self.a_horizon[iu, ju, 0]
        pc_j = self.a_horizon[ju, iu, 0]
        cc = float((pc_i * pc_j).mean())
        dd = float(((1 - pc_i) * (1 - pc_j)).mean())
        return cc, 1.0 - cc - dd, dd

    def mean_horizon_actions(self) -> np.ndarray:
        """Each agent's horizon action distribution averaged over its pairings."""
        n = self.n
        totals = self.a_horizon.sum(axis=1)  # includes the zero diagonal
        return totals / (n - 1)


def _stack(machines):
    n_states = machines[0].n_states
    if any(m.n_states != n_states for m in machines):
        return None
    T = np.stack([m.transitions for m in machines])
    O = np.stack([_onehot_outputs(m) for m in machines])
    th = np.stack([m.initial for m in machines])
    return T, O, th


def _pairs_batch(machines_a, machines_b, idx_a, idx_b, g, params):
    stack_a = _stack(machines_a)
    stack_b = _stack(machines_b)
    if stack_a is None or stack_b is None:
        return None
    T_a, O_a, th_a = stack_a
    T_b, O_b, th_b = stack_b
    return _marginal_batch(T_a[idx_a], O_a[idx_a], th_a[idx_a],
                           T_b[idx_b], O_b[idx_b], th_b[idx_b],
                           g, params.tol, params.max_iter, params.action_update)


def pairwise_matrix(pop, g: GameSpec, params: EngineParams | None = None,
                    rng: np.random.Generator | None = None) -> PairwiseMatrix:
    """Evaluate all n(n-1)/2 unordered pairs of a population once."""
    params = params or EngineParams()
    n = len(pop)
    if n < 2:
        raise PayoffError("population must have at least 2 agents")
    iu, ju = np.triu_indices(n, k=1)
    u = np.zeros((n, n))
    a_h = np.zeros((n, n, N_ACTIONS))
    iters = np.zeros((n, n), dtype=np.int64)
    conv = np.ones((n, n), dtype=bool)
    batch = None
    if params.backend == "marginal":
        batch = _pairs_batch(pop, pop, iu, ju, g, params)
    if batch is not None:
        u_a, u_b, a_a, a_b, it, done = batch
        u[iu, ju], u[ju, iu] = u_a, u_b
        a_h[iu, ju], a_h[ju, iu] = a_a, a_b
        iters[iu, ju] = iters[ju, iu] = it
        conv[iu, ju] = conv[ju, iu] = done
    else:
        for i, j in zip(iu, ju):
            r = compute_pair(pop[i], pop[j], g, params, rng)
            u[i, j], u[j, i] = r.u_i, r.u_j
            a_h[i, j], a_h[j, i] = r.a_i_horizon, r.a_j_horizon
            iters[i, j] = iters[j, i] = r.iterations
            conv[i, j] = conv[j, i] = r.converged
    return PairwiseMatrix(u, a_h, iters, conv)


def cross_payoffs(candidates, pop, g: GameSpec, params: EngineParams | None = None,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Payoff of every candidate against every population member; shape (m, n)."""
    params = params or EngineParams()
    m, n = len(candidates), len(pop)
    idx_a = np.repeat(np.arange(m), n)
    idx_b = np.tile(np.arange(n), m)
    if params.backend == "marginal":
        batch = _pairs_batch(candidates, pop, idx_a, idx_b, g, params)
        if batch is not None:
            return batch[0].reshape(m, n)
    u = np.zeros((m, n))
    for a in range(m):
        for b in range(n):
            u[a, b] = compute_pair(candidates[a], pop[b], g, params, rng).u_i
    return u


def population_fitness(pop, g: GameSpec, params: EngineParams | None = None,
                       rng: np.random.Generator | None = None):
    """Fitness vector (cumulative scores) plus the full pairwise matrix."""
    matrix = pairwise_matrix(pop, g, params, rng)
    return matrix.fitness(), matrix
