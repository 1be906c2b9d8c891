"""Stochastic Moore machines: genotypes, validation, reference strategies.

A machine is described by the evolvable triple (transition tensor,
initial-state distribution, state-to-action map). Actions are the two
symbols C (cooperate) and D (defect), used both as inputs (the opponent's
observed move) and outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

ACTIONS = "CD"
C, D = 0, 1
N_ACTIONS = 2

# Tolerance for the sum-to-one constraint. Kept loose enough that float
# drift accumulated over long mutation chains never trips validation.
SUM_TOL = 1e-9

CANONICAL_NAMES = ("all_c", "all_d", "tit_for_tat", "grim", "two_tits_for_tat")


class GenotypeError(ValueError):
    """Raised for malformed genotypes or serialized genotype payloads."""


@dataclass(frozen=True)
class SmmGenotype:
    """Evolvable stochastic Moore machine.

    transitions: float array (n_states, 2, n_states); row [s, a] is the
        probability vector over destination states after observing action a
        in state s.
    initial: float array (n_states,); probability of starting in each state.
    outputs: int8 array (n_states,); 0 = C, 1 = D.
    """

    transitions: np.ndarray
    initial: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "transitions",
                           np.ascontiguousarray(self.transitions, dtype=np.float64))
        object.__setattr__(self, "initial",
                           np.ascontiguousarray(self.initial, dtype=np.float64))
        object.__setattr__(self, "outputs",
                           np.ascontiguousarray(self.outputs, dtype=np.int8))
        self.transitions.flags.writeable = False
        self.initial.flags.writeable = False
        self.outputs.flags.writeable = False

    @property
    def n_states(self) -> int:
        return self.initial.shape[0]

    def output_string(self) -> str:
        return "".join(ACTIONS[a] for a in self.outputs)

    def __eq__(self, other):
        if not isinstance(other, SmmGenotype):
            return NotImplemented
        return (np.array_equal(self.transitions, other.transitions)
                and np.array_equal(self.initial, other.initial)
                and np.array_equal(self.outputs, other.outputs))

    def __hash__(self):
        return hash((self.transitions.tobytes(), self.initial.tobytes(),
                     self.outputs.tobytes()))


def _check_prob_vector(v: np.ndarray, label: str, violations: list):
    if np.any(v < 0):
        violations.append(f"{label}: negative entry (min {v.min():.6g})")
    s = float(v.sum())
    if abs(s - 1.0) > SUM_TOL:
        violations.append(f"{label}: entries sum to {s:.12g}, not 1")


def validate(g: SmmGenotype) -> list:
    """Return a list of constraint violations; empty means the genotype is ok."""
    violations = []
    n = g.n_states
    if g.transitions.shape != (n, N_ACTIONS, n):
        violations.append(
            f"transitions: shape {g.transitions.shape}, expected {(n, N_ACTIONS, n)}")
        return violations
    if g.outputs.shape != (n,):
        violations.append(f"outputs: shape {g.outputs.shape}, expected {(n,)}")
        return violations
    if np.any((g.outputs != C) & (g.outputs != D)):
        violations.append("outputs: entries must be 0 (C) or 1 (D)")
    _check_prob_vector(g.initial, "initial", violations)
    for s in range(n):
        for a in range(N_ACTIONS):
            _check_prob_vector(g.transitions[s, a],
                               f"transitions[state={s}, input={ACTIONS[a]}]",
                               violations)
    return violations


def is_valid(g: SmmGenotype) -> bool:
    return not validate(g)


def action_distribution(g: SmmGenotype, dist: np.ndarray) -> np.ndarray:
    """Collapse a state distribution into a distribution over actions."""
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (g.n_states,):
        raise GenotypeError(
            f"state distribution has shape {dist.shape}, machine has {g.n_states} states")
    out = np.zeros(N_ACTIONS)
    np.add.at(out, g.outputs, dist)
    return out


def step(g: SmmGenotype, state: int, observed: int, rng: np.random.Generator) -> int:
    """Sample the next state after observing the opponent's action."""
    row = g.transitions[state, observed]
    return int(np.searchsorted(np.cumsum(row), rng.random(), side="right").clip(0, g.n_states - 1))


def random_genotype(n_states: int, rng: np.random.Generator) -> SmmGenotype:
    """Draw every probability vector uniformly from the simplex.

    Outputs alternate C, D, C, D ... by state index so that both actions are
    representable whenever n_states >= 2 (the output map itself is not
    evolved by the probability mutation operators).
    """
    if n_states < 1:
        raise GenotypeError("n_states must be >= 1")
    transitions = rng.dirichlet(np.ones(n_states), size=(n_states, N_ACTIONS))
    initial = rng.dirichlet(np.ones(n_states))
    outputs = np.arange(n_states, dtype=np.int8) % 2
    return SmmGenotype(transitions, initial, outputs)


def _deterministic(transition_targets, initial_state, outputs) -> SmmGenotype:
    n = len(outputs)
    t = np.zeros((n, N_ACTIONS, n))
    for s, (on_c, on_d) in enumerate(transition_targets):
        t[s, C, on_c] = 1.0
        t[s, D, on_d] = 1.0
    init = np.zeros(n)
    init[initial_state] = 1.0
    return SmmGenotype(t, init, np.array(outputs, dtype=np.int8))


def canonical(name: str) -> SmmGenotype:
    """Deterministic reference strategies, encoded as SMMs.

    all_c / all_d are single-state machines; tit_for_tat and grim are
    two-state mirrors (grim's defect state is absorbing); two_tits_for_tat
    is the three-state machine that returns to cooperation only after the
    opponent cooperates, needing two cooperative observations to recover
    from its defect state chain.
    """
    if name == "all_c":
        return _deterministic([(0, 0)], 0, [C])
    if name == "all_d":
        return _deterministic([(0, 0)], 0, [D])
    if name == "tit_for_tat":
        # state 0 plays C, state 1 plays D; copy the observed action
        return _deterministic([(0, 1), (0, 1)], 0, [C, D])
    if name == "grim":
        # one defection sends the machine to the absorbing defect state
        return _deterministic([(0, 1), (1, 1)], 0, [C, D])
    if name == "two_tits_for_tat":
        # start cooperative; a defection walks toward the defect state,
        # any cooperation resets to the start state
        return _deterministic([(0, 1), (0, 2), (0, 2)], 0, [C, C, D])
    raise GenotypeError(f"unknown canonical strategy {name!r}; "
                        f"choose from {CANONICAL_NAMES}")


# -- serialization ----------------------------------------------------------
#
# Plain JSON tree:
#   {"n_states": 2, "outputs": "CD",
#    "initial": [1.0, 0.0],
#    "transitions": [[[...], [...]], ...]}   indexed [state][input][destination]


def to_dict(g: SmmGenotype) -> dict:
    return {
        "n_states": g.n_states,
        "outputs": g.output_string(),
        "initial": [float(x) for x in g.initial],
        "transitions": [[[float(x) for x in row] for row in state_rows]
                        for state_rows in g.transitions],
    }


def from_dict(d: dict) -> SmmGenotype:
    try:
        n = int(d["n_states"])
        outputs = np.array([ACTIONS.index(ch) for ch in d["outputs"]], dtype=np.int8)
        initial = np.array(d["initial"], dtype=np.float64)
        transitions = np.array(d["transitions"], dtype=np.float64)
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise GenotypeError(f"malformed genotype payload: {e}") from e
    if outputs.shape != (n,) or initial.shape != (n,) \
            or transitions.shape != (n, N_ACTIONS, n):
        raise GenotypeError(
            f"inconsistent genotype shapes for n_states={n}: "
            f"outputs {outputs.shape}, initial {initial.shape}, "
            f"transitions {transitions.shape}")
    if np.any(initial < 0) or np.any(transitions < 0):
        raise GenotypeError("genotype payload contains negative probabilities")
    # renormalize on deserialization only, and only where the payload is
    # actually off (JSON floats round-trip exactly, so in-tolerance vectors
    # stay bitwise identical)
    sums = transitions.sum(axis=2)
    if np.any(sums <= 0) or initial.sum() <= 0:
        raise GenotypeError("genotype payload contains a zero-sum probability vector")
    off = np.abs(sums - 1.0) > SUM_TOL
    if np.any(off):
        transitions = transitions / np.where(off, sums, 1.0)[:, :, None]
    if abs(initial.sum() - 1.0) > SUM_TOL:
        initial = initial / initial.sum()
    return SmmGenotype(transitions, initial, outputs)


def dumps(g: SmmGenotype) -> str:
    return json.dumps(to_dict(g), indent=2)


def loads(text: str) -> SmmGenotype:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise GenotypeError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return from_dict(payload)


def load_file(path) -> SmmGenotype:
    with open(path) as f:
        text = f.read()
    try:
        return loads(text)
    except GenotypeError as e:
        raise GenotypeError(f"{path}: {e}") from e


def save_file(g: SmmGenotype, path) -> None:
    with open(path, "w") as f:
        f.write(dumps(g))
        f.write("\n")
