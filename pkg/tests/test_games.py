import numpy as np
import pytest

from smmevo import games
from smmevo.automaton import C, D


class TestPrisonersDilemma:
    def test_cells(self):
        pd = games.prisoners_dilemma()
        assert pd.payoff(C, C) == (3, 3)
        assert pd.payoff(D, D) == (2, 2)
        assert pd.payoff(C, D) == (1, 4)
        assert pd.payoff(D, C) == (4, 1)

    def test_ordering_and_no_alternation_gain(self):
        pd = games.prisoners_dilemma()
        t, r, p, s = pd.payoff(D, C)[0], pd.payoff(C, C)[0], \
            pd.payoff(D, D)[0], pd.payoff(C, D)[0]
        assert t > r > p > s
        assert 2 * r > t + s  # mutual cooperation beats alternating exploitation


class TestOtherGames:
    def test_battle_pareto_structure(self):
        b = games.battle()
        assert b.payoff(C, D) == (3, 4)  # the cooperator gets the smaller payoff
        assert b.payoff(D, C) == (4, 3)
        # coordination cells are jointly worst
        assert b.payoff(C, C)[0] < min(b.payoff(C, D))
        assert b.payoff(D, D)[0] < min(b.payoff(C, D))

    def test_chicken_dd_unique_minimum(self):
        ch = games.chicken()
        dd = ch.payoff(D, D)[0]
        others = [ch.payoff(a, b)[0] for a, b in ((C, C), (C, D), (D, C))]
        assert all(dd < o for o in others)

    def test_stag_hunt_two_pure_equilibria(self):
        sh = games.stag_hunt()
        # CC Pareto-dominates DD
        assert sh.payoff(C, C)[0] > sh.payoff(D, D)[0]
        # both CC and DD are Nash: no unilateral gain
        assert sh.payoff(D, C)[0] < sh.payoff(C, C)[0]
        assert sh.payoff(C, D)[0] < sh.payoff(D, D)[0]

    def test_all_builtins_symmetric(self):
        for name in ("pd", "chicken", "stag_hunt", "battle"):
            g = games.get_game(name)
            for a in (C, D):
                for b in (C, D):
                    assert g.table[a, b, 0] == g.table[b, a, 1]


class TestGetGame:
    def test_by_name_and_alias(self):
        assert games.get_game("pd").name == "prisoners_dilemma"
        assert games.get_game("battle").name == "battle"

    def test_passthrough(self):
        g = games.prisoners_dilemma()
        assert games.get_game(g) is g

    def test_unknown_name(self):
        with pytest.raises(games.GameError, match="unknown game"):
            games.get_game("rock_paper_scissors")

    def test_custom_mapping(self):
        g = games.get_game({"name": "pd_copy", "payoff": {
            "CC": [3, 3], "CD": [1, 4], "DC": [4, 1], "DD": [2, 2]}})
        assert g.payoff(C, D) == (1, 4)
        assert g.name == "pd_copy"

    def test_custom_asymmetric_rejected(self):
        with pytest.raises(games.GameError, match="not symmetric"):
            games.get_game({"payoff": {
                "CC": [3, 3], "CD": [1, 4], "DC": [9, 1], "DD": [2, 2]}})

    def test_custom_malformed(self):
        with pytest.raises(games.GameError, match="malformed"):
            games.get_game({"payoff": {"CC": [3, 3]}})


class TestExpectedStagePayoff:
    def test_pure_actions_match_table(self):
        pd = games.prisoners_dilemma()
        e = np.eye(2)
        for a in (C, D):
            for b in (C, D):
                assert games.expected_stage_payoff(e[a], e[b], pd) == pd.payoff(a, b)

    def test_uniform_mix(self):
        pd = games.prisoners_dilemma()
        assert games.expected_stage_payoff([0.5, 0.5], [0.5, 0.5], pd) == (2.5, 2.5)

    def test_bilinear_against_enumeration(self):
        pd = games.prisoners_dilemma()
        rng = np.random.default_rng(0)
        for _ in range(50):
            p, q = rng.random(2)
            a_i, a_j = np.array([p, 1 - p]), np.array([q, 1 - q])
            brute_i = sum(a_i[a] * a_j[b] * pd.payoff(a, b)[0]
                          for a in (C, D) for b in (C, D))
            u_i, _ = games.expected_stage_payoff(a_i, a_j, pd)
            assert abs(u_i - brute_i) < 1e-12
