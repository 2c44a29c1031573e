import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bnmap.exact import exact_map, min_fill_order, order_width
from bnmap.generators import (
    And,
    CnfFormula,
    GenConfig,
    Not,
    Or,
    Var,
    brute_force_maxsat,
    emajsat_network,
    evaluate,
    format_dimacs,
    format_expr,
    maxsat_polytree,
    parse_dimacs,
    parse_expr,
    random_kcnf,
    random_map_problem,
    random_network,
    random_polytree,
)
from bnmap.network import is_polytree, joint_probability

import oracles

GATES_EXPR = "(and (not (or x1 x2)) (not x3))"


class TestCnf:
    def test_dimacs_round_trip(self):
        cnf = CnfFormula(3, ((1, -2), (3,), (-1, 2, -3)))
        text = format_dimacs(cnf)
        assert text.startswith("p cnf 3 3")
        assert parse_dimacs(text) == cnf

    def test_dimacs_comments_and_multiline_clauses(self):
        cnf = parse_dimacs("c hello\np cnf 2 2\n1 -2\n0 2 0\n")
        assert cnf.clauses == ((1, -2), (2,))

    @pytest.mark.parametrize("text", ["1 2 0\n", "p cnf 2 1\n3 0\n", "p cnf 2 2\n1 0\n", "p cnf 2 1\n1 x 0\n"])
    def test_dimacs_errors(self, text):
        with pytest.raises(ValueError):
            parse_dimacs(text)

    def test_brute_force_maxsat(self):
        cnf = CnfFormula(1, ((1,), (-1,)))
        assert brute_force_maxsat(cnf)[0] == 1
        cnf = CnfFormula(2, ((1, 2), (-1,), (-2,)))
        assert brute_force_maxsat(cnf)[0] == 2

    def test_random_kcnf_shape(self):
        cnf = random_kcnf(6, 10, 3, seed=1)
        assert cnf.num_clauses == 10
        for c in cnf.clauses:
            assert len({abs(l) for l in c}) == 3
            assert all(1 <= abs(l) <= 6 for l in c)
        assert random_kcnf(6, 10, 3, seed=1) == cnf


class TestMaxsatPolytree:
    def test_contradictory_pair(self):
        net, map_vars, e = maxsat_polytree(CnfFormula(1, ((1,), (-1,))))
        x, p = exact_map(net, e, map_vars)
        # one of two clauses satisfied: 1 / (2 * 2^1)
        assert p == pytest.approx(0.25, abs=1e-15)

    def test_structure(self):
        net, map_vars, e = maxsat_polytree(CnfFormula(3, ((1, -2), (2, 3))))
        assert is_polytree(net)
        assert net.variables[net.index("S0")].states == ("1", "2")
        assert net.variables[net.index("S3")].states == ("0", "1", "2")
        assert [net.variables[v].name for v in map_vars] == ["X1", "X2", "X3"]
        assert e == {net.index("S3"): 0}

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 5), m=st.integers(1, 6))
    def test_score_counts_satisfied_clauses(self, seed, n, m):
        cnf = random_kcnf(n, m, 3, seed)
        net, map_vars, e = maxsat_polytree(cnf)
        scores = oracles.map_scores(net, e, map_vars)
        for x in itertools.product((0, 1), repeat=n):
            assert scores[x] * m * 2**n == pytest.approx(cnf.count_satisfied([bool(v) for v in x]), abs=1e-9)

    def test_constrained_width_grows(self):
        net, map_vars, e = maxsat_polytree(random_kcnf(6, 6, 3, seed=0))
        constrained = order_width(net, e, min_fill_order(net, e, map_vars))
        free = order_width(net, e, min_fill_order(net, e))
        assert constrained >= 6
        assert free <= 3


class TestEmajsat:
    def test_parse_and_format(self):
        phi = parse_expr(GATES_EXPR)
        assert phi == And((Not(Or((Var(1), Var(2)))), Not(Var(3))))
        assert format_expr(phi) == GATES_EXPR
        assert evaluate(phi, [False, False, False])
        assert not evaluate(phi, [True, False, False])

    @pytest.mark.parametrize("text", ["(and x1", "(xor x1 x2)", "x0", "(not x1 x2)", "x1 x2"])
    def test_parse_errors(self, text):
        with pytest.raises(ValueError):
            parse_expr(text)

    def test_gate_network(self):
        net, map_vars, e, threshold = emajsat_network(parse_expr(GATES_EXPR), k=1)
        assert len(net) == 7
        assert {v.name for v in net.variables} == {"x1", "x2", "x3", "or1", "not1", "not2", "and1"}
        assert threshold == Fraction(1, 4)
        x, p = exact_map(net, e, map_vars)
        assert net.variables[map_vars[0]].states[x[map_vars[0]]] == "F"
        assert Fraction(p).limit_denominator(1000) == Fraction(1, 8)
        assert not Fraction(p) > threshold

    def test_bare_variable_gets_identity_node(self):
        net, map_vars, e, threshold = emajsat_network(Var(1), k=1)
        assert "phi" in [v.name for v in net.variables]
        x, p = exact_map(net, e, map_vars)
        assert p == pytest.approx(0.5)
        assert Fraction(p) > threshold

    @settings(max_examples=25, deadline=None)
    @given(data=st.data())
    def test_score_is_satisfying_fraction(self, data):
        n = data.draw(st.integers(1, 4))
        k = data.draw(st.integers(1, n))
        leaves = st.integers(1, n).map(Var)
        phi = data.draw(st.recursive(leaves, lambda sub: st.one_of(
            sub.map(Not),
            st.tuples(sub, sub).map(And),
            st.tuples(sub, sub).map(Or)), max_leaves=5))
        net, map_vars, e, _ = emajsat_network(phi, k, n)
        scores = oracles.map_scores(net, e, map_vars)
        for x in itertools.product((0, 1), repeat=k):
            sat = sum(evaluate(phi, [bool(b) for b in x + rest])
                      for rest in itertools.product((0, 1), repeat=n - k))
            assert scores[x] == pytest.approx(sat / 2**n, abs=1e-12)


class TestRandomNetworks:
    def test_reproducible(self):
        a = random_network(GenConfig(12, seed=5))
        b = random_network(GenConfig(12, seed=5))
        assert a.parents == b.parents
        for p, q in zip(a.cpts, b.cpts):
            np.testing.assert_array_equal(p.values, q.values)

    def test_roots_and_parents(self):
        net = random_network(GenConfig(20, max_parents=2, seed=1, num_roots=5))
        assert net.roots() == [0, 1, 2, 3, 4]
        assert all(1 <= len(ps) <= 2 for ps in net.parents[5:])

    def test_max_width_filter(self):
        net = random_network(GenConfig(20, max_parents=3, seed=2, max_width=5))
        assert order_width(net, {}, min_fill_order(net, {})) <= 5

    def test_bias_controls_skew(self):
        def entropy(bias):
            net = random_network(GenConfig(30, bias=bias, seed=0))
            rows = np.concatenate([c.values.reshape(-1, 2) for c in net.cpts])
            with np.errstate(divide="ignore", invalid="ignore"):
                return float(np.nansum(-rows * np.log(rows)) / len(rows))
        assert entropy(0.1) < entropy(10.0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 25))
    def test_polytree_generator(self, seed, n):
        assert is_polytree(random_polytree(GenConfig(n, seed=seed, max_states=4)))

    def test_map_problem(self):
        net = random_network(GenConfig(15, seed=3, num_roots=5))
        map_vars, e = random_map_problem(net, 3, 2, seed=0)
        assert set(map_vars) <= set(net.roots())
        assert set(e) <= set(net.leaves())
        assert not set(e) & set(map_vars)
        with pytest.raises(ValueError):
            random_map_problem(net, 6, 0, seed=0)

    def test_cpt_rows_normalized(self):
        net = random_network(GenConfig(10, bias=0.05, seed=9, max_states=4))
        for c in net.cpts:
            np.testing.assert_allclose(c.values.sum(axis=-1), 1.0, atol=1e-12)
        small = random_network(GenConfig(6, seed=9))
        total = sum(joint_probability(small, w) for w in oracles.complete_assignments(small))
        assert total == pytest.approx(1.0)


def test_large_concentration_gives_near_uniform_rows():
    net = random_network(GenConfig(200, bias=1000.0, seed=0, max_parents=2, max_states=3))
    rows = [(row, 1.0 / row.size) for c in net.cpts for row in c.values.reshape(-1, c.values.shape[-1])]
    rows = rows[:1000]
    close = sum(bool(np.all(np.abs(row - u) <= 0.1)) for row, u in rows)
    assert len(rows) >= 500
    assert close >= 0.99 * len(rows)
