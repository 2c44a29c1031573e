import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bnmap.bp import (
    BpConfig,
    NonConvergenceWarning,
    bp_init,
    bp_log_evidence,
    bp_marginal,
    bp_max_product_mpe,
    bp_posteriors,
    bp_retracted_marginal,
    bp_run,
)
from bnmap.errors import BPInconsistentError
from bnmap.generators import GenConfig, random_polytree
from bnmap.network import joint_probability, make_network

import oracles


def polytree_problem(seed, n, data=None):
    net = random_polytree(GenConfig(n, max_parents=3, seed=seed, max_states=3))
    rng = np.random.default_rng(seed)
    ev = rng.permutation(n)[: int(rng.integers(0, n))]
    e = {int(v): int(rng.integers(net.variables[v].card)) for v in ev}
    return net, e


class TestChain:
    def test_marginal(self, chain):
        state = bp_run(bp_init(chain, {}))
        assert state.converged
        np.testing.assert_allclose(bp_marginal(state, 1), [0.48, 0.52], atol=1e-12)

    def test_posterior_of_parent(self, chain):
        state = bp_run(bp_init(chain, {1: 1}))
        np.testing.assert_allclose(bp_marginal(state, 0), [0.28 / 0.52, 0.24 / 0.52], atol=1e-12)

    def test_retracted(self, chain):
        state = bp_run(bp_init(chain, {1: 1}))
        np.testing.assert_allclose(bp_retracted_marginal(state, 1), [0.48, 0.52], atol=1e-12)
        np.testing.assert_allclose(bp_marginal(state, 1), [0.0, 1.0], atol=1e-15)

    def test_log_evidence(self, chain):
        state = bp_run(bp_init(chain, {1: 1}))
        assert math.exp(bp_log_evidence(state)) == pytest.approx(0.52, rel=1e-9)
        assert bp_log_evidence(bp_run(bp_init(chain, {}))) == pytest.approx(0.0, abs=1e-12)

    def test_max_product(self, chain):
        assert bp_max_product_mpe(chain, {}) == {0: 0, 1: 0}
        assert bp_max_product_mpe(chain, {1: 1}) == {0: 0, 1: 1}


class TestPolytreeExactness:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 7))
    def test_marginals_and_evidence(self, seed, n):
        net, e = polytree_problem(seed, n)
        state = bp_run(bp_init(net, e))
        assert state.converged
        for v in range(n):
            np.testing.assert_allclose(bp_marginal(state, v), oracles.marginal(net, e, v), atol=1e-9)
            np.testing.assert_allclose(bp_retracted_marginal(state, v), oracles.retracted(net, e, v), atol=1e-9)
        assert math.exp(bp_log_evidence(state)) == pytest.approx(oracles.pe(net, e), rel=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 7))
    def test_max_product_is_an_mpe(self, seed, n):
        net, e = polytree_problem(seed, n)
        x = bp_max_product_mpe(net, e)
        _, best = oracles.mpe(net, e)
        assert joint_probability(net, x) == pytest.approx(best, rel=1e-12)


class TestLoopy:
    def test_diamond_is_approximate_but_close(self, diamond):
        state, beliefs = bp_posteriors(diamond, {3: 1})
        assert state.converged
        for v in range(3):
            np.testing.assert_allclose(beliefs[v], oracles.marginal(diamond, {3: 1}, v), atol=0.1)

    def test_warm_start_reaches_same_fixed_point(self, diamond):
        cold = bp_run(bp_init(diamond, {3: 0}))
        warm = bp_run(bp_run(bp_init(diamond, {3: 1})).with_evidence({3: 0}))
        for v in range(4):
            np.testing.assert_allclose(bp_marginal(cold, v), bp_marginal(warm, v), atol=1e-7)

    def test_nonconvergence_warning(self, diamond):
        state = bp_run(bp_init(diamond, {3: 1}), BpConfig(max_iterations=1))
        assert not state.converged
        with pytest.warns(NonConvergenceWarning):
            bp_log_evidence(state)


class TestInconsistency:
    def net(self):
        return make_network([
            ("A", "ft", (), [1.0, 0.0]),
            ("B", "ft", ("A",), [[1.0, 0.0], [0.0, 1.0]]),
        ])

    def test_contradiction_is_flagged(self):
        state = bp_run(bp_init(self.net(), {1: 1}))
        assert state.inconsistent
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert bp_log_evidence(state) == -math.inf
        with pytest.raises(BPInconsistentError):
            bp_marginal(state, 0)

    def test_warm_start_recovers(self):
        state = bp_run(bp_init(self.net(), {1: 1}))
        state = bp_run(state.with_evidence({1: 0}))
        assert not state.inconsistent
        np.testing.assert_allclose(bp_marginal(state, 0), [1.0, 0.0])


class TestConfig:
    @pytest.mark.parametrize("kw", [{"max_iterations": 0}, {"tolerance": 0.0}, {"damping": 1.0}, {"damping": -0.1}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            BpConfig(**kw)

    def test_damping_keeps_fixed_point(self, chain):
        state = bp_run(bp_init(chain, {1: 1}), BpConfig(damping=0.5))
        assert state.converged
        np.testing.assert_allclose(bp_marginal(state, 0), [0.28 / 0.52, 0.24 / 0.52], atol=1e-7)
