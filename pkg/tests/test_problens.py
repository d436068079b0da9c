import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from boltzlens.nn.layers import ConvParams, softmax
from boltzlens.nn.network import PRESETS, forward_with_trace, init_params, zeros_like_network
from boltzlens.problens import (
    EmpiricalDistribution, PriorSpec, boltzmann, conv_energy, default_bin_edges,
    discretize_prior, empirical_distribution, empirical_probs_rows, fc_boltzmann,
    first_conv_energy, kl_divergence, layer_kl_report, mean_f1_kl, write_report_csv,
)
from tests.oracles import naive_conv, naive_histogram

PRIOR = PriorSpec()


def dist(probs, edges=None):
    probs = np.asarray(probs, float)
    edges = np.arange(len(probs) + 1, dtype=float) if edges is None else edges
    return EmpiricalDistribution(edges, probs)


class TestConvEnergy:
    def test_constant_case(self, rng):
        net = zeros_like_network(PRESETS["cnn2"])
        net.params[0].bias[:] = np.arange(12.0)
        _, trace = forward_with_trace(net, rng.normal(size=(32, 32, 1)))
        e = conv_energy(trace, 0)
        assert e.values.shape == (30, 30)
        assert np.all(e.values == -66.0)
        assert e.tag == "ConvMrf"

    def test_pass_through(self, rng):
        net = zeros_like_network(PRESETS["cnn1"])
        net.params[0].filters[1, 1, 0, 2] = 1.0
        x = 32 * rng.normal(size=(32, 32, 1))
        _, trace = forward_with_trace(net, x)
        np.testing.assert_array_equal(conv_energy(trace, 0).values, -x[1:31, 1:31, 0])

    def test_matches_recomputation(self, rng):
        net = init_params(PRESETS["cnn2"], 4)
        x = 32 * rng.normal(size=(32, 32, 1))
        _, trace = forward_with_trace(net, x)
        p = net.params[0]
        expected = -naive_conv(x, p.filters, p.bias).sum(axis=-1)
        assert np.abs(conv_energy(trace, 0).values - expected).max() < 1e-10
        # second conv layer: energy of its linear channels on pooled input
        p2 = net.params[1]
        pooled = trace.records[1].activation
        expected2 = -naive_conv(pooled, p2.filters, p2.bias).sum(axis=-1)
        assert np.abs(conv_energy(trace, 2).values - expected2).max() < 1e-10
        np.testing.assert_allclose(first_conv_energy(net, x[None])[0], expected, atol=1e-10)

    def test_rejects_non_conv(self, rng):
        _, trace = forward_with_trace(init_params(PRESETS["cnn1"], 0), rng.normal(size=(32, 32, 1)))
        with pytest.raises(ValueError):
            conv_energy(trace, 4)


class TestFcBoltzmann:
    def test_zero_activations_uniform(self, rng):
        net = zeros_like_network(PRESETS["cnn2"])
        _, trace = forward_with_trace(net, rng.normal(size=(32, 32, 1)))
        b = fc_boltzmann(trace, 4)
        np.testing.assert_allclose(b.probs, 1 / 20, atol=1e-15)
        assert b.partition == pytest.approx(20.0)

    def test_output_layer_is_network_softmax(self, rng):
        net = init_params(PRESETS["cnn3"], 1)
        probs, trace = forward_with_trace(net, 32 * rng.normal(size=(32, 32, 1)))
        b = fc_boltzmann(trace, 5)
        np.testing.assert_array_equal(b.probs, probs)
        np.testing.assert_array_equal(b.energies, -trace.records[5].activation)

    @given(arrays(np.float64, 20, elements=st.floats(-50, 50)), st.floats(-100, 100))
    def test_gauge_invariance(self, a, c):
        np.testing.assert_allclose(boltzmann(a + c).probs, boltzmann(a).probs, atol=1e-12)
        assert abs(boltzmann(a).probs.sum() - 1) < 1e-12

    def test_sufficiency(self, rng):
        net = init_params(PRESETS["cnn1"], 2)
        _, trace = forward_with_trace(net, 32 * rng.normal(size=(32, 32, 1)))
        clone = copy.deepcopy(trace)
        clone.records[0].pre[...] = 0  # unrelated layers do not matter
        np.testing.assert_array_equal(fc_boltzmann(clone, 4).probs, fc_boltzmann(trace, 4).probs)

    def test_rejects_conv(self, rng):
        _, trace = forward_with_trace(init_params(PRESETS["cnn1"], 0), rng.normal(size=(32, 32, 1)))
        with pytest.raises(ValueError):
            fc_boltzmann(trace, 0)


class TestEmpirical:
    def test_single_bin(self):
        d = empirical_distribution([0.1, 0.2, 0.3], [0.0, 1.0, 2.0])
        np.testing.assert_array_equal(d.probs, [1.0, 0.0])

    def test_direct_count(self):
        d = empirical_distribution([-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0])
        np.testing.assert_allclose(d.probs, [1 / 3, 2 / 3])

    def test_out_of_range(self):
        d = empirical_distribution([-5.0, 0.5, 2.0, 9.0], [0.0, 1.0, 2.0])
        np.testing.assert_allclose(d.probs, [0.25, 0.25])
        assert d.out_of_range_count == 2
        assert d.total() == pytest.approx(1.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            empirical_distribution([], [0.0, 1.0])
        with pytest.raises(ValueError):
            empirical_distribution([1.0], [0.0, 0.0, 1.0])
        with pytest.raises(ValueError):
            empirical_distribution([1.0], [0.0])

    def test_matches_loop_oracle(self, rng):
        for _ in range(1000):
            edges = np.sort(rng.choice(np.arange(-20, 21), size=rng.integers(2, 8), replace=False))
            edges = edges.astype(float)
            vals = rng.integers(-25, 26, size=rng.integers(1, 40)).astype(float)
            d = empirical_distribution(vals, edges)
            np.testing.assert_array_equal(d.probs, naive_histogram(vals, edges))
            np.testing.assert_array_equal(empirical_probs_rows(vals[None], edges)[0], d.probs)

    def test_monte_carlo_against_prior(self):
        # per-bin sd is at most sqrt(0.0125/1e6) ~ 1.1e-4, far inside 0.005
        x = np.random.default_rng(5).normal(0, 32, 1_000_000)
        edges = default_bin_edges()
        emp = empirical_distribution(x, edges)
        ref = discretize_prior(PRIOR, edges)
        assert np.abs(emp.probs - ref.probs).max() < 0.005


class TestPrior:
    def test_default_edges(self):
        e = default_bin_edges()
        assert e.size == 101 and e[0] == -128 and e[-1] == 128

    def test_symmetric(self):
        p = discretize_prior(PRIOR, default_bin_edges()).probs
        np.testing.assert_allclose(p, p[::-1], atol=1e-15)

    def test_median(self):
        p = discretize_prior(PRIOR, [-1e6, 0.0, 1e6])
        np.testing.assert_allclose(p.probs, [0.5, 0.5], atol=1e-15)

    def test_one_sigma(self):
        p = discretize_prior(PRIOR, [-32.0, 32.0])
        assert p.probs[0] == pytest.approx(0.682689492, abs=1e-9)
        assert p.total() == pytest.approx(1.0, abs=1e-12)

    def test_variance_must_be_positive(self):
        with pytest.raises(ValueError):
            PriorSpec(variance=0)


class TestKl:
    def test_identity(self):
        p = dist([0.2, 0.3, 0.5])
        assert kl_divergence(p, p) == 0.0

    def test_closed_form(self):
        expected = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
        assert kl_divergence(dist([0.5, 0.5]), dist([0.25, 0.75])) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.1438, abs=1e-4)

    def test_smoothing_bound(self):
        eps = 1e-9
        kl = kl_divergence(dist([1.0, 0.0]), dist([0.0, 1.0]))
        assert kl <= math.log(1 / eps) + 1e-6
        assert kl > 20

    def test_edge_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence(dist([0.5, 0.5]), dist([0.5, 0.5], np.array([0.0, 1.0, 3.0])))

    @settings(max_examples=200)
    @given(arrays(np.float64, 6, elements=st.floats(0, 1)), arrays(np.float64, 6, elements=st.floats(0, 1)))
    def test_gibbs_nonnegative(self, a, b):
        if a.sum() == 0 or b.sum() == 0:
            return
        p, q = dist(a / a.sum()), dist(b / b.sum())
        assert kl_divergence(p, q) >= 0
        # empty bins in q pick up eps, so self-divergence is only ~0 up to smoothing
        assert kl_divergence(p, p) <= 6 * 1e-9


class TestReport:
    @pytest.fixture
    def report(self, rng):
        net = init_params(PRESETS["cnn2"], 3)
        x = 32 * rng.normal(size=(32, 32, 1))
        return net, x, layer_kl_report(net, x)

    def test_panels(self, report):
        net, x, rep = report
        assert [p.name for p in rep.panels] == ["input", "F1", "F2", "F3", "FY"]
        assert set(rep.kls()) == {"input", "F1"}
        probs, _ = forward_with_trace(net, x)
        np.testing.assert_array_equal(rep.panel("FY").boltzmann.probs, probs)

    def test_normalized(self, report):
        _, _, rep = report
        for p in rep.panels:
            total = p.empirical.total() if p.empirical is not None else p.boltzmann.probs.sum()
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_mean_f1_kl_matches_per_image(self, report, rng):
        net, _, _ = report
        X = 32 * rng.normal(size=(5, 32, 32, 1))
        per = [layer_kl_report(net, x).kls()["F1"] for x in X]
        assert mean_f1_kl(net, X, batch_size=2) == pytest.approx(np.mean(per), abs=1e-12)

    def test_csv(self, report, tmp_path):
        _, _, rep = report
        dist_path, summary_path = write_report_csv(rep, tmp_path)
        rows = open(dist_path).read().splitlines()
        assert rows[0] == "layer,binLeft,binRight,prob"
        assert len(rows) == 1 + 3 * 100 + 20 + 10
        summary = open(summary_path).read().splitlines()
        assert summary[0] == "layer,kl,partitionZ"
        assert len(summary) == 6
