import numpy as np
import pytest

from boltzlens.bayesnet import (
    chain_posterior, decompose, factor_normalization_check, is_path, posterior_via_elimination,
)
from boltzlens.nn.network import PRESETS, forward, init_params, zeros_like_network
from boltzlens.nn.training import sgd_epoch
from boltzlens.synthgen import generate_dataset


def test_cnn2_has_four_factors(rng):
    chain = decompose(init_params(PRESETS["cnn2"], 0), 32 * rng.normal(size=(32, 32, 1)))
    assert chain.names() == ["F1", "F2", "F3", "FY"]
    assert [f.record_ids for f in chain.factors] == [(0, 1), (2, 3), (4,), (5,)]
    assert is_path(chain)


def test_deterministic(rng):
    net = init_params(PRESETS["cnn1"], 0)
    x = 32 * rng.normal(size=(32, 32, 1))
    a, b = decompose(net, x), decompose(net, x)
    for fa, fb in zip(a.factors, b.factors):
        np.testing.assert_array_equal(fa.distribution.probs, fb.distribution.probs)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_posterior_identity(name, rng):
    net = init_params(PRESETS[name], 6)
    for _ in range(20):
        x = 32 * rng.normal(size=(32, 32, 1))
        post = posterior_via_elimination(decompose(net, x))
        np.testing.assert_array_equal(post, forward(net, x))
        assert abs(post.sum() - 1) < 1e-12


def test_permuting_output_rows_permutes_posterior(rng):
    net = init_params(PRESETS["cnn1"], 8)
    net.params[-1].bias[:] = rng.normal(size=10)
    x = 32 * rng.normal(size=(32, 32, 1))
    perm = rng.permutation(10)
    permuted = net.copy()
    permuted.params[-1].weights = net.params[-1].weights[:, perm]
    permuted.params[-1].bias = net.params[-1].bias[perm]
    np.testing.assert_allclose(chain_posterior(permuted, x), chain_posterior(net, x)[perm],
                               rtol=0, atol=1e-15)


def test_zero_network_factors_pass(rng):
    chain = decompose(zeros_like_network(PRESETS["cnn2"]), rng.normal(size=(32, 32, 1)))
    assert all(factor_normalization_check(chain).values())


def test_trained_network_factors_pass(corpus):
    ds = generate_dataset(corpus, 10, 2, 0)
    X, y = ds.arrays("train")
    net = init_params(PRESETS["cnn2"], 0)
    sgd_epoch(net, X, y, 0.01, 32, np.random.default_rng(0))
    Xte, _ = ds.arrays("test")
    for x in Xte:
        assert all(factor_normalization_check(decompose(net, x)).values())


def test_corrupted_factor_named(rng):
    chain = decompose(init_params(PRESETS["cnn2"], 0), 32 * rng.normal(size=(32, 32, 1)))
    chain.factors[2].distribution.probs = chain.factors[2].distribution.probs * 1.5
    result = factor_normalization_check(chain)
    assert result == {"F1": True, "F2": True, "F3": False, "FY": True}
