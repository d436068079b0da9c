"""Fast self-checks run by ``boltzlens verify`` (always in float64)."""
import numpy as np

from boltzlens.bayesnet import chain_posterior, decompose, factor_normalization_check
from boltzlens.nn import checkpoint
from boltzlens.nn.gradcheck import gradient_check
from boltzlens.nn.layers import ConvParams, conv2d_forward, conv2d_im2col, softmax
from boltzlens.nn.network import PRESETS, forward, init_params, tiny_spec
from boltzlens.synthgen.generator import gaussian_draw, place_values, sample_seed
from boltzlens.synthgen.masks import center_crop_downsample, decompose_mask, extract_edge


def check_gradients(seed=0):
    net = init_params(tiny_spec(), seed)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, 12, 12, 1))
    worst = gradient_check(net, x, rng.integers(0, 10, 2))
    return worst < 1e-4, f"max relative error {worst:.2e}"


def check_im2col(cases=50, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        h, w = rng.integers(4, 17, 2)
        c, k, o = rng.integers(1, 5), rng.integers(1, 4), rng.integers(1, 5)
        p = ConvParams(rng.normal(size=(k, k, c, o)), rng.normal(size=o))
        x = rng.normal(size=(h, w, c))
        worst = max(worst, np.abs(conv2d_forward(x, p) - conv2d_im2col(x, p)).max())
    return worst < 1e-10, f"max abs diff {worst:.1e} over {cases} cases"


def check_posterior(inputs=10, seed=0):
    rng = np.random.default_rng(seed)
    mismatches = 0
    for name, spec in PRESETS.items():
        net = init_params(spec, seed)
        for _ in range(inputs):
            x = 32.0 * rng.normal(size=spec.input_shape)
            mismatches += not np.array_equal(chain_posterior(net, x), forward(net, x))
    return mismatches == 0, f"{mismatches} mismatches"


def check_factors(seed=0):
    net = init_params(PRESETS["cnn2"], seed)
    x = 32.0 * np.random.default_rng(seed).normal(size=(32, 32, 1))
    result = factor_normalization_check(decompose(net, x))
    failed = [k for k, ok in result.items() if not ok]
    return not failed, "all factors normalized" if not failed else f"failed: {failed}"


def check_partition(samples=20, seed=0):
    rng = np.random.default_rng(seed)
    for i in range(samples):
        mask = center_crop_downsample(rng.random((28, 28)) > 0.6)
        d = decompose_mask(mask, extract_edge(mask))
        if not d.is_partition():
            return False, f"sample {i} is not a partition"
        draw = gaussian_draw(sample_seed(seed, i))
        if not np.array_equal(np.sort(place_values(d, draw).ravel()), np.sort(draw)):
            return False, f"sample {i} is not a permutation of its draw"
    return True, f"{samples} masks partition the grid"


def check_softmax(seed=0):
    z = np.random.default_rng(seed).uniform(-500, 500, size=(200, 10))
    err = np.abs(softmax(z).sum(axis=1) - 1).max()
    return err < 1e-12, f"max normalization error {err:.1e}"


def check_checkpoint(seed=0):
    net = init_params(PRESETS["cnn1"], seed)
    data = checkpoint.dumps(net)
    back = checkpoint.loads(data)
    same = all(np.array_equal(a, b) for a, b in zip(net.arrays(), back.arrays()))
    return same and checkpoint.dumps(back) == data, "round trip"


CHECKS = {
    "gradient": check_gradients,
    "im2col": check_im2col,
    "posterior": check_posterior,
    "factors": check_factors,
    "partition": check_partition,
    "softmax": check_softmax,
    "checkpoint": check_checkpoint,
}


def run_all():
    """``[(name, passed, detail)]`` for every check."""
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
