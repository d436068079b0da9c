"""Minibatch SGD over in-memory arrays."""
import os

import numpy as np

from boltzlens.nn.network import backward, forward, forward_with_trace, sgd_step

PRECISION_ENV = "BOLTZLENS_PRECISION"
DEFAULT_BATCH_SIZE = 32
DEFAULT_LR = 0.01


def precision_dtype(value=None):
    """Resolve ``f32``/``f64`` (default: the BOLTZLENS_PRECISION env var, else f64)."""
    value = value or os.environ.get(PRECISION_ENV, "f64")
    try:
        return {"f32": np.float32, "f64": np.float64}[value]
    except KeyError:
        raise ValueError(f"{PRECISION_ENV} must be f32 or f64, got {value!r}") from None


def sgd_epoch(net, X, y, lr=DEFAULT_LR, batch_size=DEFAULT_BATCH_SIZE, rng=None):
    """One pass over ``(X, y)`` in seeded-shuffled order. Returns the mean loss."""
    n = X.shape[0]
    order = rng.permutation(n) if rng is not None else np.arange(n)
    total = 0.0
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        probs, trace = forward_with_trace(net, X[idx])
        picked = probs[np.arange(len(idx)), y[idx]]
        total += float(-np.log(np.maximum(picked, 1e-12)).sum())
        sgd_step(net, backward(net, trace, y[idx]), lr)
    return total / n


def predict_proba(net, X, batch_size=256):
    out = [forward(net, X[s:s + batch_size]) for s in range(0, X.shape[0], batch_size)]
    return np.concatenate(out) if out else np.zeros((0, net.spec.n_classes))


def error_rate(net, X, y, batch_size=256):
    """Fraction of samples whose argmax prediction differs from the label."""
    if X.shape[0] == 0:
        return 0.0
    pred = predict_proba(net, X, batch_size).argmax(axis=1)
    return float(np.mean(pred != y))
