"""Dense CNN primitives on numpy arrays laid out as ``(N, H, W, C)``.

Every forward op also accepts a single unbatched sample (``(H, W, C)`` for
spatial ops, ``(D,)`` for dense ops) and returns an unbatched result in that
case. Convolution is valid cross-correlation with stride 1.
"""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from boltzlens.errors import DimensionError

LOG_EPS = 1e-12


@dataclass
class ConvParams:
    """Filters ``[kH, kW, inC, outC]`` and bias ``[outC]``."""

    filters: np.ndarray
    bias: np.ndarray

    @property
    def kernel(self):
        return self.filters.shape[:2]

    @property
    def in_channels(self):
        return self.filters.shape[2]

    @property
    def out_channels(self):
        return self.filters.shape[3]


@dataclass
class FcParams:
    """Weights ``[in, out]`` and bias ``[out]``."""

    weights: np.ndarray
    bias: np.ndarray


def _as_batch(x, ndim):
    x = np.asarray(x)
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise DimensionError(
            f"expected {ndim - 1}-d sample or {ndim}-d batch, got shape {x.shape}",
            axis="rank",
        )
    return x, False


def _check_conv(x, params):
    _, h, w, c = x.shape
    kh, kw, in_c, _ = params.filters.shape
    if c != in_c:
        raise DimensionError(
            f"input has {c} channels but filters expect {in_c}", axis="channels"
        )
    if kh > h:
        raise DimensionError(f"kernel height {kh} exceeds input height {h}", axis="height")
    if kw > w:
        raise DimensionError(f"kernel width {kw} exceeds input width {w}", axis="width")
    if params.bias.shape != (params.out_channels,):
        raise DimensionError(
            f"bias shape {params.bias.shape} does not match {params.out_channels} filters",
            axis="out_channels",
        )


def conv2d_forward(x, params):
    """Valid stride-1 cross-correlation by shift-and-accumulate.

    Output channel ``n`` is ``sum_q S[:, :, q, n] * x[..., q] + b[n]``.
    """
    xb, single = _as_batch(x, 4)
    _check_conv(xb, params)
    kh, kw = params.kernel
    oh, ow = xb.shape[1] - kh + 1, xb.shape[2] - kw + 1
    out = np.zeros((xb.shape[0], oh, ow, params.out_channels),
                   dtype=np.result_type(xb, params.filters))
    for i in range(kh):
        for j in range(kw):
            out += xb[:, i:i + oh, j:j + ow, :] @ params.filters[i, j]
    out += params.bias
    return out[0] if single else out


def im2col(x, kh, kw):
    """Unroll ``(N, H, W, C)`` into patch rows ``(N*oH*oW, kH*kW*C)``.

    Column order is (row offset, column offset, channel), matching
    ``filters.reshape(kH*kW*C, outC)``.
    """
    n, h, w, c = x.shape
    oh, ow = h - kh + 1, w - kw + 1
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))  # (N, oH, oW, C, kH, kW)
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(n * oh * ow, kh * kw * c)


def col2im(cols, x_shape, kh, kw):
    """Adjoint of :func:`im2col`: scatter-add patch rows back onto the image."""
    n, h, w, c = x_shape
    oh, ow = h - kh + 1, w - kw + 1
    cols = cols.reshape(n, oh, ow, kh, kw, c)
    out = np.zeros(x_shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, i:i + oh, j:j + ow, :] += cols[:, :, :, i, j, :]
    return out


def conv2d_im2col(x, params, return_cols=False):
    """Same result as :func:`conv2d_forward`, computed as one matrix product."""
    xb, single = _as_batch(x, 4)
    _check_conv(xb, params)
    kh, kw = params.kernel
    n, h, w, _ = xb.shape
    oh, ow = h - kh + 1, w - kw + 1
    cols = im2col(xb, kh, kw)
    mat = params.filters.reshape(-1, params.out_channels)
    out = (cols @ mat + params.bias).reshape(n, oh, ow, params.out_channels)
    if single:
        out = out[0]
    if return_cols:
        return out, cols
    return out


def conv_unrolled_matrix(in_shape, filters, out_channel):
    """Dense matrix ``W`` with ``vec(conv(x)[..., k]) = W @ vec(x)``.

    ``vec`` flattens ``(H, W, C)`` channel-major: all of channel 0 in raster
    order, then channel 1, and so on.
    """
    h, w, c = in_shape
    kh, kw = filters.shape[:2]
    oh, ow = h - kh + 1, w - kw + 1
    mat = np.zeros((oh * ow, c * h * w), dtype=filters.dtype)
    for r in range(oh):
        for s in range(ow):
            row = r * ow + s
            for q in range(c):
                for i in range(kh):
                    for j in range(kw):
                        mat[row, q * h * w + (r + i) * w + (s + j)] = filters[i, j, q, out_channel]
    return mat


def relu(x):
    return np.maximum(x, 0)


def maxpool_forward(x, window=2):
    """Non-overlapping max pooling with floor semantics on odd sizes.

    Returns the pooled array and the flat in-window argmax (``0..window**2-1``)
    of every output cell, used to route gradients in the backward pass.
    """
    xb, single = _as_batch(x, 4)
    n, h, w, c = xb.shape
    oh, ow = h // window, w // window
    if oh == 0 or ow == 0:
        raise DimensionError(
            f"pool window {window} larger than input {h}x{w}",
            axis="height" if oh == 0 else "width",
        )
    blocks = xb[:, :oh * window, :ow * window, :].reshape(n, oh, window, ow, window, c)
    blocks = blocks.transpose(0, 1, 3, 5, 2, 4).reshape(n, oh, ow, c, window * window)
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    if single:
        return out[0], idx[0]
    return out, idx


def maxpool_backward(grad_out, idx, in_shape, window=2):
    """Route each output gradient to the stored argmax position."""
    n, h, w, c = in_shape
    _, oh, ow, _ = grad_out.shape
    onehot = np.zeros(grad_out.shape + (window * window,), dtype=grad_out.dtype)
    np.put_along_axis(onehot, idx[..., None], grad_out[..., None], axis=-1)
    onehot = onehot.reshape(n, oh, ow, c, window, window).transpose(0, 1, 4, 2, 5, 3)
    grad_in = np.zeros(in_shape, dtype=grad_out.dtype)
    grad_in[:, :oh * window, :ow * window, :] = onehot.reshape(n, oh * window, ow * window, c)
    return grad_in


def fc_forward(x, params):
    """``out = W.T @ x + b`` for a flat input (or a batch of them)."""
    xb, single = _as_batch(x, 2)
    if xb.shape[1] != params.weights.shape[0]:
        raise DimensionError(
            f"input length {xb.shape[1]} does not match weights fan-in "
            f"{params.weights.shape[0]}",
            axis="features",
        )
    out = xb @ params.weights + params.bias
    return out[0] if single else out


def softmax(logits):
    """Max-shifted softmax over the last axis."""
    z = np.asarray(logits)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_loss(probs, label):
    """``-log(probs[label])`` with probabilities clamped at ``1e-12``.

    Batched form takes ``(N, L)`` probabilities and ``(N,)`` labels and
    returns per-sample losses.
    """
    probs = np.asarray(probs)
    label = np.asarray(label)
    n_classes = probs.shape[-1]
    if np.any(label < 0) or np.any(label >= n_classes):
        raise ValueError(f"label out of range for {n_classes} classes: {label}")
    if probs.ndim == 1:
        return float(-np.log(max(probs[int(label)], LOG_EPS)))
    picked = probs[np.arange(probs.shape[0]), label]
    return -np.log(np.maximum(picked, LOG_EPS))
