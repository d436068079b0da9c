"""Declarative network specs, the Table-style presets, and forward/backward passes."""
from dataclasses import dataclass, field

import numpy as np

from boltzlens.errors import DimensionError, StaleTraceError
from boltzlens.nn import layers as L


@dataclass(frozen=True)
class Conv:
    kernel: int
    out_channels: int


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class MaxPool:
    window: int = 2


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Fc:
    out: int


@dataclass(frozen=True)
class Softmax:
    pass


LAYER_TYPES = {cls.__name__: cls for cls in (Conv, ReLU, MaxPool, Flatten, Fc, Softmax)}
PARAMETRIC = (Conv, Fc)


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_shape: tuple = (32, 32, 1)
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        self.shapes()

    def shapes(self):
        """Output shape after every layer; raises on an inconsistent chain."""
        shape = self.input_shape
        out = []
        for pos, layer in enumerate(self.layers):
            if isinstance(layer, Conv):
                if len(shape) != 3:
                    raise DimensionError(f"layer {pos}: Conv needs a spatial input, got {shape}",
                                         axis="rank")
                h, w = shape[0] - layer.kernel + 1, shape[1] - layer.kernel + 1
                if h < 1 or w < 1:
                    raise DimensionError(f"layer {pos}: kernel {layer.kernel} exceeds input {shape}",
                                         axis="height")
                shape = (h, w, layer.out_channels)
            elif isinstance(layer, MaxPool):
                if len(shape) != 3:
                    raise DimensionError(f"layer {pos}: MaxPool needs a spatial input", axis="rank")
                h, w = shape[0] // layer.window, shape[1] // layer.window
                if h < 1 or w < 1:
                    raise DimensionError(f"layer {pos}: pooling {shape} leaves nothing",
                                         axis="height")
                shape = (h, w, shape[2])
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            elif isinstance(layer, Fc):
                if len(shape) != 1:
                    raise DimensionError(f"layer {pos}: Fc needs a flat input, insert Flatten",
                                         axis="rank")
                shape = (layer.out,)
            elif not isinstance(layer, (ReLU, Softmax)):
                raise TypeError(f"unknown layer descriptor {layer!r}")
            out.append(shape)
        return out

    @property
    def n_classes(self):
        return self.shapes()[-1][0]

    def to_dict(self):
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "layers": [[type(l).__name__, *vars(l).values()] for l in self.layers],
        }

    @classmethod
    def from_dict(cls, d):
        layers = [LAYER_TYPES[item[0]](*item[1:]) for item in d["layers"]]
        return cls(layers=layers, input_shape=tuple(d["input_shape"]), name=d.get("name", "custom"))


def cnn_preset(first_channels, name="custom"):
    """Two conv+pool blocks, a 20-unit hidden FC layer, 10-way softmax."""
    return NetworkSpec(
        layers=(
            Conv(3, first_channels), ReLU(), MaxPool(2),
            Conv(5, 20), ReLU(), MaxPool(2),
            Flatten(), Fc(20), ReLU(),
            Fc(10), Softmax(),
        ),
        input_shape=(32, 32, 1),
        name=name,
    )


PRESETS = {
    "cnn1": cnn_preset(4, "cnn1"),
    "cnn2": cnn_preset(12, "cnn2"),
    "cnn3": cnn_preset(20, "cnn3"),
}


def tiny_spec():
    """Smallest net containing every layer type; second pool hits the floor case."""
    return NetworkSpec(
        layers=(
            Conv(3, 2), ReLU(), MaxPool(2),
            Conv(3, 2), ReLU(), MaxPool(2),
            Flatten(), Fc(8), ReLU(),
            Fc(10), Softmax(),
        ),
        input_shape=(12, 12, 1),
        name="tiny",
    )


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class Network:
    """A spec plus its learned parameters, one entry per Conv/Fc layer."""

    spec: NetworkSpec
    params: list

    @property
    def dtype(self):
        return self.params[0].bias.dtype

    def parametric_layers(self):
        return [i for i, l in enumerate(self.spec.layers) if isinstance(l, PARAMETRIC)]

    def copy(self):
        return Network(self.spec, [type(p)(*(a.copy() for a in vars(p).values())) for p in self.params])

    def astype(self, dtype):
        return Network(self.spec, [type(p)(*(a.astype(dtype) for a in vars(p).values()))
                                   for p in self.params])

    def arrays(self):
        """Flat list of parameter arrays in layer order (weights, then bias)."""
        return [a for p in self.params for a in vars(p).values()]


def init_params(spec, seed, dtype=np.float64):
    """Glorot-uniform weights, zero biases; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    shapes = spec.shapes()
    params = []
    prev = spec.input_shape
    for layer, shape in zip(spec.layers, shapes):
        if isinstance(layer, Conv):
            k = layer.kernel
            fan_in, fan_out = k * k * prev[2], k * k * layer.out_channels
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(k, k, prev[2], layer.out_channels))
            params.append(L.ConvParams(w.astype(dtype), np.zeros(layer.out_channels, dtype)))
        elif isinstance(layer, Fc):
            fan_in, fan_out = prev[0], layer.out
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            params.append(L.FcParams(w.astype(dtype), np.zeros(fan_out, dtype)))
        prev = shape
    return Network(spec, params)


def zeros_like_network(spec, dtype=np.float64):
    net = init_params(spec, 0, dtype)
    for a in net.arrays():
        a[...] = 0
    return net


@dataclass
class LayerRecord:
    """Pre-activation (linear map or pool input) and activation of one layer.

    For Conv/Fc layers ``activation`` is after the following ReLU, if any.
    For MaxPool layers ``pre`` is the pool input and ``activation`` the output.
    """

    kind: str
    layer_index: int
    pre: np.ndarray
    act: np.ndarray
    batched: bool = True

    @property
    def pre_activation(self):
        return self.pre if self.batched else self.pre[0]

    @property
    def activation(self):
        return self.act if self.batched else self.act[0]


@dataclass
class LayerTrace:
    spec: NetworkSpec
    records: list
    probs: np.ndarray
    batched: bool = True
    # per spec layer: the layer input and any backward cache
    _steps: list = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def by_layer(self, layer_index):
        for r in self.records:
            if r.layer_index == layer_index:
                return r
        raise KeyError(f"no traced record for layer {layer_index}")


def _forward(net, xb):
    spec = net.spec
    pit = iter(net.params)
    steps = []
    records = []
    h = xb
    logits = None
    for pos, layer in enumerate(spec.layers):
        inp = h
        cache = None
        if isinstance(layer, Conv):
            p = next(pit)
            h, cache = L.conv2d_im2col(h, p, return_cols=True)
            records.append(LayerRecord("conv", pos, h, h))
        elif isinstance(layer, Fc):
            p = next(pit)
            h = L.fc_forward(h, p)
            records.append(LayerRecord("fc", pos, h, h))
            logits = h
        elif isinstance(layer, ReLU):
            h = L.relu(h)
            records[-1].act = h
        elif isinstance(layer, MaxPool):
            h, cache = L.maxpool_forward(h, layer.window)
            records.append(LayerRecord("pool", pos, inp, h))
        elif isinstance(layer, Flatten):
            h = h.reshape(h.shape[0], -1)
        elif isinstance(layer, Softmax):
            logits = h
            h = L.softmax(h)
        steps.append((inp, cache))
    return h, records, steps, logits


def _check_input(net, xb):
    want = net.spec.input_shape
    got = xb.shape[1:]
    if got != want:
        axes = ("height", "width", "channels")
        axis = next((axes[i] for i in range(min(len(got), len(want))) if got[i] != want[i]), "rank")
        raise DimensionError(f"input shape {got} does not match network input {want}", axis=axis)


def forward(net, x):
    """Class probabilities for one sample ``(H, W, C)`` or a batch."""
    x = np.asarray(x, dtype=net.dtype)
    single = x.ndim == len(net.spec.input_shape)
    xb = x[None] if single else x
    _check_input(net, xb)
    probs, _, _, _ = _forward(net, xb)
    return probs[0] if single else probs


def forward_with_trace(net, x):
    """Forward pass keeping every Conv/Fc/MaxPool layer's pre-activation and activation."""
    x = np.asarray(x, dtype=net.dtype)
    single = x.ndim == len(net.spec.input_shape)
    xb = x[None] if single else x
    _check_input(net, xb)
    probs, records, steps, _ = _forward(net, xb)
    for r in records:
        r.batched = not single
    trace = LayerTrace(net.spec, records, probs, batched=not single, _steps=steps)
    return (probs[0] if single else probs), trace


def backward(net, trace, label):
    """Gradients of the mean cross-entropy w.r.t. every parameter.

    Returns a list parallel to ``net.params`` holding ``ConvParams``/``FcParams``
    of gradients.
    """
    if trace.spec != net.spec or not trace._steps:
        raise StaleTraceError("trace was not produced by this network", axis="spec")
    label = np.atleast_1d(np.asarray(label))
    probs = trace.probs
    n = probs.shape[0]
    if label.shape != (n,):
        raise DimensionError(f"{label.shape[0]} labels for a batch of {n}", axis="batch")
    if np.any(label < 0) or np.any(label >= probs.shape[1]):
        raise ValueError("label out of range")

    layers = net.spec.layers
    pidx = len(net.params)
    grads = [None] * len(net.params)
    # softmax + cross-entropy collapse to probs - onehot at the logits
    g = probs.copy()
    g[np.arange(n), label] -= 1.0
    g /= n
    for pos in range(len(layers) - 1, -1, -1):
        layer = layers[pos]
        inp, cache = trace._steps[pos]
        if isinstance(layer, Softmax):
            continue
        if isinstance(layer, ReLU):
            g = g * (inp > 0)
        elif isinstance(layer, Flatten):
            g = g.reshape(inp.shape)
        elif isinstance(layer, MaxPool):
            g = L.maxpool_backward(g, cache, inp.shape, layer.window)
        elif isinstance(layer, Fc):
            pidx -= 1
            p = net.params[pidx]
            if inp.shape[1] != p.weights.shape[0]:
                raise StaleTraceError("trace shapes do not match network parameters",
                                      axis="features")
            grads[pidx] = L.FcParams(inp.T @ g, g.sum(axis=0))
            g = g @ p.weights.T
        elif isinstance(layer, Conv):
            pidx -= 1
            p = net.params[pidx]
            kh, kw = p.kernel
            cout = p.out_channels
            if cache.shape[1] != kh * kw * p.in_channels:
                raise StaleTraceError("trace shapes do not match network parameters",
                                      axis="channels")
            g2 = g.reshape(-1, cout)
            grads[pidx] = L.ConvParams((cache.T @ g2).reshape(p.filters.shape), g2.sum(axis=0))
            if pos > 0:
                g = L.col2im(g2 @ p.filters.reshape(-1, cout).T, inp.shape, kh, kw)
    return grads


def sgd_step(net, grads, lr):
    """In-place ``p <- p - lr * grad`` on every parameter; returns ``net``."""
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    for p, gp in zip(net.params, grads):
        for name, arr in vars(p).items():
            arr -= lr * getattr(gp, name)
    return net


def loss(net, x, label):
    """Mean cross-entropy of the network on ``x``."""
    probs = forward(net, x)
    probs = np.atleast_2d(probs)
    return float(np.mean(L.cross_entropy_loss(probs, np.atleast_1d(label))))
