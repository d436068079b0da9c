from boltzlens.nn.layers import (
    ConvParams, FcParams, conv2d_forward, conv2d_im2col, cross_entropy_loss, fc_forward,
    maxpool_forward, relu, softmax,
)
from boltzlens.nn.network import (
    PRESETS, Conv, Fc, Flatten, LayerTrace, MaxPool, Network, NetworkSpec, ReLU, Softmax,
    backward, forward, forward_with_trace, get_preset, init_params, sgd_step, tiny_spec,
)
from boltzlens.nn.training import error_rate, predict_proba, sgd_epoch

__all__ = [
    "ConvParams", "FcParams", "conv2d_forward", "conv2d_im2col", "cross_entropy_loss",
    "fc_forward", "maxpool_forward", "relu", "softmax", "PRESETS", "Conv", "Fc", "Flatten",
    "LayerTrace", "MaxPool", "Network", "NetworkSpec", "ReLU", "Softmax", "backward", "forward",
    "forward_with_trace", "get_preset", "init_params", "sgd_step", "tiny_spec", "error_rate",
    "predict_proba", "sgd_epoch",
]
