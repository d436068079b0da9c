"""Central finite-difference check of backprop gradients."""
import numpy as np

from boltzlens.nn.network import backward, forward_with_trace, loss


def relative_error(a, b, floor=1e-7):
    return abs(a - b) / max(abs(a), abs(b), floor)


def gradient_check(net, x, labels, h=1e-5):
    """Worst relative error between backprop and central differences over all parameters."""
    _, trace = forward_with_trace(net, x)
    grads = backward(net, trace, labels)
    worst = 0.0
    for p, gp in zip(net.params, grads):
        for name, arr in vars(p).items():
            g = getattr(gp, name)
            for i in np.ndindex(arr.shape):
                old = arr[i]
                arr[i] = old + h
                up = loss(net, x, labels)
                arr[i] = old - h
                down = loss(net, x, labels)
                arr[i] = old
                worst = max(worst, relative_error(g[i], (up - down) / (2 * h)))
    return worst
