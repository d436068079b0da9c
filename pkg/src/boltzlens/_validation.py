"""Input validation shared by the estimator wrappers."""
import numpy as np
from sklearn.utils.validation import check_array

from boltzlens.errors import DimensionError


def check_images(X, side=32, dtype=np.float64):
    """Coerce ``(N, side*side)``, ``(N, side, side)`` or ``(N, side, side, 1)`` to NHWC."""
    X = check_array(X, allow_nd=True, dtype=dtype, ensure_2d=False)
    if X.ndim == 2 and X.shape[1] == side * side:
        X = X.reshape(-1, side, side)
    if X.ndim == 3:
        X = X[..., None]
    if X.ndim != 4 or X.shape[1:] != (side, side, 1):
        raise DimensionError(f"expected {side}x{side} grayscale images, got shape {X.shape}",
                             axis="height")
    return X


def check_grayscale_stack(X):
    """``(N, H, W)`` array of source images with values in [0, 255]."""
    X = check_array(X, allow_nd=True, dtype=None, ensure_2d=False)
    if X.ndim != 3:
        raise DimensionError(f"expected (N, H, W) images, got shape {X.shape}", axis="rank")
    if X.size and (X.min() < 0 or X.max() > 255):
        raise ValueError("pixel values must lie in [0, 255]")
    return X
