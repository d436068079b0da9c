"""Binary mask preparation and the four-region decomposition."""
from dataclasses import dataclass

import numpy as np

from boltzlens.errors import DimensionError

GRID = 32
CROP = 64
MIN_SIDE = 28

CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
SQUARE = np.ones((3, 3), dtype=bool)


@dataclass
class MaskDecomposition:
    outside: np.ndarray
    outside_boundary: np.ndarray
    inside_boundary: np.ndarray
    inside: np.ndarray

    REGIONS = ("outside", "outside_boundary", "inside_boundary", "inside")

    def regions(self):
        """Masks in assignment order: outside, outside boundary, inside boundary, inside."""
        return [getattr(self, name) for name in self.REGIONS]

    def sizes(self):
        return [int(m.sum()) for m in self.regions()]

    def is_partition(self):
        stack = np.stack(self.regions()).astype(np.int64)
        return bool(np.all(stack.sum(axis=0) == 1))


def binarize(pixels, threshold=127):
    if not 0 < threshold < 255:
        raise ValueError(f"threshold must lie in (0, 255), got {threshold}")
    return np.asarray(pixels) > threshold


def _fit_axis(mask, axis):
    n = mask.shape[axis]
    if n < MIN_SIDE:
        name = "height" if axis == 0 else "width"
        raise DimensionError(f"image {name} {n} is smaller than {MIN_SIDE}", axis=name)
    if n < GRID:
        before = (GRID - n) // 2
        pad = [(0, 0), (0, 0)]
        pad[axis] = (before, GRID - n - before)
        return np.pad(mask, pad)
    target = CROP if n >= CROP else GRID
    start = (n - target) // 2
    return np.take(mask, np.arange(start, start + target), axis=axis)


def center_crop_downsample(mask):
    """Bring a binary mask to 32x32.

    Sides >= 64 are center-cropped to 64 then 2x2-downsampled (a cell is set when
    at least two of its four pixels are). Sides in [28, 32) are zero-padded
    symmetrically, sides in [32, 64) center-cropped to 32.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DimensionError(f"mask must be 2-d, got shape {mask.shape}", axis="rank")
    out = _fit_axis(_fit_axis(mask, 0), 1)
    if out.shape == (CROP, CROP):
        out = out.reshape(GRID, 2, GRID, 2).sum(axis=(1, 3)) >= 2
    elif out.shape != (GRID, GRID):
        # one side >= 64, the other not: downsample only the long side
        h, w = out.shape
        if h == CROP:
            out = out.reshape(GRID, 2, w).sum(axis=1) >= 1
        if w == CROP:
            out = out.reshape(out.shape[0], GRID, 2).sum(axis=2) >= 1
    return out


def _shift_stack(mask, selem, fill):
    kh, kw = selem.shape
    padded = np.pad(mask, ((kh // 2,) * 2, (kw // 2,) * 2), constant_values=fill)
    h, w = mask.shape
    return [padded[i:i + h, j:j + w] for i in range(kh) for j in range(kw) if selem[i, j]]


def erode(mask, selem=CROSS):
    """Binary erosion; pixels beyond the border count as background."""
    return np.logical_and.reduce(_shift_stack(np.asarray(mask, bool), selem, False))


def dilate(mask, selem=CROSS):
    return np.logical_or.reduce(_shift_stack(np.asarray(mask, bool), selem, False))


def extract_edge(mask, selem=CROSS):
    """Foreground pixels with at least one background neighbour under ``selem``."""
    mask = np.asarray(mask, dtype=bool)
    return mask & ~erode(mask, selem)


def decompose_mask(mask, edge, selem=CROSS):
    mask = np.asarray(mask, dtype=bool)
    edge = np.asarray(edge, dtype=bool)
    inside_boundary = edge & mask
    inside = mask & ~edge
    outside_boundary = dilate(mask, selem) & ~mask
    outside = ~(inside | inside_boundary | outside_boundary)
    return MaskDecomposition(outside, outside_boundary, inside_boundary, inside)
