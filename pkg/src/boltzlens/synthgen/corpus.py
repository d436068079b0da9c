"""A bundled digit corpus for machines without NIST/MNIST files.

The 8x8 UCI handwritten digits shipped with scikit-learn are bilinearly
upsampled to 28x28 and rescaled to 0..255, which routes them through the
28x28 (pad-to-32) branch of the mask pipeline exactly like MNIST.
"""
import numpy as np
from scipy.ndimage import zoom
from sklearn.datasets import load_digits

from boltzlens.synthgen.idx import SourceImage, write_idx

SIDE = 28
# 8x8 digits fill their frame; shrink to 24 and pad so strokes do not touch the border
INNER = 24


def digits_images():
    """``(images uint8 (N, 28, 28), labels (N,))`` from scikit-learn's digits."""
    d = load_digits()
    up = zoom(d.images, (1, INNER / 8, INNER / 8), order=1)
    up = np.clip(up * (255.0 / 16.0), 0, 255).round().astype(np.uint8)
    pad = (SIDE - INNER) // 2
    images = np.pad(up, ((0, 0), (pad, pad), (pad, pad)))
    return images, d.target.astype(np.uint8)


def digits_corpus():
    images, labels = digits_images()
    return [SourceImage(images[i], int(labels[i]), f"sklearn-digits:{i}")
            for i in range(images.shape[0])]


def write_digits_idx(images_path, labels_path):
    images, labels = digits_images()
    write_idx(images, labels, images_path, labels_path)
    return images.shape[0]
