"""Gaussian synthetic digits: mask-driven placement of a sorted N(0, 32^2) draw."""
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from boltzlens.errors import DatasetError
from boltzlens.synthgen.masks import (
    CROSS, GRID, binarize, center_crop_downsample, decompose_mask, extract_edge,
)

SIGMA = 32.0
N_PIXELS = GRID * GRID
N_CLASSES = 10
_MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One SplitMix64 output for state ``x``; used to derive per-sample seeds."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def sample_seed(master_seed, counter):
    return splitmix64((int(master_seed) + int(counter)) & _MASK64)


def _generator(seed):
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))


def gaussian_draw(seed, n=N_PIXELS, sigma=SIGMA):
    """Box-Muller normals from a Philox (counter-based) uniform stream."""
    m = (n + 1) // 2
    u = _generator(seed).random((m, 2))
    r = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))  # 1-u lies in (0, 1]
    theta = 2.0 * np.pi * u[:, 1]
    z = np.column_stack([r * np.cos(theta), r * np.sin(theta)]).ravel()[:n]
    return sigma * z


@dataclass
class SyntheticSample:
    pixels: np.ndarray  # (32, 32) float64
    label: int
    seed: int
    source_id: str


def source_masks(pixels, threshold=127, selem=CROSS):
    mask = center_crop_downsample(binarize(pixels, threshold))
    return decompose_mask(mask, extract_edge(mask, selem), selem)


def place_values(decomp, values, shuffle_rng=None, flip_polarity=False):
    """Write descending-sorted ``values`` region by region.

    Regions are filled in the order outside, outside boundary, inside boundary,
    inside, each in raster order unless ``shuffle_rng`` permutes positions
    within the region. ``flip_polarity`` sorts ascending instead.
    """
    ordered = np.sort(values)
    if not flip_polarity:
        ordered = ordered[::-1]
    out = np.empty(N_PIXELS, dtype=np.float64)
    start = 0
    for region in decomp.regions():
        pos = np.flatnonzero(region.ravel())
        if shuffle_rng is not None:
            pos = shuffle_rng.permutation(pos)
        out[pos] = ordered[start:start + pos.size]
        start += pos.size
    return out.reshape(GRID, GRID)


def generate_sample(src, seed, threshold=127, shuffle_within=False, flip_polarity=False,
                    selem=CROSS):
    decomp = source_masks(src.pixels, threshold, selem)
    values = gaussian_draw(seed)
    # shuffle stream keyed off the complement of the seed so the draw is untouched
    shuffle_rng = _generator(~int(seed) & _MASK64) if shuffle_within else None
    pixels = place_values(decomp, values, shuffle_rng, flip_polarity)
    return SyntheticSample(pixels, int(src.label), int(seed), src.id)


@dataclass
class SyntheticDataset:
    """Synthetic images with labels; ``splits`` marks each sample train/test."""

    images: np.ndarray  # (N, 32, 32)
    labels: np.ndarray  # (N,) int
    seeds: np.ndarray  # (N,) uint64
    splits: np.ndarray  # (N,) "train" | "test"
    source_ids: list = field(default_factory=list)
    master_seed: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.images.shape[0]

    def subset(self, split):
        keep = self.splits == split
        return SyntheticDataset(
            self.images[keep], self.labels[keep], self.seeds[keep], self.splits[keep],
            [s for s, k in zip(self.source_ids, keep) if k] if self.source_ids else [],
            self.master_seed, dict(self.meta),
        )

    def arrays(self, split, dtype=np.float64):
        """``(X, y)`` for one split, X shaped ``(N, 32, 32, 1)``."""
        keep = self.splits == split
        return self.images[keep][..., None].astype(dtype), self.labels[keep].astype(np.int64)

    def class_counts(self, split=None):
        labels = self.labels if split is None else self.labels[self.splits == split]
        counts = Counter(int(v) for v in labels)
        return {c: counts.get(c, 0) for c in range(N_CLASSES)}

    def samples(self):
        ids = self.source_ids or [""] * len(self)
        return [SyntheticSample(self.images[i], int(self.labels[i]), int(self.seeds[i]), ids[i])
                for i in range(len(self))]


def _split_pools(sources):
    by_class = {}
    for s in sources:
        by_class.setdefault(int(s.label), []).append(s)
    pools = {}
    for c, items in by_class.items():
        cut = (len(items) + 1) // 2
        pools[c] = {"train": items[:cut], "test": items[cut:]}
    return pools


def generate_dataset(sources, per_class_train, per_class_test, seed, allow_reuse=True,
                     threshold=127, shuffle_within=False, flip_polarity=False):
    """Deterministic train+test dataset from a labelled source corpus.

    Each class's sources are split in half (first half feeds train, second
    half test) so the two splits never share a source digit. When more samples
    are requested than a pool holds, sources are cycled with fresh seeds.
    Sample ``i`` (train samples first, classes in order) uses seed
    ``splitmix64(seed + i)``.
    """
    pools = _split_pools(sources)
    plan = []
    for split, per_class in (("train", per_class_train), ("test", per_class_test)):
        for c in range(N_CLASSES):
            if per_class == 0:
                continue
            pool = pools.get(c, {}).get(split, [])
            if not pool:
                raise DatasetError(f"no {split} sources for class {c}")
            if not allow_reuse and per_class > len(pool):
                raise DatasetError(
                    f"class {c} has {len(pool)} {split} sources, {per_class} requested"
                )
            plan += [(split, pool[k % len(pool)]) for k in range(per_class)]

    images = np.empty((len(plan), GRID, GRID))
    labels = np.empty(len(plan), dtype=np.int64)
    seeds = np.empty(len(plan), dtype=np.uint64)
    splits = np.empty(len(plan), dtype=object)
    ids = []
    mask_cache = {}
    for i, (split, src) in enumerate(plan):
        s = sample_seed(seed, i)
        decomp = mask_cache.get(id(src))
        if decomp is None:
            decomp = mask_cache[id(src)] = source_masks(src.pixels, threshold)
        shuffle_rng = _generator(~s & _MASK64) if shuffle_within else None
        images[i] = place_values(decomp, gaussian_draw(s), shuffle_rng, flip_polarity)
        labels[i] = src.label
        seeds[i] = s
        splits[i] = split
        ids.append(src.id)
    return SyntheticDataset(images, labels, seeds, splits.astype(str), ids, int(seed),
                            {"per_class_train": per_class_train, "per_class_test": per_class_test})


def randomize_labels(ds, seed):
    """Replace every label by a uniform draw over 0..9; pixels untouched.

    Train and test labels come from separate streams of the seeded generator.
    """
    labels = ds.labels.copy()
    for k, split in enumerate(("train", "test")):
        keep = ds.splits == split
        rng = np.random.default_rng([int(seed), k])
        labels[keep] = rng.integers(0, N_CLASSES, size=int(keep.sum()))
    meta = dict(ds.meta, label_seed=int(seed), labels="random")
    return SyntheticDataset(ds.images, labels, ds.seeds, ds.splits, list(ds.source_ids),
                            ds.master_seed, meta)
