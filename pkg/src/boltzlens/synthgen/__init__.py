from boltzlens.synthgen.generator import (
    SyntheticDataset, SyntheticSample, gaussian_draw, generate_dataset, generate_sample,
    randomize_labels, sample_seed,
)
from boltzlens.synthgen.idx import SourceImage, load_idx, write_idx
from boltzlens.synthgen.masks import (
    MaskDecomposition, binarize, center_crop_downsample, decompose_mask, extract_edge,
)
from boltzlens.synthgen.storage import load_dataset, save_dataset

__all__ = [
    "SyntheticDataset", "SyntheticSample", "gaussian_draw", "generate_dataset",
    "generate_sample", "randomize_labels", "sample_seed", "SourceImage", "load_idx",
    "write_idx", "MaskDecomposition", "binarize", "center_crop_downsample", "decompose_mask",
    "extract_edge", "load_dataset", "save_dataset",
]
