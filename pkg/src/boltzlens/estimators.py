"""scikit-learn compatible wrappers around the engine.

``BoltzmannCNNClassifier`` trains one of the preset CNNs with plain SGD and
exposes the per-image KL of its first layer's energy histogram to the input
prior. ``SyntheticDigitTransformer`` turns source digit images into Gaussian
synthetic digits.
"""
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted

from boltzlens._validation import check_grayscale_stack, check_images
from boltzlens.nn.network import get_preset, init_params
from boltzlens.nn.training import precision_dtype, predict_proba, sgd_epoch
from boltzlens.problens import PriorSpec, default_bin_edges, discretize_prior, _kl_rows
from boltzlens.problens import empirical_probs_rows, first_conv_energy
from boltzlens.synthgen.generator import (
    _MASK64, _generator, gaussian_draw, place_values, sample_seed, source_masks,
)


class BoltzmannCNNClassifier(ClassifierMixin, BaseEstimator):
    """Preset CNN (``cnn1``/``cnn2``/``cnn3``) trained by minibatch SGD."""

    def __init__(self, preset="cnn2", epochs=30, batch_size=32, lr=0.01, random_state=0,
                 precision=None):
        self.preset = preset
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.random_state = random_state
        self.precision = precision

    def fit(self, X, y):
        X = check_images(X)
        check_classification_targets(y)
        y = np.asarray(y)
        if y.shape != (X.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        spec = get_preset(self.preset)
        self.classes_, yi = np.unique(y, return_inverse=True)
        if len(self.classes_) > spec.n_classes:
            raise ValueError(f"{len(self.classes_)} classes exceed the network's {spec.n_classes} outputs")
        dtype = precision_dtype(self.precision)
        seed = 0 if self.random_state is None else int(self.random_state)
        self.network_ = init_params(spec, seed, dtype)
        rng = np.random.default_rng([seed, 1])
        X = X.astype(dtype)
        self.loss_curve_ = [sgd_epoch(self.network_, X, yi, self.lr, self.batch_size, rng)
                            for _ in range(self.epochs)]
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        X = check_images(X).astype(self.network_.dtype)
        return predict_proba(self.network_, X)[:, :len(self.classes_)]

    def predict(self, X):
        check_is_fitted(self, "network_")
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def kl_to_prior(self, X, prior=PriorSpec(), bin_edges=None):
        """Per-image ``KL[prior || histogram of the first-layer energy]``."""
        check_is_fitted(self, "network_")
        X = check_images(X).astype(self.network_.dtype)
        edges = default_bin_edges(prior) if bin_edges is None else np.asarray(bin_edges, float)
        e = first_conv_energy(self.network_, X)
        q = empirical_probs_rows(e.reshape(len(e), -1), edges)
        p = np.broadcast_to(discretize_prior(prior, edges).probs, q.shape)
        return _kl_rows(p, q)


class SyntheticDigitTransformer(TransformerMixin, BaseEstimator):
    """Source digit images ``(N, H, W)`` -> Gaussian synthetic digits ``(N, 32, 32)``.

    Row ``i`` uses seed ``splitmix64(seed + i)``, the same derivation as
    dataset generation.
    """

    def __init__(self, seed=0, threshold=127, shuffle_within=False, flip_polarity=False):
        self.seed = seed
        self.threshold = threshold
        self.shuffle_within = shuffle_within
        self.flip_polarity = flip_polarity

    def fit(self, X, y=None):
        X = check_grayscale_stack(X)
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_grayscale_stack(X)
        out = np.empty((X.shape[0], 32, 32))
        for i, img in enumerate(X):
            s = sample_seed(self.seed, i)
            decomp = source_masks(img, self.threshold)
            rng = _generator(~s & _MASK64) if self.shuffle_within else None
            out[i] = place_values(decomp, gaussian_draw(s), rng, self.flip_polarity)
        return out
