"""Boltzmann views of traced layers: energy maps, histograms, KL to the input prior.

Convolutional layers are summarised by the energy ``-sum_n phi_n`` of their
linear (pre-ReLU, pre-pool) channels and an empirical histogram of it; fully
connected layers by the discrete Boltzmann distribution ``softmax(f)``.
"""
import csv
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from boltzlens.nn import layers as L
from boltzlens.nn.network import Conv, forward_with_trace

KL_EPS = 1e-9


@dataclass(frozen=True)
class PriorSpec:
    mean: float = 0.0
    variance: float = 1024.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"prior variance must be positive, got {self.variance}")

    @property
    def sigma(self):
        return float(np.sqrt(self.variance))


def default_bin_edges(prior=PriorSpec(), n_bins=100, span=4.0):
    """``n_bins`` equal bins over ``mean +- span*sigma``."""
    return np.linspace(prior.mean - span * prior.sigma, prior.mean + span * prior.sigma, n_bins + 1)


@dataclass
class EnergyMap:
    values: np.ndarray  # (H, W), or (N, H, W) for a batched trace
    layer_id: int
    tag: str = "ConvMrf"


@dataclass
class EmpiricalDistribution:
    bin_edges: np.ndarray
    probs: np.ndarray
    out_of_range_count: int = 0
    out_of_range_mass: float = 0.0

    def total(self):
        return float(self.probs.sum() + self.out_of_range_mass)


@dataclass
class DiscreteBoltzmann:
    energies: np.ndarray
    probs: np.ndarray
    log_partition: float

    @property
    def partition(self):
        return float(np.exp(self.log_partition))


def _check_edges(edges):
    edges = np.asarray(edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least two bin edges")
    if not np.all(np.diff(edges) > 0):
        raise ValueError("bin edges must be strictly increasing")
    return edges


def _record(trace, layer_id, kind):
    rec = trace.records[layer_id]
    if rec.kind != kind:
        raise ValueError(f"traced layer {layer_id} is {rec.kind!r}, not {kind!r}")
    return rec


def conv_energy(trace, layer_id):
    """Per-pixel ``-sum`` over channels of a conv layer's linear outputs."""
    rec = _record(trace, layer_id, "conv")
    return EnergyMap(-rec.pre_activation.sum(axis=-1), layer_id)


def boltzmann(activations):
    """Discrete Boltzmann distribution with energies ``-activations``."""
    a = np.asarray(activations, dtype=np.float64)
    return DiscreteBoltzmann(-a, L.softmax(a), float(logsumexp(a)))


def fc_boltzmann(trace, layer_id):
    rec = _record(trace, layer_id, "fc")
    if trace.batched:
        raise ValueError("fc_boltzmann expects a single-sample trace")
    return boltzmann(rec.activation)


def empirical_distribution(values, bin_edges):
    """Normalized histogram; bins are ``[B_i, B_i+1)`` except the last, which is closed."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("cannot build a distribution from no values")
    edges = _check_edges(bin_edges)
    counts, _ = np.histogram(values, bins=edges)
    out = int(values.size - counts.sum())
    return EmpiricalDistribution(edges, counts / values.size, out, out / values.size)


def empirical_probs_rows(values, bin_edges):
    """Row-wise histograms of an ``(N, M)`` array, same binning as above."""
    values = np.asarray(values, dtype=np.float64)
    edges = _check_edges(bin_edges)
    n, m = values.shape
    nb = edges.size - 1
    idx = np.searchsorted(edges, values, side="right") - 1
    idx[values == edges[-1]] = nb - 1
    valid = (idx >= 0) & (idx < nb)
    flat = (np.arange(n)[:, None] * nb + idx)[valid]
    return np.bincount(flat, minlength=n * nb).reshape(n, nb) / m


def discretize_prior(prior, bin_edges):
    edges = _check_edges(bin_edges)
    cdf = norm.cdf(edges, loc=prior.mean, scale=prior.sigma)
    probs = np.diff(cdf)
    return EmpiricalDistribution(edges, probs, 0, float(cdf[0] + (1.0 - cdf[-1])))


def _kl_rows(p, q, eps=KL_EPS):
    p = p / p.sum(axis=-1, keepdims=True)
    q = np.maximum(q, eps)
    q = q / q.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p / q), 0.0)
    return np.maximum(terms.sum(axis=-1), 0.0)


def kl_divergence(p, q, eps=KL_EPS):
    """``KL[p || q]`` over shared bins.

    Both histograms are renormalized over the binned range; ``q`` is floored
    at ``eps`` (so empty bins get ``eps``) before renormalizing.
    """
    if p.bin_edges.shape != q.bin_edges.shape or not np.array_equal(p.bin_edges, q.bin_edges):
        raise ValueError("distributions have different bin edges")
    if p.probs.sum() == 0 or q.probs.sum() == 0:
        raise ValueError("distribution has no mass inside the bins")
    return float(_kl_rows(p.probs, q.probs, eps))


def first_conv_energy(net, X):
    """Energy maps ``(N, H, W)`` of the first conv layer without a full forward pass."""
    layers = net.spec.layers
    if not layers or not isinstance(layers[0], Conv):
        raise ValueError("network does not start with a convolution")
    X = np.asarray(X, dtype=net.dtype)
    return -L.conv2d_im2col(X, net.params[0]).sum(axis=-1)


def mean_f1_kl(net, X, prior=PriorSpec(), bin_edges=None, batch_size=256):
    """Average of ``KL[prior || histogram(F1 energy)]`` over the images in ``X``."""
    edges = default_bin_edges(prior) if bin_edges is None else _check_edges(bin_edges)
    p = discretize_prior(prior, edges).probs
    kls = []
    for s in range(0, X.shape[0], batch_size):
        e = first_conv_energy(net, X[s:s + batch_size])
        q = empirical_probs_rows(e.reshape(e.shape[0], -1), edges)
        kls.append(_kl_rows(np.broadcast_to(p, q.shape), q))
    return float(np.mean(np.concatenate(kls))) if kls else 0.0


@dataclass
class Panel:
    name: str
    layer_id: int | None
    empirical: EmpiricalDistribution | None = None
    boltzmann: DiscreteBoltzmann | None = None
    energy: EnergyMap | None = None
    kl: float | None = None


@dataclass
class LayerReport:
    panels: list = field(default_factory=list)
    probs: np.ndarray | None = None

    def panel(self, name):
        for p in self.panels:
            if p.name == name:
                return p
        raise KeyError(name)

    def kls(self):
        return {p.name: p.kl for p in self.panels if p.kl is not None}


def layer_kl_report(net, x, prior=PriorSpec(), bin_edges=None):
    """Distribution summary of one input and every traced layer group.

    Panels: ``input`` (histogram of x, KL to prior); one per conv layer
    ``F1, F2, ...`` (energy histogram; only F1 gets a KL); then one per FC
    layer (discrete Boltzmann), the last being ``FY``.
    """
    edges = default_bin_edges(prior) if bin_edges is None else _check_edges(bin_edges)
    prior_dist = discretize_prior(prior, edges)
    probs, trace = forward_with_trace(net, x)
    emp_x = empirical_distribution(x, edges)
    report = LayerReport([Panel("input", None, emp_x, kl=kl_divergence(prior_dist, emp_x))], probs)
    n_groups = 0
    fc_ids = [i for i, r in enumerate(trace.records) if r.kind == "fc"]
    for i, rec in enumerate(trace.records):
        if rec.kind == "conv":
            n_groups += 1
            energy = conv_energy(trace, i)
            emp = empirical_distribution(energy.values, edges)
            kl = kl_divergence(prior_dist, emp) if n_groups == 1 else None
            report.panels.append(Panel(f"F{n_groups}", i, emp, energy=energy, kl=kl))
        elif rec.kind == "fc":
            name = "FY" if i == fc_ids[-1] else f"F{n_groups + 1}"
            if name != "FY":
                n_groups += 1
            report.panels.append(Panel(name, i, boltzmann=fc_boltzmann(trace, i)))
    return report


def write_report_csv(report, out_dir, prefix="report"):
    """``<prefix>.csv`` (layer, binLeft, binRight, prob) and ``<prefix>_summary.csv``.

    Discrete Boltzmann panels use unit bins ``[k, k+1)`` for node ``k``.
    """
    os.makedirs(out_dir, exist_ok=True)
    dist_path = os.path.join(out_dir, f"{prefix}.csv")
    summary_path = os.path.join(out_dir, f"{prefix}_summary.csv")
    with open(dist_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "binLeft", "binRight", "prob"])
        for p in report.panels:
            if p.empirical is not None:
                e = p.empirical.bin_edges
                for k, pr in enumerate(p.empirical.probs):
                    w.writerow([p.name, repr(float(e[k])), repr(float(e[k + 1])), repr(float(pr))])
            else:
                for k, pr in enumerate(p.boltzmann.probs):
                    w.writerow([p.name, k, k + 1, repr(float(pr))])
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "kl", "partitionZ"])
        for p in report.panels:
            kl = "" if p.kl is None else repr(p.kl)
            z = "" if p.boltzmann is None else repr(p.boltzmann.partition)
            w.writerow([p.name, kl, z])
    return dist_path, summary_path
