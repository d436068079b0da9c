"""Serial-chain (Bayesian network) view of a traced CNN.

Each conv layer opens a random-variable group that absorbs the pooling layer
after it; each fully connected layer is a group of its own. The chain is
``P(F1|X) -> P(F2|F1) -> ... -> P(FY|F_last)``.
"""
from dataclasses import dataclass

import numpy as np

from boltzlens.nn.network import forward_with_trace
from boltzlens.problens import (
    PriorSpec, conv_energy, default_bin_edges, empirical_distribution, fc_boltzmann,
)

NORMALIZATION_TOL = 1e-9


@dataclass
class Factor:
    name: str
    record_ids: tuple  # traced records fused into this group
    kind: str  # "conv" (energy histogram) or "fc" (discrete Boltzmann)
    distribution: object  # EmpiricalDistribution | DiscreteBoltzmann
    parent: str | None


@dataclass
class ChainDecomposition:
    factors: list

    def __len__(self):
        return len(self.factors)

    def names(self):
        return [f.name for f in self.factors]


def _groups(trace):
    groups = []
    for i, rec in enumerate(trace.records):
        if rec.kind in ("conv", "fc"):
            groups.append([i])
        elif rec.kind == "pool":
            if not groups or trace.records[groups[-1][0]].kind != "conv":
                raise ValueError(f"pooling record {i} does not follow a convolution")
            groups[-1].append(i)
    if not groups or trace.records[groups[-1][0]].kind != "fc":
        raise ValueError("network has no output layer group to act as F_Y")
    return groups


def decompose(net, x, bin_edges=None, prior=PriorSpec()):
    """One factor per random-variable group, in layer order."""
    edges = default_bin_edges(prior) if bin_edges is None else bin_edges
    _, trace = forward_with_trace(net, x)
    groups = _groups(trace)
    factors = []
    parent = "X"
    for g, ids in enumerate(groups):
        head = ids[0]
        last = g == len(groups) - 1
        name = "FY" if last else f"F{g + 1}"
        if trace.records[head].kind == "conv":
            energy = conv_energy(trace, head)
            dist = empirical_distribution(energy.values, edges)
            kind = "conv"
        else:
            dist = fc_boltzmann(trace, head)
            kind = "fc"
        factors.append(Factor(name, tuple(ids), kind, dist, parent))
        parent = name
    return ChainDecomposition(factors)


def posterior_via_elimination(chain):
    """``P(FY|X)`` after summing out the intermediate groups.

    Every intermediate conditional integrates to one, so elimination leaves the
    output factor untouched: its Boltzmann probabilities are the posterior.
    """
    last = chain.factors[-1]
    if last.kind != "fc":
        raise ValueError("chain does not end in a discrete output factor")
    return last.distribution.probs


def factor_total(factor):
    d = factor.distribution
    if factor.kind == "fc":
        return float(d.probs.sum())
    return float(d.probs.sum() + d.out_of_range_mass)


def factor_normalization_check(chain, tol=NORMALIZATION_TOL):
    """``{factor name: passed}``; every factor must sum to one within ``tol``."""
    return {f.name: abs(factor_total(f) - 1.0) <= tol for f in chain.factors}


def is_path(chain):
    """Each factor's parent is exactly its predecessor (``X`` for the first)."""
    prev = "X"
    for f in chain.factors:
        if f.parent != prev:
            return False
        prev = f.name
    return True


def chain_posterior(net, x, bin_edges=None):
    return np.asarray(posterior_via_elimination(decompose(net, x, bin_edges)))
