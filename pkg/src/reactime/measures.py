"""Nonnegative weight vectors over subsets of a finite state space.

The total variation norm used throughout the package is the operator
convention ``||mu|| = sup_{|f|<=1} mu(f)``, i.e. the plain L1 norm of the
weight vector.  For a difference of probability measures this is twice
the halved convention common in probability textbooks.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NullMass, ZeroMeasure

NORMALIZATION_TOL = 1e-12


def tv_norm(weights):
    """L1 norm of a (possibly signed) weight vector."""
    return float(np.sum(np.abs(np.asarray(weights, dtype=float))))


@dataclass(frozen=True)
class DiscreteMeasure:
    """Nonnegative weights over a subset of state indices.

    Parameters
    ----------
    support : tuple of int
        State indices carrying the weights, in increasing order.
    weights : ndarray
        Nonnegative weights, one per support index.
    normalized : bool
        If True, the weights are asserted to sum to one within 1e-12.
    """

    support: tuple
    weights: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        weights = np.array(self.weights, dtype=float)
        if weights.ndim != 1 or len(support) != weights.size:
            raise ValueError("support and weights must have equal length")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if self.normalized and abs(weights.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError("normalized measure must sum to 1 within 1e-12")
        weights.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @property
    def total(self):
        return float(self.weights.sum())

    def normalize(self):
        """Return the measure rescaled to total mass one."""
        total = self.total
        if total <= 0.0:
            raise ZeroMeasure("cannot normalize a zero measure")
        return DiscreteMeasure(self.support, self.weights / total, normalized=True)

    def dense(self, n_states):
        """Dense length-``n_states`` weight vector."""
        out = np.zeros(n_states)
        out[list(self.support)] = self.weights
        return out

    def mass_on(self, indices):
        """Total weight carried by ``indices``."""
        index_set = set(int(i) for i in indices)
        return float(sum(w for i, w in zip(self.support, self.weights) if i in index_set))

    def tv_distance(self, other):
        """Total variation distance (L1 of the weight difference)."""
        n = 1 + max(max(self.support), max(other.support))
        return tv_norm(self.dense(n) - other.dense(n))

    def as_dict(self, labels=None):
        """Mapping from state label to weight, for JSON output."""
        if labels is None:
            return {str(i): float(w) for i, w in zip(self.support, self.weights)}
        return {str(labels[i]): float(w) for i, w in zip(self.support, self.weights)}


def measure_from_dense(weights, normalized=False, support=None):
    """Build a measure from a dense weight vector.

    Zero entries are kept when ``support`` is given explicitly, so that
    measures over a fixed block keep a stable support.
    """
    weights = np.asarray(weights, dtype=float)
    if support is None:
        support = tuple(int(i) for i in np.flatnonzero(weights))
        weights = weights[list(support)]
        if not support:
            raise ZeroMeasure("dense vector has no positive entry")
    else:
        support = tuple(int(i) for i in support)
    return DiscreteMeasure(support, weights, normalized=normalized)


def condition_measure(measure, subset, restrict_only=False):
    """Restrict a measure to ``subset``, optionally renormalizing.

    With ``restrict_only=True`` the weights are only restricted; the
    default divides by the mass of the subset, producing the conditioned
    probability measure.

    Raises
    ------
    NullMass
        If the measure gives zero mass to ``subset``.
    """
    subset = sorted(set(int(i) for i in subset))
    index = {i: k for k, i in enumerate(subset)}
    weights = np.zeros(len(subset))
    for i, w in zip(measure.support, measure.weights):
        if i in index:
            weights[index[i]] += w
    mass = weights.sum()
    if restrict_only:
        return DiscreteMeasure(tuple(subset), weights)
    if mass <= 0.0:
        raise NullMass("measure gives zero mass to the conditioning set")
    return DiscreteMeasure(tuple(subset), weights / mass, normalized=True)
