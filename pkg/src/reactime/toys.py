"""Small closed-form chains used as golden fixtures and CLI scenarios.

Each constructor returns a :class:`~reactime.kernel.PartitionedKernel`.
The scenario ids (``a1``, ``a2``, ``graph``) match the kernel JSON files
shipped under ``reactime/data`` and the ``reproduce`` CLI subcommand.
"""

import numpy as np

from .kernel import validate_kernel


def toy_kernel_a1(p=0.1, q=0.5, r=0.2):
    """Three-state chain with A = {1, 2}, B = {3}.

    State 1 escapes to B at rate ``p``, state 2 feeds state 1 at rate
    ``q``, and B returns to state 2 at rate ``r``.  The killed block is
    lower triangular, so both eigenmeasures are explicit: for ``p <= q``
    the only quasi-stationary distribution is the point mass on state 1;
    for ``q < p`` a second one, ``[q/p, 1 - q/p]``, appears.
    """
    for name, value in (("p", p), ("q", q), ("r", r)):
        if not 0.0 < value < 1.0:
            raise ValueError(f"{name} must lie in (0, 1)")
    matrix = np.array([
        [1.0 - p, 0.0, p],
        [q, 1.0 - q, 0.0],
        [0.0, r, 1.0 - r],
    ])
    return validate_kernel(matrix, {"A": [1, 2], "B": [3]}, labels=[1, 2, 3])


def toy_kernel_a2(a=0.2, b=0.02):
    """Three-state chain with A = {1, 2}, B = {3} and two escape rates.

    Requires ``0 < b < a < 1/4``.  The killed block has the unique
    quasi-stationary distribution ``[p - b, a - p] / (a - b)`` with
    killing parameter ``p = (4a + 3b - sqrt(16 a^2 + 9 b^2)) / 2``, and
    the stationary law is ``[5b, 7a, 6b] / (7a + 11b)``.
    """
    if not 0.0 < b < a < 0.25:
        raise ValueError("parameters must satisfy 0 < b < a < 1/4")
    matrix = np.array([
        [1.0 - 4.0 * a, 3.0 * a, a],
        [2.0 * b, 1.0 - 3.0 * b, b],
        [a, a, 1.0 - 2.0 * a],
    ])
    return validate_kernel(matrix, {"A": [1, 2], "B": [3]}, labels=[1, 2, 3])


def toy_kernel_a2_qsd_closed_form(a, b):
    """Closed-form QSD weights and killing parameter of ``toy_kernel_a2``."""
    p = (4.0 * a + 3.0 * b - np.sqrt(16.0 * a ** 2 + 9.0 * b ** 2)) / 2.0
    weights = np.array([p - b, a - p]) / (a - b)
    return weights, p


def toy_kernel_graph(a=1.0, b=2.0, c=3.0, d=4.0):
    """Random walk on a 5-vertex weighted graph, A = {1, 2, 3}, B = {4, 5}.

    The walk is reversible for its stationary law, yet the entrance
    process into A is not reversible for the entrance distribution as
    soon as ``a != b``; the entrance distribution itself is
    ``[2d, c, c] / (2(c + d))``.
    """
    if min(a, b, c, d) <= 0.0:
        raise ValueError("edge weights must be positive")
    weights = np.zeros((5, 5))
    edges = [(0, 1, a), (0, 2, b), (0, 3, d), (0, 4, d), (1, 4, c), (2, 3, c)]
    for i, j, w in edges:
        weights[i, j] = w
        weights[j, i] = w
    matrix = weights / weights.sum(axis=1, keepdims=True)
    return validate_kernel(matrix, {"A": [1, 2, 3], "B": [4, 5]},
                           labels=[1, 2, 3, 4, 5])


def graph_entrance_closed_form(a, b, c, d):
    """Closed-form off-diagonal entrance-kernel entries of the graph walk.

    Returns ``(K_E[3, 2], K_E[2, 3])`` in graph-label terms; the two
    coincide exactly when ``a == b``.
    """
    denom = (a + b + 2.0 * d) * (a + c) * (b + c) * (c + d)
    k_32 = (a * b * c * d + a * b * c ** 2 + b * c ** 2 * d) / denom
    k_23 = (a * b * c * d + a * b * c ** 2 + a * c ** 2 * d) / denom
    return k_32, k_23
