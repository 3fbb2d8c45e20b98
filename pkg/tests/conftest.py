import numpy as np
import pytest

from reactime.kernel import validate_kernel


def random_partitioned_kernel(rng, n_min=3, n_max=50, dense=True):
    """Random irreducible row-stochastic kernel with a random A/B split.

    Dense kernels have entries bounded below (well conditioned); sparse
    ones keep a cycle plus self-loops so irreducibility and one-step
    survival hold.
    """
    n = int(rng.integers(n_min, n_max + 1))
    if dense:
        matrix = rng.uniform(0.05, 1.0, (n, n))
    else:
        matrix = rng.uniform(0.0, 1.0, (n, n)) * (rng.random((n, n)) < 0.4)
        matrix += 0.1 * np.eye(n)
        for i in range(n):
            matrix[i, (i + 1) % n] += 0.3
    matrix /= matrix.sum(axis=1, keepdims=True)

    n_a = int(rng.integers(1, n))
    order = rng.permutation(n)
    partition = {"A": [int(i) for i in order[:n_a]],
                 "B": [int(i) for i in order[n_a:]]}
    return validate_kernel(matrix, partition)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
