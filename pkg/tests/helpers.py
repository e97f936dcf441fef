"""Small shared builders for the test-suite."""

import numpy as np


class ZeroRng:
    """Stand-in generator whose draws are all zero (noiseless surrogate)."""

    def standard_normal(self, size=None):
        return np.zeros(size)


def complete_graph_edges(n):
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


def star_edges(n):
    return tuple((0, i) for i in range(1, n))
