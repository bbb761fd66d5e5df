import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def brute_set_distance(A, B):
    total = 0.0
    for a in A:
        for b in B:
            total += sum((x - y) ** 2 for x, y in zip(a, b)) ** 0.5
    return total / (len(A) * len(B))
