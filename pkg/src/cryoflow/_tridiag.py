import numpy as np
from scipy.linalg import solve_banded


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``lower[i]`` couples row i to i-1, ``upper[i]`` row i to i+1."""
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)
