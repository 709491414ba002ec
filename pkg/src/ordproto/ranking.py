"""Hard descending ranks and an interpolated backward pass.

``rank`` assigns 1 to the largest entry; equal values are ordered by
position, earlier index first. The same operator solves
argmin_pi a.pi over permutation vectors pi (largest value takes the
smallest rank number), which is what ``rank_argmin_oracle`` checks by
brute force. Because ranks are piecewise constant in the input, the
backward pass re-ranks at an input nudged along the upstream gradient
and divides the rank movement by the step size; the result is a descent
direction for any loss expressed on the rank vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import BadConfigError, DimMismatchError, PermutationTooLargeError
from .linalg import as_vector

# Factorial enumeration stays tractable up to 8! = 40320 candidates.
ORACLE_MAX_N = 8


@dataclass(frozen=True)
class BlackboxConfig:
    """Interpolation step size for the rank backward pass."""

    lambda_interp: float = 1.0

    def __post_init__(self):
        if not self.lambda_interp > 0.0:
            raise BadConfigError("lambda_interp must be positive")


def rank(a) -> np.ndarray:
    """Descending competition rank with earlier-index tie breaking.

    rank(a)[i] = 1 + #{j : a[j] > a[i]} + #{j < i : a[j] = a[i]}.
    """
    arr = as_vector(a, "a")
    n = arr.size
    # Sort by value descending, then by index ascending; the position in
    # that order is exactly the counting definition above.
    order = np.lexsort((np.arange(n), -arr))
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(1, n + 1)
    return ranks


def rank_argmin_oracle(a) -> np.ndarray:
    """Brute-force rank: the permutation minimizing a.pi.

    Ties between objective values resolve to the lexicographically
    smallest permutation, which coincides with earlier-index tie
    breaking in ``rank``. Only intended as a test oracle (n <= 8).
    """
    arr = as_vector(a, "a")
    n = arr.size
    if n > ORACLE_MAX_N:
        raise PermutationTooLargeError(f"oracle limited to n <= {ORACLE_MAX_N}, got {n}")
    best_pi = None
    best_obj = np.inf
    # permutations() yields lexicographic order, so strict < keeps the
    # lexicographically smallest minimizer.
    for pi in permutations(range(1, n + 1)):
        obj = 0.0
        for x, p in zip(arr, pi):
            obj += x * p
        if obj < best_obj:
            best_obj = obj
            best_pi = pi
    return np.asarray(best_pi, dtype=np.int64)


def blackbox_rank_backward(a, upstream, cfg: BlackboxConfig) -> np.ndarray:
    """Interpolated gradient of a rank-space loss with respect to ``a``.

    Shifts the input along the upstream gradient, re-ranks, and returns
    (rank(a + lam*upstream) - rank(a)) / lam. Zero upstream, or a step
    too small to cross any ranking boundary, yields a zero gradient.
    """
    arr = as_vector(a, "a")
    up = as_vector(upstream, "upstream")
    if arr.shape != up.shape:
        raise DimMismatchError(f"a and upstream dims differ: {arr.size} vs {up.size}")
    lam = cfg.lambda_interp
    shifted = arr + lam * up
    return (rank(shifted) - rank(arr)) / lam
