"""Stable geometric sums of matrix/array ratios via binary doubling.

The covariance accumulations of single-step schemes reduce to sums
sum_{l=1}^{n} w^l with |w| <= 1 and w arbitrarily close to 1.  The closed
form w(1-w^n)/(1-w) cancels catastrophically near w=1; doubling the block
size instead is exact up to round-off for any unimodular w.
"""

import numpy as np


def geom_sum(w, n):
    """sum_{l=1}^{n} w**l, elementwise over an array of ratios.

    n = 0 returns zeros.  Cost is O(log n) array operations.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    w = np.asarray(w)
    S = np.zeros_like(w)
    if n == 0:
        return S
    P = np.ones_like(w)      # w^(length consumed so far)
    block_S = w.copy()       # sum over a block of current size
    block_P = w.copy()       # w^(block size)
    nn = n
    while nn > 0:
        if nn & 1:
            S = S + P * block_S
            P = P * block_P
        block_S = block_S + block_P * block_S
        block_P = block_P * block_P
        nn >>= 1
    return S


def geom_sum0(w, n):
    """sum_{l=0}^{n-1} w**l  (n terms, starting at w^0)."""
    if n < 1:
        return np.zeros_like(np.asarray(w))
    return np.ones_like(np.asarray(w)) + geom_sum(w, n - 1)
