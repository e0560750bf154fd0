"""Reproducible Q-Wiener increments in eigencoordinates.

Entry (j, n) of a path is Normal(0, k q_j), produced by a fixed counter
position of a Philox stream keyed by the seed: uniform u64 draws laid out
row-major over (mode, step) are mapped through the inverse normal CDF.
The value at (j, n) therefore never depends on which modes or how many
paths are requested.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .spectral_core import CovarianceSpec, EigenBasis


@dataclass(frozen=True)
class NoisePath:
    """J x N array of independent increments W(t_n) - W(t_{n-1})."""

    increments: np.ndarray = field(repr=False)
    seed: int
    k: float
    Q: CovarianceSpec
    basis: EigenBasis

    @property
    def J(self):
        return self.increments.shape[0]

    @property
    def N(self):
        return self.increments.shape[1]


def _philox(seed, stream):
    key = np.array([seed & (2 ** 64 - 1), stream & (2 ** 64 - 1)], dtype=np.uint64)
    return np.random.Philox(key=key)


def uniform_block(seed, rows, N, stream=0):
    """Uniform draws for the full (rows, N) row-major layout."""
    return np.random.Generator(_philox(seed, stream)).random((rows, N))


def uniform_rows(seed, N, rows, stream=0):
    """Selected rows of the same layout via counter advancement.

    Philox advances in blocks of four 64-bit draws, so jump to the
    enclosing block and discard the remainder.
    """
    out = np.empty((len(rows), N))
    for i, j in enumerate(rows):
        bitgen = _philox(seed, stream)
        pos = int(j) * N
        bitgen.advance(pos // 4)
        gen = np.random.Generator(bitgen)
        if pos % 4:
            gen.random(pos % 4)
        out[i] = gen.random(N)
    return out


def sample_path(Q: CovarianceSpec, basis: EigenBasis, N: int, k: float,
                seed: int, modes=None, stream: int = 0) -> NoisePath:
    """Sample a Q-Wiener increment array (diagonal Q only).

    `modes` restricts generation to a subset of rows; the values equal the
    corresponding rows of the full sample.  `stream` separates independent
    substreams sharing one seed (used by the Monte Carlo drivers).
    """
    if not Q.is_diagonal:
        raise ValueError("only diagonal Q is supported for path sampling")
    if N < 1 or k <= 0:
        raise ValueError("need N >= 1 and k > 0")
    q = Q.weights_on(basis)
    if modes is None:
        u = uniform_block(seed, basis.J, N, stream)
        inc = np.sqrt(k * q)[:, None] * ndtri(u)
    else:
        rows = np.asarray(modes, dtype=int)
        if np.any(rows < 0) or np.any(rows >= basis.J):
            raise ValueError("mode indices out of range")
        u = uniform_rows(seed, N, rows, stream)
        inc = np.zeros((basis.J, N))
        inc[rows] = np.sqrt(k * q[rows])[:, None] * ndtri(u)
    return NoisePath(increments=inc, seed=seed, k=k, Q=Q, basis=basis)


def coarsen(path: NoisePath, m: int) -> NoisePath:
    """Sum groups of m consecutive increments: the same Brownian path at
    step size m*k."""
    if m < 1 or path.N % m != 0:
        raise ValueError("m must divide the number of steps")
    inc = path.increments.reshape(path.J, path.N // m, m).sum(axis=2)
    return NoisePath(increments=inc, seed=path.seed, k=m * path.k,
                     Q=path.Q, basis=path.basis)
