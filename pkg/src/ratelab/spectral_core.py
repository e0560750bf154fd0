"""Eigenbasis of the 1-d Laplacian, fractional-power norms, and
Schatten-class calculus on truncated operators.

Everything lives on the first J modes of -d^2/dx^2 on the unit interval.
Both boundary conditions share the eigenvalues lambda_j = (j pi)^2; the
Neumann variant works on the mean-zero subspace, so its first mode is the
first nonconstant cosine.
"""

from dataclasses import dataclass, field

import numpy as np

BOUNDARY_CONDITIONS = ("dirichlet", "neumann_meanzero")


@dataclass(frozen=True)
class EigenBasis:
    """Truncated eigenpairs (lambda_j, phi_j) of the Laplacian.

    lambdas is strictly positive and nondecreasing; on the unit interval
    lambda_j = (j pi)^2 for j = 1..J under both boundary conditions.
    """

    bc: str
    J: int
    lambdas: np.ndarray = field(repr=False)

    @property
    def nus(self):
        """Frequencies nu_j = sqrt(lambda_j)."""
        return np.sqrt(self.lambdas)


def build_basis(bc: str, J: int) -> EigenBasis:
    """Eigenbasis of the Laplacian on (0,1) truncated to J modes."""
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown boundary condition {bc!r}")
    if not isinstance(J, (int, np.integer)) or J < 1:
        raise ValueError("J must be a positive integer")
    j = np.arange(1, J + 1, dtype=float)
    return EigenBasis(bc=bc, J=int(J), lambdas=(j * np.pi) ** 2)


@dataclass(frozen=True)
class CovarianceSpec:
    """Noise covariance Q in eigencoordinates.

    kind "diagonal" carries per-mode weights q_j >= 0, either fixed or as
    the named family q_j = lambda_j^(-gamma) (which extends to any
    truncation); kind "dense" carries a symmetric PSD J x J matrix.
    """

    kind: str
    diag_weights: np.ndarray | None = None
    dense_matrix: np.ndarray | None = None
    gamma: float | None = None

    SYMMETRY_TOL = 1e-12
    PSD_TOL = 1e-10

    def __post_init__(self):
        if self.kind == "diagonal":
            if self.gamma is None and self.diag_weights is None:
                raise ValueError("diagonal spec needs weights or gamma")
            if self.diag_weights is not None and np.any(np.asarray(self.diag_weights) < 0):
                raise ValueError("diagonal weights must be nonnegative")
        elif self.kind == "dense":
            Q = self.dense_matrix
            if Q is None:
                raise ValueError("dense spec needs a matrix")
            if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
                raise ValueError("dense covariance must be square")
            if np.max(np.abs(Q - Q.T)) > self.SYMMETRY_TOL * max(1.0, np.max(np.abs(Q))):
                raise ValueError("dense covariance must be symmetric")
            if np.linalg.eigvalsh(Q).min() < -self.PSD_TOL:
                raise ValueError("dense covariance must be positive semidefinite")
        else:
            raise ValueError(f"unknown covariance kind {self.kind!r}")

    @classmethod
    def identity(cls):
        return cls(kind="diagonal", gamma=0.0)

    @classmethod
    def power(cls, gamma: float):
        """Named family q_j = lambda_j^(-gamma)."""
        return cls(kind="diagonal", gamma=float(gamma))

    @classmethod
    def diagonal(cls, weights):
        return cls(kind="diagonal", diag_weights=np.asarray(weights, dtype=float))

    @classmethod
    def dense(cls, matrix):
        return cls(kind="dense", dense_matrix=np.asarray(matrix, dtype=float))

    @property
    def is_diagonal(self):
        return self.kind == "diagonal"

    def weights_on(self, basis: EigenBasis) -> np.ndarray:
        """Diagonal weights q_j on the given truncation."""
        if not self.is_diagonal:
            raise ValueError("dense covariance has no diagonal weights")
        if self.diag_weights is not None:
            if len(self.diag_weights) != basis.J:
                raise ValueError("weight list does not match the truncation")
            return np.asarray(self.diag_weights, dtype=float)
        return basis.lambdas ** (-self.gamma)

    def matrix_on(self, basis: EigenBasis) -> np.ndarray:
        if self.kind == "dense":
            if self.dense_matrix.shape[0] != basis.J:
                raise ValueError("dense covariance does not match the truncation")
            return self.dense_matrix
        return np.diag(self.weights_on(basis))


def hdot_norm(basis: EigenBasis, coeffs, alpha: float) -> float:
    """Fractional-power norm of a spectral vector.

    A flat array of J coefficients is measured in Hdot^alpha.  A (2, J)
    array is a wave state (displacement, velocity) and is measured in the
    product norm (|x1|_alpha^2 + |x2|_{alpha-1}^2)^(1/2).
    """
    c = np.asarray(coeffs, dtype=float)
    lam = basis.lambdas
    if c.ndim == 1:
        if len(c) != basis.J:
            raise ValueError("coefficient length does not match the basis")
        return float(np.sqrt(np.sum(lam ** alpha * c ** 2)))
    if c.ndim == 2 and c.shape == (2, basis.J):
        return float(np.sqrt(np.sum(lam ** alpha * c[0] ** 2)
                             + np.sum(lam ** (alpha - 1) * c[1] ** 2)))
    raise ValueError("coeffs must have shape (J,) or (2, J)")


def _as_matrix(operator):
    op = np.asarray(operator, dtype=float)
    if op.ndim == 1:
        return np.diag(op)
    if op.ndim == 2 and op.shape[0] == op.shape[1]:
        return op
    raise ValueError("operator must be a square matrix or a diagonal")


def trace(operator) -> float:
    """Sum of diagonal entries."""
    op = np.asarray(operator, dtype=float)
    if op.ndim == 1:
        return float(np.sum(op))
    return float(np.trace(_as_matrix(op)))


def schatten(p: int, operator) -> float:
    """Schatten norm: p=1 trace norm (sum of singular values), p=2 Frobenius."""
    if p not in (1, 2):
        raise ValueError("only p in {1, 2} is supported")
    op = np.asarray(operator, dtype=float)
    if op.ndim == 1:
        sv = np.abs(op)
    else:
        sv = np.linalg.svd(_as_matrix(op), compute_uv=False)
    if p == 1:
        return float(np.sum(sv))
    return float(np.sqrt(np.sum(sv ** 2)))


def _psd_sqrt(Q):
    w, U = np.linalg.eigh(Q)
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.T


@dataclass(frozen=True)
class AqReport:
    """Evaluated norm chain for one (Q, s, alpha) configuration."""

    lhs: float        # |A^{s/2} Q^{1/2}|_HS^2
    mid: float        # |A^s Q|_Tr
    rhs_bound: float  # |A^{s+alpha} Q|_B * |A^{-alpha}|_Tr
    rhs_shifted: float  # |A^{s+1/2} Q A^{-1/2}|_Tr
    all_inequalities_hold: bool
    equality_flags: tuple


def check_aq(Q: CovarianceSpec, basis: EigenBasis, s: float, alpha: float,
             rel_tol: float = 1e-12) -> AqReport:
    """Evaluate the trace/Hilbert-Schmidt norm chain on the truncation.

    Checks lhs <= mid <= rhs_bound and lhs <= rhs_shifted; for diagonal Q
    the first and last quantities coincide exactly.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    lam = basis.lambdas
    if Q.is_diagonal:
        q = Q.weights_on(basis)
        lhs = float(np.sum(lam ** s * q))
        mid = float(np.sum(np.abs(lam ** s * q)))
        op_norm = float(np.max(lam ** (s + alpha) * q))
        rhs_shifted = float(np.sum(lam ** (s + 1 / 2) * q * lam ** (-1 / 2)))
    else:
        Qm = Q.matrix_on(basis)
        Qh = _psd_sqrt(Qm)
        As2 = np.diag(lam ** (s / 2))
        lhs = float(np.sum((As2 @ Qh) ** 2))
        mid = schatten(1, np.diag(lam ** s) @ Qm)
        op_norm = float(np.linalg.norm(np.diag(lam ** (s + alpha)) @ Qm, ord=2))
        rhs_shifted = schatten(1, np.diag(lam ** (s + 1 / 2)) @ Qm @ np.diag(lam ** (-1 / 2)))
    rhs_bound = op_norm * float(np.sum(lam ** (-alpha)))
    slack = rel_tol * max(1.0, abs(rhs_bound))
    ok = (lhs <= mid + slack) and (mid <= rhs_bound + slack) and (lhs <= rhs_shifted + slack)
    eq = (
        abs(lhs - mid) <= rel_tol * max(1.0, abs(mid)),
        abs(lhs - rhs_shifted) <= rel_tol * max(1.0, abs(rhs_shifted)),
    )
    return AqReport(lhs=lhs, mid=mid, rhs_bound=rhs_bound, rhs_shifted=rhs_shifted,
                    all_inequalities_hold=bool(ok), equality_flags=eq)


DYADIC_SWEEP = tuple(2 ** e for e in range(6, 13))
DIVERGENCE_SLOPE = -0.05


@dataclass(frozen=True)
class TraceCondition:
    """Truncated trace norm |A^{beta-1/2} Q A^{-1/2}|_Tr with a tail diagnostic.

    tail_slope is the log-log slope of dyadic partial-sum increments; a
    slope above DIVERGENCE_SLOPE flags a divergent series.
    """

    value: float
    tail_slope: float
    divergent: bool
    partial_sums: tuple


def _dyadic_tail_slope(partial):
    """Fitted slope of log(S_{2J} - S_J) against log J."""
    inc = np.diff(np.asarray(partial))
    keep = inc > 0
    if keep.sum() < 2:
        return -np.inf  # increments vanished; series converged exactly
    x = np.log(np.asarray(DYADIC_SWEEP[:-1], dtype=float)[keep])
    y = np.log(inc[keep])
    A = np.vstack([x, np.ones_like(x)]).T
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(sol[0])


def trace_condition(Q: CovarianceSpec, basis: EigenBasis, beta: float) -> TraceCondition:
    """K2 on the truncation plus a divergence diagnostic for the full series."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    lam = basis.lambdas
    if Q.is_diagonal:
        q = Q.weights_on(basis)
        value = float(np.sum(lam ** (beta - 1) * q))
        # the named family extends beyond the truncation; fixed weights do not
        if Q.gamma is not None:
            jmax = max(DYADIC_SWEEP)
            jj = np.arange(1, jmax + 1, dtype=float)
            terms = ((jj * np.pi) ** 2) ** (beta - 1 - Q.gamma)
        else:
            terms = lam ** (beta - 1) * q
        csum = np.cumsum(terms)
        partial = tuple(float(csum[min(J, len(terms)) - 1]) for J in DYADIC_SWEEP)
    else:
        Qm = Q.matrix_on(basis)
        value = schatten(1, np.diag(lam ** (beta - 1 / 2)) @ Qm @ np.diag(lam ** (-1 / 2)))
        partials = []
        for J in DYADIC_SWEEP:
            n = min(J, basis.J)
            lam_n = lam[:n]
            partials.append(schatten(
                1, np.diag(lam_n ** (beta - 1 / 2)) @ Qm[:n, :n] @ np.diag(lam_n ** (-1 / 2))))
        partial = tuple(partials)
    slope = _dyadic_tail_slope(partial)
    return TraceCondition(value=value, tail_slope=slope,
                          divergent=bool(slope > DIVERGENCE_SLOPE),
                          partial_sums=partial)
