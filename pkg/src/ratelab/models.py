"""Exact continuous-time objects: wave group, heat/CHC semigroups, mild
Gaussian laws, the trace identity, and Hoelder/regularity checks.

State coordinates are raw eigen-coefficients.  Internally a wave mode is
held as the complex number u = x1 + i x2/nu, in which the group acts as
multiplication by exp(-i nu t) and the energy norm is |u|; the Hdot^{-1}
weighting of the velocity appears only when norms or raw blocks are
formed.
"""

from dataclasses import dataclass, field

import numpy as np

from .spectral_core import CovarianceSpec, EigenBasis, DYADIC_SWEEP, DIVERGENCE_SLOPE, \
    _dyadic_tail_slope

FAMILIES = ("wave", "heat", "chc")


@dataclass(frozen=True)
class ModelSpec:
    """One SPDE on the unit interval: family, truncated basis, noise, X0.

    X0 has shape (2, J) for the wave family (displacement, velocity rows)
    and shape (J,) for heat/chc.
    """

    family: str
    basis: EigenBasis
    Q: CovarianceSpec
    X0: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        expected_bc = "neumann_meanzero" if self.family == "chc" else "dirichlet"
        if self.basis.bc != expected_bc:
            raise ValueError(f"{self.family} requires bc={expected_bc}")
        X0 = np.asarray(self.X0, dtype=float)
        if self.family == "wave":
            if X0.shape != (2, self.basis.J):
                raise ValueError("wave X0 must have shape (2, J)")
        elif X0.shape != (self.basis.J,):
            raise ValueError("parabolic X0 must have shape (J,)")

    @property
    def generator(self):
        """Per-mode generator eigenvalues: lambda (heat) or lambda^2 (chc)."""
        if self.family == "wave":
            raise ValueError("the wave generator is not scalar per mode")
        lam = self.basis.lambdas
        return lam if self.family == "heat" else lam ** 2

    def x0_complex(self):
        """Wave initial state as u = x1 + i x2/nu."""
        X0 = np.asarray(self.X0, dtype=float)
        return X0[0] + 1j * X0[1] / self.basis.nus


@dataclass
class GaussianLaw:
    """Mean + covariance of a solution value at one time.

    Wave laws store the complex-coordinate mean mu and the Hermitian /
    pseudo covariance pair (P, S); scalar laws store (mean, var).  Arrays
    are per-mode vectors for diagonal laws and full matrices for coupled
    (FEM) laws.  `nus` are the mode frequencies of the carrying frame.
    """

    kind: str                   # "wave" | "scalar"
    frame: str                  # "spectral" | "fem"
    nus: np.ndarray | None
    mu: np.ndarray
    P: np.ndarray | None = None
    S: np.ndarray | None = None
    mean: np.ndarray | None = None
    var: np.ndarray | None = None

    @property
    def diagonal(self):
        a = self.P if self.kind == "wave" else self.var
        return a.ndim == 1

    def raw_mean(self):
        """Mean in raw coordinates: (2, n) for wave, (n,) for scalar."""
        if self.kind == "scalar":
            return self.mean
        return np.vstack([self.mu.real, self.nus * self.mu.imag])

    def raw_blocks(self):
        """Per-mode 2x2 raw covariance blocks (diagonal wave laws)."""
        if self.kind != "wave" or not self.diagonal:
            raise ValueError("raw_blocks applies to diagonal wave laws")
        nu = self.nus
        Exx = (self.P + self.S.real) / 2.0
        Eyy = (self.P - self.S.real) / 2.0
        Exy = self.S.imag / 2.0
        blocks = np.empty((len(nu), 2, 2))
        blocks[:, 0, 0] = Exx
        blocks[:, 0, 1] = blocks[:, 1, 0] = nu * Exy
        blocks[:, 1, 1] = nu ** 2 * Eyy
        return blocks

    def raw_covariance(self):
        """Full raw covariance: (2n, 2n) for wave, (n, n) for scalar."""
        if self.kind == "scalar":
            return np.diag(self.var) if self.diagonal else self.var
        if self.diagonal:
            P = np.diag(self.P.astype(complex))
            S = np.diag(self.S)
        else:
            P, S = self.P, self.S
        nu = self.nus
        Exx = (P.real + S.real) / 2.0
        Eyy = (P.real - S.real) / 2.0
        Exy = (S.imag - P.imag) / 2.0      # E[x_i y_j]
        Eyx = (S.imag + P.imag) / 2.0      # E[y_i x_j]
        n = len(nu)
        C = np.empty((2 * n, 2 * n))
        C[:n, :n] = Exx
        C[:n, n:] = Exy * nu[None, :]
        C[n:, :n] = Eyx * nu[:, None]
        C[n:, n:] = Eyy * np.outer(nu, nu)
        return C

    def min_block_eig_ratio(self):
        """min eigenvalue / max eigenvalue over the covariance (PSD check)."""
        if self.kind == "wave" and self.diagonal:
            w = np.concatenate([np.linalg.eigvalsh(self.raw_blocks()).ravel(), [0.0]])
        elif self.kind == "scalar" and self.diagonal:
            w = np.concatenate([self.var, [0.0]])
        else:
            w = np.linalg.eigvalsh(self.raw_covariance())
        top = max(np.max(np.abs(w)), 1e-300)
        return float(np.min(w) / top)


@dataclass
class JointLaw:
    """Joint Gaussian law of an approximation A and a reference B driven by
    the same Wiener path.

    For wave laws the cross blocks are CP[i, j] = E[(a_i - E a_i)
    conj(b_j - E b_j)] and CS[i, j] = E[(a_i - E a_i)(b_j - E b_j)] in the
    complex energy coordinates of the respective frames; scalar laws carry
    the real cross covariance Cx.  `gramian` maps frame A onto frame B for
    inner products (None when both live in the same frame).
    """

    lawA: GaussianLaw
    lawB: GaussianLaw
    CP: np.ndarray | None = None
    CS: np.ndarray | None = None
    Cx: np.ndarray | None = None
    gramian: np.ndarray | None = None


def wave_group_mode(lam: float, t: float) -> np.ndarray:
    """Raw 2x2 block of the wave group exp(-tA) at one eigenvalue."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    nu = np.sqrt(lam)
    c, s = np.cos(t * nu), np.sin(t * nu)
    return np.array([[c, s / nu], [-nu * s, c]])


def parabolic_factor(family: str, lam: float, t: float) -> float:
    """Semigroup factor exp(-t lambda) (heat) or exp(-t lambda^2) (chc)."""
    if family not in ("heat", "chc"):
        raise ValueError("parabolic families are heat and chc")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    a = lam if family == "heat" else lam ** 2
    with np.errstate(under="ignore"):
        return float(np.exp(-t * a))


def noise_intensity_diagnostic(model: ModelSpec):
    """Divergence diagnostic for the well-posedness trace of the model.

    Wave and heat need sum q_j / lambda_j < infinity, CHC needs
    sum q_j / lambda_j^2; returns (partial_sums, tail_slope, divergent).
    """
    Q = model.Q
    power = 2 if model.family == "chc" else 1
    if Q.is_diagonal and Q.gamma is not None:
        jmax = max(DYADIC_SWEEP)
        lam = (np.arange(1, jmax + 1, dtype=float) * np.pi) ** 2
        terms = lam ** (-Q.gamma) / lam ** power
    else:
        lam = model.basis.lambdas
        q = Q.weights_on(model.basis) if Q.is_diagonal else np.diag(Q.matrix_on(model.basis))
        terms = q / lam ** power
    csum = np.cumsum(terms)
    partial = tuple(float(csum[min(J, len(terms)) - 1]) for J in DYADIC_SWEEP)
    slope = _dyadic_tail_slope(partial)
    return partial, slope, bool(slope > DIVERGENCE_SLOPE)


def mild_law(model: ModelSpec, T: float) -> GaussianLaw:
    """Exact Gaussian law of the mild solution at time T (diagonal Q only)."""
    if not model.Q.is_diagonal:
        raise ValueError("mild_law supports diagonal Q only; dense Q couples "
                         "modes through the group and is not implemented")
    if T < 0:
        raise ValueError("T must be nonnegative")
    partial, slope, divergent = noise_intensity_diagnostic(model)
    if divergent:
        raise ValueError(
            "noise trace condition diverges (partial-sum slope "
            f"{slope:.3f} > {DIVERGENCE_SLOPE}); partial sums {partial}")
    q = model.Q.weights_on(model.basis)
    lam = model.basis.lambdas
    if model.family == "wave":
        nu = model.basis.nus
        mu = np.exp(-1j * nu * T) * model.x0_complex()
        P = q * T / lam
        S = np.where(T > 0, -(q / lam) * (1.0 - np.exp(-2j * nu * T)) / (2j * nu), 0.0 + 0j)
        return GaussianLaw(kind="wave", frame="spectral", nus=nu, mu=mu, P=P, S=S)
    a = model.generator
    with np.errstate(under="ignore"):
        mean = np.exp(-a * T) * model.X0
        var = -q * np.expm1(-2 * a * T) / (2 * a)
    return GaussianLaw(kind="scalar", frame="spectral", nus=None,
                       mu=None, mean=mean, var=var)


def trace_identity_check(Q: CovarianceSpec, basis: EigenBasis, T: float) -> dict:
    """Energy-trace identity of the stochastic wave convolution.

    lhs integrates the per-mode covariance blocks in closed trigonometric
    form and takes the energy trace; rhs is T * sum_j q_j / lambda_j.
    """
    if not Q.is_diagonal:
        raise ValueError("the identity check needs diagonal Q")
    q = Q.weights_on(basis)
    lam = basis.lambdas
    nu = basis.nus
    # raw closed-form integrals of sin^2, cos^2 over [0, T]
    int_sin2 = T / 2.0 - np.sin(2 * nu * T) / (4 * nu)
    int_cos2 = T / 2.0 + np.sin(2 * nu * T) / (4 * nu)
    c11 = q * int_sin2 / lam
    c22 = q * int_cos2
    lhs = float(np.sum(c11 + c22 / lam))
    rhs = float(T * np.sum(q / lam))
    return {"lhs": lhs, "rhs": rhs, "abs_diff": abs(lhs - rhs)}


def holder_check(basis: EigenBasis, alpha: float, t: float, s: float) -> float:
    """Measured Hoelder ratio of the group difference in B(H^alpha, H).

    Per mode the operator norm of E(t)-E(s) is 2|sin(nu(t-s)/2)| and the
    H^alpha -> H weight is lambda^(-alpha/2); returns the max over modes
    divided by |t-s|^alpha.
    """
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if t < 0 or s < 0:
        raise ValueError("t and s must be nonnegative")
    delta = abs(t - s)
    if delta == 0:
        return 0.0
    nu = basis.nus
    norms = 2.0 * np.abs(np.sin(nu * delta / 2.0)) * basis.lambdas ** (-alpha / 2.0)
    return float(np.max(norms) / delta ** alpha)


def regularity_norm(model: ModelSpec, T: float, beta: float) -> float:
    """Exact second moment |X(T)|_{L2(Omega, H^beta)} from the mild law."""
    law = mild_law(model, T)
    lam = model.basis.lambdas
    if model.family == "wave":
        return float(np.sqrt(np.sum(lam ** beta * (np.abs(law.mu) ** 2 + law.P))))
    return float(np.sqrt(np.sum(lam ** beta * (law.mean ** 2 + law.var))))
