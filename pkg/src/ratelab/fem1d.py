"""Piecewise-linear finite elements on a uniform mesh of the unit interval.

Assembly, generalized eigenpairs, exact cross-Gramians against the
spectral basis, projections, and closed-form fully discrete Gaussian laws
including cross-covariances with spectral or spatially semidiscrete
references.  All time accumulation is geometric (no simulation).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from ._geom import geom_sum, geom_sum0
from .errors import NumericalFailure
from .models import GaussianLaw, JointLaw, ModelSpec, mild_law
from .spectral_core import EigenBasis


@dataclass(frozen=True)
class FemSpace:
    """Uniform P1 space: mass/stiffness matrices and discrete eigenpairs.

    Eigenvectors V are M-orthonormal nodal coefficient columns, ascending
    in the eigenvalue; the Neumann variant has the constant mode removed.
    """

    h: float
    bc: str
    M_mass: np.ndarray = field(repr=False)
    K_stiff: np.ndarray = field(repr=False)
    lam_h: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)

    @property
    def n_modes(self):
        return len(self.lam_h)

    @property
    def nus_h(self):
        return np.sqrt(self.lam_h)

    def generator(self, family: str):
        if family == "chc":
            return self.lam_h ** 2
        if family == "heat":
            return self.lam_h
        raise ValueError("scalar generator exists for heat and chc only")


def assemble_fem(h: float, bc: str) -> FemSpace:
    """Assemble mass/stiffness matrices and solve K v = lambda M v."""
    M = 1.0 / h
    if abs(M - round(M)) > 1e-9 or round(M) < 2:
        raise ValueError("1/h must be an integer >= 2")
    M = int(round(M))
    if bc == "dirichlet":
        n = M - 1
        mass = np.diag(np.full(n, 4 * h / 6.0))
        stiff = np.diag(np.full(n, 2.0 / h))
        if n > 1:
            mass += np.diag(np.full(n - 1, h / 6.0), 1) + np.diag(np.full(n - 1, h / 6.0), -1)
            stiff += np.diag(np.full(n - 1, -1.0 / h), 1) + np.diag(np.full(n - 1, -1.0 / h), -1)
    elif bc == "neumann_meanzero":
        n = M + 1
        mass = np.zeros((n, n))
        stiff = np.zeros((n, n))
        me = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        ke = 1.0 / h * np.array([[1.0, -1.0], [-1.0, 1.0]])
        for e in range(M):
            mass[e:e + 2, e:e + 2] += me
            stiff[e:e + 2, e:e + 2] += ke
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    try:
        w, V = eigh(stiff, mass)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalFailure("generalized eigensolve failed") from exc
    if bc == "neumann_meanzero":
        if abs(w[0]) > 1e-8:
            raise NumericalFailure("constant mode not found in Neumann spectrum")
        w, V = w[1:], V[:, 1:]
    return FemSpace(h=h, bc=bc, M_mass=mass, K_stiff=stiff,
                    lam_h=np.maximum(w, 0.0), V=V)


def fem_eigs(space: FemSpace):
    """Discrete eigenpairs (ascending, M-orthonormal)."""
    return space.lam_h, space.V


def dirichlet_fem_eigenvalue(j, h):
    """Closed-form uniform-mesh P1 Dirichlet eigenvalue."""
    th = np.asarray(j, dtype=float) * np.pi * h
    return 6.0 * (1.0 - np.cos(th)) / (h ** 2 * (2.0 + np.cos(th)))


def _int_trig_linear(x0, x1, c0, c1, a, kind):
    """Exact integral of (c0 + c1 x) * trig(a x) over [x0, x1]; a is an array."""
    a = np.asarray(a, dtype=float)
    s0, s1 = np.sin(a * x0), np.sin(a * x1)
    co0, co1 = np.cos(a * x0), np.cos(a * x1)
    if kind == "cos":
        base = (s1 - s0) / a
        lin = (co1 - co0) / a ** 2 + (x1 * s1 - x0 * s0) / a
    else:
        base = (co0 - co1) / a
        lin = (s1 - s0) / a ** 2 - (x1 * co1 - x0 * co0) / a
    return c0 * base + c1 * lin


def hat_spectral_gram(M: int, J: int, bc: str) -> np.ndarray:
    """<hat_l, phi_j> for every free node l and spectral mode j (exact)."""
    h = 1.0 / M
    a = np.arange(1, J + 1) * np.pi
    if bc == "dirichlet":
        nodes = list(range(1, M))
        kind = "sin"
    else:
        nodes = list(range(0, M + 1))
        kind = "cos"
    out = np.zeros((len(nodes), J))
    for row, l in enumerate(nodes):
        xl = l * h
        acc = np.zeros(J)
        if l > 0:
            acc = acc + _int_trig_linear(xl - h, xl, -(xl - h) / h, 1.0 / h, a, kind)
        if l < M:
            acc = acc + _int_trig_linear(xl, xl + h, (xl + h) / h, -1.0 / h, a, kind)
        out[row] = np.sqrt(2.0) * acc
    return out


@dataclass(frozen=True)
class CrossGramian:
    """G[i, j] = <phi_j, phi_h_i>: spectral modes against discrete modes."""

    G: np.ndarray = field(repr=False)
    space: FemSpace
    basis: EigenBasis

    def bessel_defects(self):
        """1 - sum_i G[i, j]^2 per spectral mode (squared projection error)."""
        return 1.0 - np.sum(self.G ** 2, axis=0)


def cross_gramian(space: FemSpace, basis: EigenBasis) -> CrossGramian:
    """Exact inner products between the truncated spectral basis and the
    discrete eigenbasis."""
    M = int(round(1.0 / space.h))
    hat = hat_spectral_gram(M, basis.J, space.bc)
    return CrossGramian(G=space.V.T @ hat, space=space, basis=basis)


def fem_projections(space: FemSpace, basis: EigenBasis, v, gram: CrossGramian | None = None):
    """L2 and Ritz projections of a spectral vector, in discrete eigenframe
    coordinates."""
    G = (gram or cross_gramian(space, basis)).G
    v = np.asarray(v, dtype=float)
    ph = G @ v
    rh = (G @ (basis.lambdas * v)) / space.lam_h
    return {"P_h": ph, "R_h": rh}


def l2_distance(space: FemSpace, basis: EigenBasis, fem_coeffs, spectral_coeffs,
                gram: CrossGramian | None = None) -> float:
    """|f_h - f|_{L2} for f_h in the discrete eigenframe, f spectral."""
    G = (gram or cross_gramian(space, basis)).G
    fh = np.asarray(fem_coeffs, dtype=float)
    f = np.asarray(spectral_coeffs, dtype=float)
    d2 = np.sum(fh ** 2) - 2.0 * fh @ (G @ f) + np.sum(f ** 2)
    return float(np.sqrt(max(d2, 0.0)))


def _noise_matrix(G, q):
    """Covariance of the projected noise P_h dW in the discrete frame."""
    return (G * q) @ G.T


def _projected_initial(space, model, G, X0=None, X0_fem=None):
    if X0_fem is not None:
        return np.asarray(X0_fem)
    if X0 is None:
        X0 = model.X0
    X0 = np.asarray(X0, dtype=float)
    if model.family == "wave":
        d = G @ X0[0]
        v = G @ X0[1]
        return d + 1j * v / space.nus_h
    return G @ X0


def fully_discrete_law(space: FemSpace, scheme, k: float, N: int,
                       model: ModelSpec, X0=None, gram: CrossGramian | None = None,
                       X0_fem=None):
    """Law of the fully discrete solution plus its joint law with the exact
    (spectral, truncated) reference driven by the same noise.

    Returns (law, joint) with the law in discrete eigenframe coordinates.
    """
    if not model.Q.is_diagonal:
        raise ValueError("fully discrete laws support diagonal Q only")
    gram = gram or cross_gramian(space, model.basis)
    G = gram.G
    q = model.Q.weights_on(model.basis)
    T = k * N
    ref = mild_law(model, T)
    if model.family == "wave":
        nuh = space.nus_h
        nuc = model.basis.nus
        zeta = scheme.r_at(1j * k * nuh)
        u0 = _projected_initial(space, model, G, X0, X0_fem)
        mu = zeta ** N * u0
        Qh = _noise_matrix(G, q)
        inv_nn = 1.0 / np.outer(nuh, nuh)
        P = k * Qh * inv_nn * geom_sum(np.outer(zeta, np.conj(zeta)), N)
        S = -k * Qh * inv_nn * geom_sum(np.outer(zeta, zeta), N)
        law = GaussianLaw(kind="wave", frame="fem", nus=nuh, mu=mu, P=P, S=S)
        enk = np.exp(1j * nuc * k)
        CP = (G * q / np.outer(nuh, nuc)) \
            * ((1.0 - np.exp(-1j * nuc * k)) / (1j * nuc))[None, :] \
            * geom_sum(zeta[:, None] * enk[None, :], N)
        CS = -(G * q / np.outer(nuh, nuc)) \
            * ((enk - 1.0) / (1j * nuc))[None, :] \
            * geom_sum(zeta[:, None] * np.conj(enk)[None, :], N)
        joint = JointLaw(lawA=law, lawB=ref, CP=CP, CS=CS, gramian=G)
        return law, joint
    a_h = space.generator(model.family)
    a_c = model.generator
    r = scheme.r_at(np.asarray(k * a_h, dtype=complex)).real
    mean = r ** N * _projected_initial(space, model, G, X0, X0_fem)
    Qh = _noise_matrix(G, q)
    C = k * Qh * geom_sum(np.outer(r, r), N).real
    law = GaussianLaw(kind="scalar", frame="fem", nus=None, mu=None, mean=mean, var=C)
    with np.errstate(under="ignore"):
        decay = np.exp(-a_c * k)
        Cx = (G * q) * (-np.expm1(-a_c * k) / a_c)[None, :] \
            * r[:, None] * geom_sum0(r[:, None] * decay[None, :], N).real
    joint = JointLaw(lawA=law, lawB=ref, Cx=Cx, gramian=G)
    return law, joint


def semidiscrete_law(space: FemSpace, model: ModelSpec, T: float,
                     X0=None, gram: CrossGramian | None = None,
                     X0_fem=None) -> GaussianLaw:
    """Exact-in-time law of the spatially semidiscrete solution at T."""
    if not model.Q.is_diagonal:
        raise ValueError("semidiscrete laws support diagonal Q only")
    gram = gram or cross_gramian(space, model.basis)
    G = gram.G
    q = model.Q.weights_on(model.basis)
    Qh = _noise_matrix(G, q)
    if model.family == "wave":
        nuh = space.nus_h
        u0 = _projected_initial(space, model, G, X0, X0_fem)
        mu = np.exp(-1j * nuh * T) * u0
        diff = np.subtract.outer(nuh, nuh)
        small = np.abs(diff) < 1e-9
        I_diff = np.where(small, T, (1.0 - np.exp(-1j * np.where(small, 1.0, diff) * T))
                          / (1j * np.where(small, 1.0, diff)))
        tot = np.add.outer(nuh, nuh)
        I_tot = (1.0 - np.exp(-1j * tot * T)) / (1j * tot)
        inv_nn = 1.0 / np.outer(nuh, nuh)
        return GaussianLaw(kind="wave", frame="fem", nus=nuh,
                           mu=mu, P=Qh * inv_nn * I_diff, S=-Qh * inv_nn * I_tot)
    a_h = space.generator(model.family)
    with np.errstate(under="ignore"):
        mean = np.exp(-a_h * T) * _projected_initial(space, model, G, X0, X0_fem)
        tot = np.add.outer(a_h, a_h)
        C = Qh * (-np.expm1(-tot * T)) / tot
    return GaussianLaw(kind="scalar", frame="fem", nus=None, mu=None, mean=mean, var=C)


def joint_vs_semidiscrete(space: FemSpace, scheme, k: float, N: int,
                          model: ModelSpec, X0=None,
                          gram: CrossGramian | None = None,
                          X0_fem=None) -> JointLaw:
    """Joint law of the fully discrete solution and the exact-in-time
    semidiscrete solution on the same mesh (pure time-discretization error)."""
    gram = gram or cross_gramian(space, model.basis)
    law, _ = fully_discrete_law(space, scheme, k, N, model, X0=X0, gram=gram,
                                X0_fem=X0_fem)
    ref = semidiscrete_law(space, model, k * N, X0=X0, gram=gram, X0_fem=X0_fem)
    G = gram.G
    q = model.Q.weights_on(model.basis)
    Qh = _noise_matrix(G, q)
    if model.family == "wave":
        nuh = space.nus_h
        zeta = scheme.r_at(1j * k * nuh)
        enk = np.exp(1j * nuh * k)
        inv_nn = 1.0 / np.outer(nuh, nuh)
        CP = Qh * inv_nn * ((1.0 - np.exp(-1j * nuh * k)) / (1j * nuh))[None, :] \
            * geom_sum(zeta[:, None] * enk[None, :], N)
        CS = -Qh * inv_nn * ((enk - 1.0) / (1j * nuh))[None, :] \
            * geom_sum(zeta[:, None] * np.conj(enk)[None, :], N)
        return JointLaw(lawA=law, lawB=ref, CP=CP, CS=CS, gramian=None)
    a_h = space.generator(model.family)
    r = scheme.r_at(np.asarray(k * a_h, dtype=complex)).real
    with np.errstate(under="ignore"):
        decay = np.exp(-a_h * k)
        Cx = Qh * (-np.expm1(-a_h * k) / a_h)[None, :] \
            * r[:, None] * geom_sum0(r[:, None] * decay[None, :], N).real
    return JointLaw(lawA=law, lawB=ref, Cx=Cx, gramian=None)


def evolve_fem(space: FemSpace, req, X0, noise, gram: CrossGramian | None = None):
    """Pathwise fully discrete recursion in the discrete eigenframe."""
    model = req.model
    gram = gram or cross_gramian(space, model.basis)
    G = gram.G
    dW = noise.increments
    if model.family == "wave":
        nuh = space.nus_h
        zeta = req.scheme.r_at(1j * req.k * nuh)
        u = _projected_initial(space, model, G, X0)
        for n in range(req.N):
            u = zeta * (u + 1j * (G @ dW[:, n]) / nuh)
        return np.vstack([u.real, nuh * u.imag])
    a_h = space.generator(model.family)
    r = req.scheme.r_at(np.asarray(req.k * a_h, dtype=complex)).real
    x = _projected_initial(space, model, G, X0)
    for n in range(req.N):
        x = r * (x + G @ dW[:, n])
    return x
