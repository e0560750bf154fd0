"""Exact and Monte Carlo weak/strong error computation, the quadratic
representation identity, and convergence-rate fitting.

Weak errors are differences of closed-form Gaussian expectations; strong
errors come from joint laws (Ito isometry), so no estimate in this module
depends on simulation unless it is explicitly a Monte Carlo check.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import noise as noise_mod
from ._geom import geom_sum, geom_sum0
from .errors import NumericalFailure
from .models import GaussianLaw, JointLaw, ModelSpec, mild_law
from .schemes import DiscreteLawRequest, discrete_law, wave_multipliers

FUNCTIONAL_KINDS = ("quadratic", "sine", "gauss_exp")
SELECTORS = ("full", "first_component", "second_component")


@dataclass(frozen=True)
class TestFunctional:
    """Catalogue test functional G.

    sine:      G(x) = sin(<x, psi>) with raw-coordinate weights psi.
    gauss_exp: G(x) = exp(-1/2 <Mx, x>) with PSD block weights.
    quadratic: G(x) = <Mx, x> + <m, x>; exact-oracle only, outside C_b^2.

    Wave weights have shape (2, J) / (J, 2, 2); scalar ones (J,) each.
    The selector zeroes the weights of the unread component.
    """

    kind: str
    selector: str = "full"
    psi: np.ndarray | None = field(default=None, repr=False)
    Mblocks: np.ndarray | None = field(default=None, repr=False)
    m: np.ndarray | None = field(default=None, repr=False)
    native: bool = False    # weights already live in the law's own frame

    def __post_init__(self):
        if self.kind not in FUNCTIONAL_KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.selector not in SELECTORS:
            raise ValueError(f"unknown selector {self.selector!r}")

    @property
    def is_cb2(self):
        return self.kind in ("sine", "gauss_exp")


def sine_functional(psi, selector="full", native=False):
    psi = np.asarray(psi, dtype=float)
    if psi.ndim == 2:
        psi = psi.copy()
        if selector == "first_component":
            psi[1] = 0.0
        elif selector == "second_component":
            psi[0] = 0.0
    return TestFunctional(kind="sine", selector=selector, psi=psi, native=native)


def quadratic_functional(Mblocks, m=None, selector="full"):
    Mb = np.asarray(Mblocks, dtype=float)
    wave = Mb.ndim == 3
    if m is None:
        m = np.zeros((2, Mb.shape[0])) if wave else np.zeros(len(Mb))
    m = np.asarray(m, dtype=float).copy()
    if wave:
        Mb = Mb.copy()
        if selector == "first_component":
            Mb[:, :, 1] = 0.0
            Mb[:, 1, :] = 0.0
            m[1] = 0.0
        elif selector == "second_component":
            Mb[:, :, 0] = 0.0
            Mb[:, 0, :] = 0.0
            m[0] = 0.0
        if np.max(np.abs(Mb - Mb.transpose(0, 2, 1))) > 1e-12:
            raise ValueError("quadratic blocks must be symmetric")
    return TestFunctional(kind="quadratic", selector=selector, Mblocks=Mb, m=m)


def gauss_exp_functional(Mblocks, selector="full"):
    Mb = np.asarray(Mblocks, dtype=float)
    if Mb.ndim == 3:
        Mb = Mb.copy()
        if selector == "first_component":
            Mb[:, :, 1] = 0.0
            Mb[:, 1, :] = 0.0
        elif selector == "second_component":
            Mb[:, :, 0] = 0.0
            Mb[:, 0, :] = 0.0
    return TestFunctional(kind="gauss_exp", selector=selector, Mblocks=Mb)


# ---------------------------------------------------------------------------
# closed-form expectations


def _pulled_sine_weights(F, law, gram):
    """Raw functional weights in the law's own frame."""
    psi = F.psi
    if law.frame == "spectral" or F.native:
        return psi
    if gram is None:
        raise ValueError("FEM-frame law needs the cross-Gramian to evaluate "
                         "a spectral functional")
    G = gram.G if hasattr(gram, "G") else gram
    if law.kind == "wave":
        return np.vstack([G @ psi[0], G @ psi[1]])
    return G @ psi


def _linear_moments(law: GaussianLaw, w):
    """Mean and variance of the raw linear form <x, w> under the law."""
    if law.kind == "scalar":
        mean = float(w @ law.mean)
        var = float(w @ (law.var * w)) if law.diagonal else float(w @ law.var @ w)
        return mean, var
    alpha = w[0]
    beta = w[1] * law.nus          # reads Im z through the raw velocity
    mu = law.mu
    mean = float(alpha @ mu.real + beta @ mu.imag)
    P, S = law.P, law.S
    if law.diagonal:
        Exx = (P + S.real) / 2.0
        Eyy = (P - S.real) / 2.0
        Exy = S.imag / 2.0
        var = float(np.sum(alpha ** 2 * Exx + 2 * alpha * beta * Exy + beta ** 2 * Eyy))
    else:
        Exx = (P.real + S.real) / 2.0
        Eyy = (P.real - S.real) / 2.0
        Exy = (S.imag - P.imag) / 2.0
        Eyx = (S.imag + P.imag) / 2.0
        var = float(alpha @ Exx @ alpha + beta @ Eyy @ beta
                    + alpha @ Exy @ beta + beta @ Eyx @ alpha)
    return mean, var


def _expect_sine(F, law, gram):
    w = np.asarray(_pulled_sine_weights(F, law, gram), dtype=float)
    if law.kind == "wave" and w.ndim != 2:
        raise ValueError("wave laws need (2, J) sine weights")
    mean, var = _linear_moments(law, w)
    return float(np.sin(mean) * np.exp(-var / 2.0))


def _expect_quadratic(F, law):
    if law.frame != "spectral" or not law.diagonal:
        raise ValueError("quadratic functionals are evaluated on diagonal "
                         "spectral laws only")
    if law.kind == "scalar":
        mw = np.asarray(F.Mblocks, dtype=float)
        mu = law.mean
        return float(mu @ (mw * mu) + F.m @ mu + np.sum(mw * law.var))
    Mb = F.Mblocks
    mu = law.raw_mean()
    C = law.raw_blocks()
    muT = mu.T                                  # (J, 2)
    e_mean = np.einsum("ja,jab,jb->", muT, Mb, muT)
    e_lin = float(np.sum(F.m * mu))
    e_tr = np.einsum("jab,jba->", Mb, C)
    return float(e_mean + e_lin + e_tr)


def _expect_gauss_exp(F, law, gram):
    Mb = F.Mblocks
    if law.kind == "scalar":
        mw = np.asarray(Mb, dtype=float)
        if law.frame == "fem":
            if gram is None:
                raise ValueError("FEM-frame law needs the cross-Gramian")
            G = gram.G if hasattr(gram, "G") else gram
            Mmat = (G * mw) @ G.T
            C = law.var if not law.diagonal else np.diag(law.var)
            A = np.eye(len(Mmat)) + C @ Mmat
            sign, logdet = np.linalg.slogdet(A)
            if sign <= 0:
                raise NumericalFailure("gauss_exp determinant non-positive")
            mu = law.mean
            expo = mu @ np.linalg.solve(A.T, Mmat @ mu)
            return float(np.exp(-0.5 * logdet) * np.exp(-0.5 * expo))
        if law.diagonal:
            mu, v = law.mean, law.var
            return float(np.exp(-0.5 * np.sum(np.log1p(mw * v))
                                - 0.5 * np.sum(mw * mu ** 2 / (1.0 + v * mw))))
        A = np.eye(len(mu := law.mean)) + law.var @ np.diag(mw)
        sign, logdet = np.linalg.slogdet(A)
        expo = mu @ np.linalg.solve(A.T, np.diag(mw) @ mu)
        return float(np.exp(-0.5 * logdet - 0.5 * expo))
    if law.frame != "spectral" or not law.diagonal:
        raise ValueError("wave gauss_exp needs a diagonal spectral law")
    mu = law.raw_mean().T                       # (J, 2)
    C = law.raw_blocks()
    A = np.eye(2)[None, :, :] + C @ Mb
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    if np.any(det <= 0):
        raise NumericalFailure("gauss_exp determinant non-positive")
    # exponent matrix is M (I + C M)^{-1}, symmetric by push-through
    Ainv_mu = np.linalg.solve(A, mu[:, :, None])
    expo = np.sum(mu * (Mb @ Ainv_mu)[:, :, 0])
    return float(np.exp(-0.5 * np.sum(np.log(det)) - 0.5 * expo))


def expectation(F: TestFunctional, law: GaussianLaw, gram=None) -> float:
    """E[G(X)] for a catalogue functional under a Gaussian law."""
    if F.kind == "sine":
        return _expect_sine(F, law, gram)
    if F.kind == "quadratic":
        return _expect_quadratic(F, law)
    return _expect_gauss_exp(F, law, gram)


def weak_error_exact(lawA: GaussianLaw, lawB: GaussianLaw, F: TestFunctional,
                     gram=None) -> float:
    """E[G(B)] - E[G(A)]: lawA is the reference, lawB the approximation.

    Laws in different frames need the cross-Gramian; it is applied to
    whichever law lives in the FEM frame.
    """
    if lawA.kind != lawB.kind:
        raise ValueError("laws must share the state kind")
    if lawA.frame != lawB.frame and gram is None:
        raise ValueError("laws in different frames need a cross-Gramian")
    ea = expectation(F, lawA, gram)
    eb = expectation(F, lawB, gram)
    return eb - ea


# ---------------------------------------------------------------------------
# strong error


def _second_moment_first_component(law: GaussianLaw):
    if law.kind == "scalar":
        mu = law.mean
        tr = float(np.sum(law.var)) if law.diagonal else float(np.trace(law.var))
        return float(mu @ mu) + tr
    mu = law.mu
    if law.diagonal:
        tr = float(np.sum((law.P + law.S.real) / 2.0))
    else:
        tr = float(np.sum((np.diag(law.P).real + np.diag(law.S).real) / 2.0))
    return float(np.sum(mu.real ** 2)) + tr


def strong_error_exact(joint: JointLaw, norm: str = "first_component") -> float:
    """L2(Omega) distance of the coupled pair in the selected norm.

    "first_component" measures the displacement (wave) or the state
    (scalar) in L2; "H" measures the full energy norm and needs both laws
    in one frame.
    """
    A, B = joint.lawA, joint.lawB
    if norm not in ("first_component", "H"):
        raise ValueError("norm must be 'first_component' or 'H'")
    if A.kind == "scalar":
        mA, mB = A.mean, B.mean
        trA = float(np.sum(A.var)) if A.diagonal else float(np.trace(A.var))
        trB = float(np.sum(B.var)) if B.diagonal else float(np.trace(B.var))
        if joint.gramian is None:
            tr_cross = float(np.trace(joint.Cx)) if joint.Cx.ndim == 2 \
                else float(np.sum(joint.Cx))
            cross = float(mA @ mB) + tr_cross
        else:
            G = joint.gramian
            cross = float(np.sum((np.outer(mA, mB) + joint.Cx) * G))
        total = (mA @ mA + trA) - 2.0 * cross + (mB @ mB + trB)
    elif norm == "H":
        if joint.gramian is not None:
            raise ValueError("energy-norm strong error needs a common frame")
        dmu2 = float(np.sum(np.abs(A.mu - B.mu) ** 2))
        trA = float(np.sum(A.P).real) if A.diagonal else float(np.trace(A.P).real)
        trB = float(np.sum(B.P).real) if B.diagonal else float(np.trace(B.P).real)
        trX = float(np.sum(joint.CP).real) if joint.CP.ndim == 1 \
            else float(np.trace(joint.CP).real)
        total = dmu2 + trA + trB - 2.0 * trX
    else:
        EA = _second_moment_first_component(A)
        EB = _second_moment_first_component(B)
        muA, muB = A.mu.real, B.mu.real
        covRR = (joint.CP.real + joint.CS.real) / 2.0
        if joint.gramian is None:
            if covRR.ndim == 1:
                cross = float(muA @ muB + np.sum(covRR))
            else:
                cross = float(muA @ muB + np.trace(covRR))
        else:
            cross = float(np.sum((np.outer(muA, muB) + covRR) * joint.gramian))
        total = EA - 2.0 * cross + EB
    scale = max(abs(total), 1.0)
    if total < -1e-8 * scale:
        raise NumericalFailure(f"assembled strong error is negative: {total}")
    return float(np.sqrt(max(total, 0.0)))


def temporal_joint_law(req: DiscreteLawRequest, X0=None) -> JointLaw:
    """Joint law of the spectral discrete solution and the mild solution."""
    model = req.model
    if req.space != "spectral":
        raise ValueError("temporal joints live on the spectral truncation")
    law = discrete_law(req, X0=X0)
    if X0 is not None:
        model = ModelSpec(family=model.family, basis=model.basis, Q=model.Q,
                          X0=np.asarray(X0, dtype=float))
    ref = mild_law(model, req.T)
    q = model.Q.weights_on(model.basis)
    k, N = req.k, req.N
    if model.family == "wave":
        nu = model.basis.nus
        lam = model.basis.lambdas
        zeta = wave_multipliers(req.scheme, k, model.basis)
        enk = np.exp(1j * nu * k)
        CP = (q / lam) * (1.0 - np.exp(-1j * nu * k)) / (1j * nu) \
            * geom_sum(zeta * enk, N)
        CS = -(q / lam) * (enk - 1.0) / (1j * nu) * geom_sum(zeta * np.conj(enk), N)
        return JointLaw(lawA=law, lawB=ref, CP=CP, CS=CS, gramian=None)
    a = model.generator
    r = req.scheme.r_at(np.asarray(k * a, dtype=complex)).real
    with np.errstate(under="ignore"):
        decay = np.exp(-a * k)
        Cx = q * (-np.expm1(-a * k) / a) * r * geom_sum0(r * decay, N)
    return JointLaw(lawA=law, lawB=ref, Cx=Cx, gramian=None)


def ito_isometry_error(req: DiscreteLawRequest, X0=None, norm="H") -> float:
    """Temporal strong error integrated directly from the Ito isometry.

    Independent of the joint-law path: sums closed-form per-step integrals
    of |zeta^m - exp(-i nu tau)|^2 instead of geometric covariance blocks.
    """
    model = req.model
    if model.family != "wave" or req.space != "spectral":
        raise ValueError("the direct isometry path is implemented for the "
                         "spectral wave family")
    nu = model.basis.nus
    lam = model.basis.lambdas
    q = model.Q.weights_on(model.basis)
    k, N = req.k, req.N
    T = req.T
    zeta = wave_multipliers(req.scheme, k, model.basis)
    if X0 is None:
        u0 = model.x0_complex()
    else:
        X0 = np.asarray(X0, dtype=float)
        u0 = X0[0] + 1j * X0[1] / nu
    mean_term = np.abs((zeta ** N - np.exp(-1j * nu * T)) * u0) ** 2
    if norm == "first_component":
        mean_term = ((zeta ** N - np.exp(-1j * nu * T)) * u0).real ** 2
    total = float(np.sum(mean_term))
    # integral over s in (t_{m-1}, t_m]: tilde E(T-s) = E_k^{N-m+1}
    for m in range(1, N + 1):
        zm = zeta ** (N - m + 1)
        t0, t1 = (N - m) * k, (N - m + 1) * k
        # int |zm - e^{-i nu tau}|^2 dtau over tau in [t0, t1]
        inner = (np.exp(1j * nu * t1) - np.exp(1j * nu * t0)) / (1j * nu)
        base = k * (np.abs(zm) ** 2 + 1.0) - 2.0 * (zm * inner).real
        if norm == "H":
            total += float(np.sum((q / lam) * base))
        else:
            # first component of the column (i/nu)(zm - e^{-i nu tau}) has
            # real part -(Im zm + sin(nu tau)) / nu
            int_sin2 = (t1 - t0) / 2.0 - (np.sin(2 * nu * t1) - np.sin(2 * nu * t0)) / (4 * nu)
            int_sin = (np.cos(nu * t0) - np.cos(nu * t1)) / nu
            comp = zm.imag ** 2 * k + 2.0 * zm.imag * int_sin + int_sin2
            total += float(np.sum((q / lam) * comp))
    return float(np.sqrt(max(total, 0.0)))


# ---------------------------------------------------------------------------
# Monte Carlo closure

MC_CHUNK = 256                 # paths per deterministic reduction chunk
_RESIDUAL_STREAM = 1 << 32     # substream offset for conditional residuals


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    standard_error: float
    n_paths: int


def _step_coupling_wave(model, k):
    """Per-step exact-propagation coefficients for the wave reference.

    Returns (rot, alpha, L) with rot the exact one-step rotation, alpha the
    conditional-mean coefficient on dW, and L the 2x2 Cholesky factors of
    the conditional residual covariance in (Re, Im) coordinates.
    """
    nu = model.basis.nus
    lam = model.basis.lambdas
    q = model.Q.weights_on(model.basis)
    rot = np.exp(-1j * nu * k)
    P_eta = q * k / lam
    S_eta = -(q / lam) * (1.0 - np.exp(-2j * nu * k)) / (2j * nu)
    c = q * (1.0 - np.exp(-1j * nu * k)) / lam
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where(q > 0, c / (k * q), 0.0)
        Pr = P_eta - np.where(q > 0, np.abs(c) ** 2 / (k * q), 0.0)
        Sr = S_eta - np.where(q > 0, c ** 2 / (k * q), 0.0)
    Exx = np.maximum((Pr + Sr.real) / 2.0, 0.0)
    Eyy = np.maximum((Pr - Sr.real) / 2.0, 0.0)
    Exy = Sr.imag / 2.0
    l11 = np.sqrt(Exx)
    l21 = np.where(l11 > 0, Exy / np.where(l11 > 0, l11, 1.0), 0.0)
    l22 = np.sqrt(np.maximum(Eyy - l21 ** 2, 0.0))
    return rot, alpha, (l11, l21, l22)


def _step_coupling_scalar(model, k):
    a = model.generator
    q = model.Q.weights_on(model.basis)
    rot = np.exp(-a * k)
    v_eta = -q * np.expm1(-2 * a * k) / (2 * a)
    c = -q * np.expm1(-a * k) / a
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where(q > 0, c / (k * q), 0.0)
        vr = v_eta - np.where(q > 0, c ** 2 / (k * q), 0.0)
    return rot, alpha, np.sqrt(np.maximum(vr, 0.0))


def _functional_path_values(F, raw, gram=None, frame="spectral"):
    """G evaluated on raw path states: raw is (2, n, P) or (n, P)."""
    if F.kind == "sine":
        psi = F.psi
        if frame == "fem":
            G = gram.G if hasattr(gram, "G") else gram
            psi = np.vstack([G @ psi[0], G @ psi[1]]) if psi.ndim == 2 else G @ psi
        if raw.ndim == 3:
            args = psi[0] @ raw[0] + psi[1] @ raw[1]
        else:
            args = psi @ raw
        return np.sin(args)
    if frame != "spectral":
        raise ValueError("pathwise quadratic/gauss_exp need the spectral frame")
    if raw.ndim == 3:
        x = raw.transpose(2, 1, 0)      # (P, J, 2)
        quad = np.einsum("pja,jab,pjb->p", x, F.Mblocks, x)
        if F.kind == "gauss_exp":
            return np.exp(-0.5 * quad)
        lin = np.einsum("aj,pja->p", F.m, x)
        return quad + lin
    x = raw.T                           # (P, J)
    quad = np.einsum("pj,j,pj->p", x, F.Mblocks, x)
    if F.kind == "gauss_exp":
        return np.exp(-0.5 * quad)
    return quad + x @ F.m


def _coupled_paths(model, req, seed, paths, gram=None):
    """Terminal (approximate, exact-reference) raw states for given paths."""
    basis = model.basis
    J, N, k = basis.J, req.N, req.k
    nu = basis.nus
    q = model.Q.weights_on(basis)
    fem = req.space != "spectral"
    P = len(paths)
    if model.family == "wave":
        rot, alpha, (l11, l21, l22) = _step_coupling_wave(model, k)
        zeta = wave_multipliers(req.scheme, k, basis)
        u0 = model.x0_complex()
        u_ref = np.tile(u0[:, None], (1, P))
        if fem:
            from .fem1d import cross_gramian
            gram = gram or cross_gramian(req.space, basis)
            G = gram.G
            nuh = req.space.nus_h
            zeta_h = req.scheme.r_at(1j * k * nuh)
            d0 = G @ model.X0[0]
            v0 = G @ model.X0[1]
            u_d = np.tile((d0 + 1j * v0 / nuh)[:, None], (1, P))
        else:
            u_d = u_ref.copy()
        scale = np.sqrt(k * q)
        for idx, p in enumerate(paths):
            dW = scale[:, None] * ndtri(noise_mod.uniform_block(seed, J, N, stream=p))
            zn = ndtri(noise_mod.uniform_block(seed, 2 * J, N, stream=_RESIDUAL_STREAM + p))
            xi = l11[:, None] * zn[:J] + 1j * (l21[:, None] * zn[:J] + l22[:, None] * zn[J:])
            ur = u_ref[:, idx]
            ud = u_d[:, idx]
            for n in range(N):
                ur = rot * ur + alpha * dW[:, n] + xi[:, n]
                if fem:
                    ud = zeta_h * (ud + 1j * (G @ dW[:, n]) / nuh)
                else:
                    ud = zeta * (ud + 1j * dW[:, n] / nu)
            u_ref[:, idx] = ur
            u_d[:, idx] = ud
        raw_ref = np.stack([u_ref.real, nu[:, None] * u_ref.imag])
        if fem:
            raw_d = np.stack([u_d.real, req.space.nus_h[:, None] * u_d.imag])
        else:
            raw_d = np.stack([u_d.real, nu[:, None] * u_d.imag])
        return raw_d, raw_ref, gram
    rot, alpha, lres = _step_coupling_scalar(model, k)
    r = req.scheme.r_at(np.asarray(k * model.generator, dtype=complex)).real
    x_ref = np.tile(model.X0[:, None], (1, P))
    if fem:
        from .fem1d import cross_gramian
        gram = gram or cross_gramian(req.space, basis)
        G = gram.G
        r_h = req.scheme.r_at(np.asarray(k * req.space.generator(model.family),
                                         dtype=complex)).real
        x_d = np.tile((G @ model.X0)[:, None], (1, P))
    else:
        x_d = x_ref.copy()
    scale = np.sqrt(k * q)
    for idx, p in enumerate(paths):
        dW = scale[:, None] * ndtri(noise_mod.uniform_block(seed, J, N, stream=p))
        zn = ndtri(noise_mod.uniform_block(seed, J, N, stream=_RESIDUAL_STREAM + p))
        xr = x_ref[:, idx]
        xd = x_d[:, idx]
        for n in range(N):
            xr = rot * xr + alpha * dW[:, n] + lres * zn[:, n]
            if fem:
                xd = r_h * (xd + G @ dW[:, n])
            else:
                xd = r * (xd + dW[:, n])
        x_ref[:, idx] = xr
        x_d[:, idx] = xd
    return x_d, x_ref, gram


def weak_error_mc(model: ModelSpec, req: DiscreteLawRequest, F: TestFunctional,
                  n_paths: int, seed: int, gram=None) -> McEstimate:
    """Sample mean of G(approximate) - G(exact reference) on coupled paths.

    The reference advances the truncated mild solution exactly per step
    with the stochastic convolution drawn from its conditional law given
    the shared increments, so the estimate has no discretization bias.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    frame = "fem" if req.space != "spectral" else "spectral"
    vals = np.empty(n_paths)
    for lo in range(0, n_paths, MC_CHUNK):
        paths = range(lo, min(lo + MC_CHUNK, n_paths))
        raw_d, raw_ref, gram = _coupled_paths(model, req, seed, paths, gram)
        gd = _functional_path_values(F, raw_d, gram, frame)
        ge = _functional_path_values(F, raw_ref, None, "spectral")
        vals[lo:lo + len(gd)] = gd - ge
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(n_paths))
    return McEstimate(estimate=est, standard_error=se, n_paths=n_paths)


def strong_error_mc(model: ModelSpec, req: DiscreteLawRequest, n_paths: int,
                    seed: int, norm: str = "first_component", gram=None) -> McEstimate:
    """Monte Carlo L2(Omega) distance of the coupled pair."""
    if n_paths < 2:
        raise ValueError("need at least two paths")
    fem = req.space != "spectral"
    sq = np.empty(n_paths)
    for lo in range(0, n_paths, MC_CHUNK):
        paths = range(lo, min(lo + MC_CHUNK, n_paths))
        raw_d, raw_ref, gram = _coupled_paths(model, req, seed, paths, gram)
        if model.family == "wave":
            a1 = raw_d[0]
            b1 = raw_ref[0]
            if norm == "H":
                if fem:
                    raise ValueError("energy norm needs a common frame")
                ua = raw_d[0] + 1j * raw_d[1] / model.basis.nus[:, None]
                ub = raw_ref[0] + 1j * raw_ref[1] / model.basis.nus[:, None]
                d2 = np.sum(np.abs(ua - ub) ** 2, axis=0)
            elif fem:
                G = gram.G if hasattr(gram, "G") else gram
                d2 = (np.sum(a1 ** 2, axis=0) - 2 * np.sum(a1 * (G @ b1), axis=0)
                      + np.sum(b1 ** 2, axis=0))
            else:
                d2 = np.sum((a1 - b1) ** 2, axis=0)
        elif fem:
            G = gram.G if hasattr(gram, "G") else gram
            d2 = (np.sum(raw_d ** 2, axis=0) - 2 * np.sum(raw_d * (G @ raw_ref), axis=0)
                  + np.sum(raw_ref ** 2, axis=0))
        else:
            d2 = np.sum((raw_d - raw_ref) ** 2, axis=0)
        sq[lo:lo + len(d2)] = d2
    m2 = float(np.mean(sq))
    est = float(np.sqrt(max(m2, 0.0)))
    se_m2 = float(np.std(sq, ddof=1) / np.sqrt(n_paths))
    se = se_m2 / (2.0 * est) if est > 0 else se_m2
    return McEstimate(estimate=est, standard_error=se, n_paths=n_paths)


# ---------------------------------------------------------------------------
# representation identity for quadratic functionals


def representation_check(model: ModelSpec, scheme, k: float, N: int,
                         F: TestFunctional) -> dict:
    """Split the exact weak error into the two terms of the representation
    formula and report the defect.

    term1 reads the deterministic initial-state part; term2 integrates the
    covariance perturbation per step interval with closed-form trig or
    exponential antiderivatives, in both orderings of the perturbation
    operator (their agreement is reported as f1_f2_gap).
    """
    if F.kind != "quadratic":
        raise ValueError("the representation check needs a quadratic functional")
    req = DiscreteLawRequest(model=model, scheme=scheme, k=k, N=N)
    T = req.T
    exact = mild_law(model, T)
    disc = discrete_law(req)
    lhs = weak_error_exact(exact, disc, F)
    q = model.Q.weights_on(model.basis)
    if model.family == "wave":
        nu = model.basis.nus
        lam = model.basis.lambdas
        zeta = wave_multipliers(scheme, k, model.basis)
        u0 = model.x0_complex()
        Y0 = np.exp(-1j * nu * T) * u0
        Yt0 = zeta ** N * u0
        Y0r = np.vstack([Y0.real, nu * Y0.imag])
        Yt0r = np.vstack([Yt0.real, nu * Yt0.imag])
        Mb = F.Mblocks
        sumv = (Yt0r + Y0r).T
        diffv = (Yt0r - Y0r).T
        term1 = float(np.einsum("ja,jab,jb->", sumv, Mb, diffv)
                      + np.sum(F.m * (Yt0r - Y0r)))
        ms = np.arange(1, N + 1)
        zm = zeta[:, None] ** ms[None, :]                       # (J, N)
        vt = np.stack([-zm.imag / nu[:, None], zm.real])        # tilde v, (2, J, N)
        t0 = (ms - 1) * k
        t1 = ms * k
        nuT = nu[:, None]
        int_sin = (np.cos(nuT * t0) - np.cos(nuT * t1)) / nuT
        int_cos = (np.sin(nuT * t1) - np.sin(nuT * t0)) / nuT
        int_v = np.stack([int_sin / nuT, int_cos])              # int v dtau
        int_s2 = k / 2.0 - (np.sin(2 * nuT * t1) - np.sin(2 * nuT * t0)) / (4 * nuT)
        int_c2 = k / 2.0 + (np.sin(2 * nuT * t1) - np.sin(2 * nuT * t0)) / (4 * nuT)
        int_sc = (np.cos(2 * nuT * t0) - np.cos(2 * nuT * t1)) / (4 * nuT)
        m11 = Mb[:, 0, 0][:, None]
        m12 = Mb[:, 0, 1][:, None]
        m22 = Mb[:, 1, 1][:, None]
        # int v^T M v dtau over the step
        ivMv = (m11 * int_s2 / lam[:, None] + 2 * m12 * int_sc / nuT + m22 * int_c2)
        # tilde v^T M tilde v * k
        tvMtv = k * (m11 * vt[0] ** 2 + 2 * m12 * vt[0] * vt[1] + m22 * vt[1] ** 2)
        # cross terms, both orders (equal for symmetric M, computed literally)
        tvM_iv = (m11 * vt[0] * int_v[0] + m12 * (vt[0] * int_v[1] + vt[1] * int_v[0])
                  + m22 * vt[1] * int_v[1])
        ivM_tv = (m11 * int_v[0] * vt[0] + m12 * (int_v[0] * vt[1] + int_v[1] * vt[0])
                  + m22 * int_v[1] * vt[1])
        qc = q[:, None]
        term2_f2 = float(np.sum(qc * (tvMtv - ivMv + ivM_tv - tvM_iv)))
        term2_f1 = float(np.sum(qc * (tvMtv - ivMv + tvM_iv - ivM_tv)))
    else:
        a = model.generator
        r = scheme.r_at(np.asarray(k * a, dtype=complex)).real
        with np.errstate(under="ignore"):
            Y0 = np.exp(-a * T) * model.X0
        Yt0 = r ** N * model.X0
        mw = F.Mblocks
        term1 = float(np.sum(mw * (Yt0 + Y0) * (Yt0 - Y0)) + F.m @ (Yt0 - Y0))
        ms = np.arange(1, N + 1)
        rm = r[:, None] ** ms[None, :]
        aT = a[:, None]
        t0 = (ms - 1) * k
        t1 = ms * k
        with np.errstate(under="ignore"):
            int_v = (np.exp(-aT * t0) - np.exp(-aT * t1)) / aT
            int_v2 = (np.exp(-2 * aT * t0) - np.exp(-2 * aT * t1)) / (2 * aT)
        tvMtv = k * rm ** 2
        cross = rm * int_v
        qm = (q * mw)[:, None]
        term2_f2 = float(np.sum(qm * (tvMtv - int_v2 + cross - cross)))
        term2_f1 = term2_f2
    gap = abs(lhs - (term1 + term2_f2))
    return {"lhs": lhs, "term1": term1, "term2": term2_f2,
            "gap": gap, "rel_gap": gap / (1.0 + abs(lhs)),
            "f1_f2_gap": abs(term2_f1 - term2_f2)}


# ---------------------------------------------------------------------------
# rate fitting


@dataclass(frozen=True)
class RateReport:
    """Least-squares slope of log(error) against log(resolution)."""

    points: tuple
    slope: float
    intercept: float
    r2: float
    expected: float | None
    tolerance: float
    passed: bool | None
    model_hint: str
    n_excluded: int = 0

    def as_dict(self):
        return {
            "points": [list(p) for p in self.points],
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "model_hint": self.model_hint,
            "n_excluded": self.n_excluded,
        }


def fit_rate(points, model_hint: str = "plain", expected: float | None = None,
             tolerance: float = 0.1, log_factors=None) -> RateReport:
    """Fit the observed convergence order.

    `points` are (resolution, error) pairs; log_corrected divides each
    error by its log factor log(T / (h^4 + k)) before fitting.  Zero
    errors are exact matches and are excluded; negative errors are
    invalid.
    """
    if model_hint not in ("plain", "log_corrected"):
        raise ValueError("model_hint must be 'plain' or 'log_corrected'")
    pts = [(float(r), float(e)) for r, e in points]
    if any(e < 0 for _, e in pts):
        raise ValueError("errors must be nonnegative")
    if model_hint == "log_corrected":
        if log_factors is None or len(log_factors) != len(pts):
            raise ValueError("log_corrected fits need one log factor per point")
        if any(L <= 0 for L in log_factors):
            raise ValueError("log factors must be positive")
        pts = [(r, e / L) for (r, e), L in zip(pts, log_factors)]
    kept = [(r, e) for r, e in pts if e > 0]
    n_excluded = len(pts) - len(kept)
    if len(kept) < 4:
        raise ValueError("need at least four positive-error points")
    res = np.array([r for r, _ in kept])
    if res.max() / res.min() < 8.0 * (1.0 - 1e-9):
        raise ValueError("resolutions must span at least three dyadic levels")
    x = np.log(res)
    y = np.log(np.array([e for _, e in kept]))
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    fitted = A @ np.array([slope, intercept])
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    passed = None if expected is None else bool(abs(slope - expected) <= tolerance)
    return RateReport(points=tuple(kept), slope=float(slope), intercept=float(intercept),
                      r2=r2, expected=expected, tolerance=tolerance, passed=passed,
                      model_hint=model_hint, n_excluded=n_excluded)
