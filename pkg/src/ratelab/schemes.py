"""Rational single-step time discretization.

A scheme is a rational function R with R(0)=1; the per-mode wave step is
the 2x2 matrix R(kA_j), which the identity (kA_j)^2 = -(k nu_j)^2 I turns
into the complex multiplier R(i k nu_j) in energy coordinates.  Parabolic
families use the real multiplier R(k a_j).
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from ._geom import geom_sum
from .errors import SingularStep
from .models import GaussianLaw, ModelSpec
from .spectral_core import EigenBasis

PRESETS = {
    "backward_euler": ((1.0,), (1.0, 1.0)),
    "crank_nicolson": ((1.0, -0.5), (1.0, 0.5)),
}

ORDER_FIT_POINTS = 40
ORDER_SLOPE_SLACK = 0.05
STABILITY_GRID = 2000
STABILITY_TOL = 1e-12


@dataclass(frozen=True)
class RationalScheme:
    """Rational function R with verified order and I-stability flag.

    Coefficient lists are in ascending powers.  `order` is the largest p
    whose fitted local slope of |R(iy) - exp(-iy)| reaches p+1 on (0, b];
    `i_stable` records the scan of |R(iy)| over the imaginary axis.
    """

    name: str
    num: tuple
    den: tuple
    order: int
    i_stable: bool
    b: float

    def r_at(self, z):
        """Evaluate R at (an array of) complex arguments."""
        num = npoly.polyval(z, self.num)
        den = npoly.polyval(z, self.den)
        bad = np.abs(den) < 1e-14 * (1.0 + np.abs(num))
        if np.any(bad):
            raise SingularStep("rational step denominator vanishes")
        return num / den


def _degree(coeffs):
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    return len(c) - 1


def _fit_order(num, den, b):
    y = np.logspace(-3, np.log10(b), ORDER_FIT_POINTS)
    rv = npoly.polyval(1j * y, num) / npoly.polyval(1j * y, den)
    d = np.abs(rv - np.exp(-1j * y))
    keep = d > 1e-15
    if keep.sum() < 4:
        return 99  # numerically indistinguishable from the exponential
    slope = np.polyfit(np.log(y[keep]), np.log(d[keep]), 1)[0]
    return max(int(np.floor(slope - 1 + ORDER_SLOPE_SLACK)), 0)


def _scan_i_stable(num, den):
    y = np.logspace(-6, 6, STABILITY_GRID)
    mod = np.abs(npoly.polyval(1j * y, num) / npoly.polyval(1j * y, den))
    if np.any(mod > 1.0 + STABILITY_TOL):
        return False
    dn, dd = _degree(num), _degree(den)
    if dn > dd:
        return False
    if dn == dd:
        lead = abs(np.trim_zeros(num, "b")[-1] / np.trim_zeros(den, "b")[-1])
        if lead > 1.0 + STABILITY_TOL:
            return False
    return True


def make_scheme(preset_or_num, den=None, b: float = 1.0, name=None) -> RationalScheme:
    """Build and verify a scheme from a preset name or coefficient lists.

    Construction succeeds for non-I-stable rational functions (the flag is
    recorded and steppers refuse them later).  A denominator root on the
    imaginary axis is rejected outright.
    """
    if isinstance(preset_or_num, str):
        if preset_or_num not in PRESETS:
            raise ValueError(f"unknown preset {preset_or_num!r}")
        num, den = PRESETS[preset_or_num]
        name = preset_or_num
    else:
        if den is None:
            raise ValueError("custom schemes need numerator and denominator")
        num = tuple(float(c) for c in preset_or_num)
        den = tuple(float(c) for c in den)
        name = name or "custom"
    if b <= 0:
        raise ValueError("b must be positive")
    if abs(num[0] / den[0] - 1.0) > 1e-14:
        raise ValueError("R(0) must equal 1")
    roots = npoly.polyroots(den)
    if len(roots) and np.any(np.abs(roots.real) <= 1e-9 * (1.0 + np.abs(roots))):
        raise ValueError("denominator has a zero on the imaginary axis")
    y = np.logspace(-6, 6, 64)
    if np.any(np.abs(npoly.polyval(1j * y, den)) < 1e-12):
        raise ValueError("denominator nearly vanishes on the imaginary axis")
    return RationalScheme(name=name, num=tuple(num), den=tuple(den),
                          order=_fit_order(num, den, b),
                          i_stable=_scan_i_stable(num, den), b=float(b))


def _require_stable(scheme: RationalScheme):
    if not scheme.i_stable:
        raise ValueError(f"scheme {scheme.name!r} is not I-stable")


def wave_multipliers(scheme: RationalScheme, k: float, basis: EigenBasis):
    """Complex per-mode multipliers R(i k nu_j) in energy coordinates."""
    return scheme.r_at(1j * k * basis.nus)


def mode_step_wave(scheme: RationalScheme, k: float, lam: float) -> np.ndarray:
    """Raw 2x2 matrix R(kA_j) for one mode."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    _require_stable(scheme)
    nu = np.sqrt(lam)
    zeta = complex(scheme.r_at(np.array(1j * k * nu)))
    return np.array([[zeta.real, -zeta.imag / nu], [nu * zeta.imag, zeta.real]])


@dataclass(frozen=True)
class DiscreteLawRequest:
    """One fully specified discretization run: model, scheme, k, N, space."""

    model: ModelSpec
    scheme: RationalScheme
    k: float
    N: int
    space: object = "spectral"   # "spectral" or a fem1d.FemSpace

    def __post_init__(self):
        if self.k <= 0 or self.N < 1:
            raise ValueError("need k > 0 and N >= 1")

    @property
    def T(self):
        return self.k * self.N


def evolve_discrete(req: DiscreteLawRequest, X0, noise) -> np.ndarray:
    """Apply the recursion X^j = R(kA)(X^{j-1} + B dW^j) exactly per mode.

    Returns the raw final state: (2, J) for wave, (J,) for parabolic
    families; FEM requests return coordinates in the discrete eigenframe.
    """
    _require_stable(req.scheme)
    model = req.model
    if noise.increments.shape != (model.basis.J, req.N):
        raise ValueError("noise shape does not match (J, N)")
    if abs(noise.k - req.k) > 1e-12 * req.k:
        raise ValueError("noise step size does not match the request")
    dW = noise.increments
    if req.space == "spectral":
        if model.family == "wave":
            nu = model.basis.nus
            zeta = wave_multipliers(req.scheme, req.k, model.basis)
            u = np.asarray(X0[0], dtype=float) + 1j * np.asarray(X0[1], dtype=float) / nu
            for n in range(req.N):
                u = zeta * (u + 1j * dW[:, n] / nu)
            return np.vstack([u.real, nu * u.imag])
        r = req.scheme.r_at(np.asarray(req.k * model.generator, dtype=complex)).real
        x = np.asarray(X0, dtype=float).copy()
        for n in range(req.N):
            x = r * (x + dW[:, n])
        return x
    from . import fem1d
    return fem1d.evolve_fem(req.space, req, X0, noise)


def discrete_law(req: DiscreteLawRequest, X0=None) -> GaussianLaw:
    """Exact Gaussian law of X^N, accumulated in closed form.

    The covariance sum over steps is a geometric series in the per-mode
    multipliers; it is evaluated by binary doubling, never by simulation.
    """
    _require_stable(req.scheme)
    model = req.model
    if not model.Q.is_diagonal:
        raise ValueError("discrete_law supports diagonal Q only")
    if req.space != "spectral":
        from . import fem1d
        return fem1d.fully_discrete_law(req.space, req.scheme, req.k, req.N, model, X0=X0)[0]
    q = model.Q.weights_on(model.basis)
    k, N = req.k, req.N
    if model.family == "wave":
        nu = model.basis.nus
        lam = model.basis.lambdas
        zeta = wave_multipliers(req.scheme, k, model.basis)
        if X0 is None:
            u0 = model.x0_complex()
        else:
            X0 = np.asarray(X0, dtype=float)
            u0 = X0[0] + 1j * X0[1] / nu
        mu = zeta ** N * u0
        P = (k * q / lam) * geom_sum(np.abs(zeta) ** 2, N).real
        S = -(k * q / lam) * geom_sum(zeta ** 2, N)
        return GaussianLaw(kind="wave", frame="spectral", nus=nu, mu=mu, P=P, S=S)
    a = model.generator
    r = req.scheme.r_at(np.asarray(k * a, dtype=complex)).real
    x0 = model.X0 if X0 is None else np.asarray(X0, dtype=float)
    mean = r ** N * x0
    var = k * q * geom_sum(r ** 2, N)
    return GaussianLaw(kind="scalar", frame="spectral", nus=None, mu=None,
                       mean=mean, var=var)


def interpolated_error_sup(scheme: RationalScheme, k: float, basis: EigenBasis,
                           alpha: float, T: float, sample_mode: str = "sup",
                           subsamples: int = 16, chunk: int = 128) -> float:
    """sup_t of the B(H^alpha, H) norm of the interpolant error.

    tilde E_k is piecewise constant, equal to R(kA)^j on ((j-1)k, jk];
    per mode the norm of the difference block is |zeta^j - exp(-i nu t)|
    weighted by lambda^(-alpha/2).  sample_mode "grid" evaluates only at
    t = jk; "sup" refines each step by `subsamples` points.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if sample_mode not in ("sup", "grid"):
        raise ValueError("sample_mode must be 'sup' or 'grid'")
    N = int(round(T / k))
    if N < 1 or abs(N * k - T) > 1e-10 * T:
        raise ValueError("T must be an integer multiple of k")
    nu = basis.nus
    wt = basis.lambdas ** (-alpha / 2.0)
    zeta = wave_multipliers(scheme, k, basis)
    nsub = subsamples if sample_mode == "sup" else 1
    frac = np.arange(1, nsub + 1) / nsub
    rot_sub = np.exp(1j * np.outer(nu, k * frac))          # (J, nsub)
    best = 0.0
    for m0 in range(1, N + 1, chunk):
        ms = np.arange(m0, min(m0 + chunk, N + 1))
        zm = zeta[:, None] ** ms[None, :]                  # (J, |chunk|)
        base = zm * np.exp(1j * np.outer(nu, (ms - 1) * k))
        # |zm|^2 + 1 - 2 Re(zm e^{i nu t}) over the sub-grid
        re = (base[:, :, None] * rot_sub[:, None, :]).real
        d2 = np.abs(zm)[:, :, None] ** 2 + 1.0 - 2.0 * re
        val = np.sqrt(np.maximum(d2, 0.0)) * wt[:, None, None]
        best = max(best, float(val.max()))
    return best


def stability_sup(scheme: RationalScheme, k: float, basis: EigenBasis, N: int) -> float:
    """K1: max over n <= N and modes of the energy-norm of R(kA)^n."""
    _require_stable(scheme)
    if N < 0:
        raise ValueError("N must be nonnegative")
    if N == 0:
        return 1.0
    mods = np.abs(wave_multipliers(scheme, k, basis))
    # |zeta|^n is monotone in n per mode, so the extremes suffice
    return float(max(np.max(mods), np.max(mods ** N)))
