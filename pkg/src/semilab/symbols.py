"""Phase-space symbols, weights and proof constants.

Everything here is a plain function of points X = (x, xi).  Batch
evaluators take ``x`` and ``xi`` of shape (M, n) and return shape (M,)
(or (M, 2n) for gradients); the thin ``*_at`` wrappers accept a single
PhasePoint.  The symbols:

  p       = |xi - A|^2 + V
  q       = |xi - chi_{2R} A|^2 + V        (magnetic part cut off at high frequency)
  lambda_p = Re p + 2|V2'|^2,  lambda_q = Re q + 2|V2'|^2
  F       = chi_R + (1 - chi_R) (q - z)/(p - z)
  G, g    = the bounded multiplier weight built from H_{Im p} Re p
  Psi     = psi(B lambda_q(sqrt(h) X) / y)

plus the derived constants: the truncation radius R, the weight amplitude
epsilon, the additive constant C2, the measured inequality constant C1 and
the dyadic C0 fixing B = 1/(4 C0 C1)^3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cutoffs import CutoffProfile, chi_profile, psi_profile
from .models import PotentialModel

R_MAX_EXP = 20
C0_MIN_EXP = 20
F_DENOM_FLOOR = 1e-12


class SymbolError(ValueError):
    pass


@dataclass(frozen=True)
class PhasePoint:
    """A point X = (x, xi) in phase space; components are length-n tuples."""

    x: tuple
    xi: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        xi = tuple(float(v) for v in np.atleast_1d(self.xi))
        if len(x) != len(xi):
            raise SymbolError("x and xi must have the same dimension")
        if not all(np.isfinite(x + xi)):
            raise SymbolError("phase point has non-finite components")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)

    @property
    def n(self) -> int:
        return len(self.x)

    def arrays(self):
        return np.array([self.x]), np.array([self.xi])


@dataclass(frozen=True)
class WeightParams:
    """Calibrated weight data: amplitude epsilon, truncation radius R and
    the additive constant C2; h is carried alongside when a specific value
    is in play."""

    epsilon: float
    R: float
    C2: float
    h: float | None = None


@dataclass(frozen=True)
class ProofConstants:
    """The constants appearing in the region and the endpoint bound."""

    C0: float
    C1: float
    K: float = 2.0
    M: float = 2.0
    T: float = 0.0
    y: float | None = None

    def __post_init__(self):
        if not 0.0 < self.C0 <= 1.0:
            raise SymbolError("C0 must lie in (0, 1]")
        if self.K <= 1.0 or self.M < 2.0 or self.T < 0.0:
            raise SymbolError("need K > 1, M >= 2, T >= 0")

    @property
    def B(self) -> float:
        return 1.0 / (4.0 * self.C0 * self.C1) ** 3


def bracket(x):
    """<x> = (1 + |x|^2)^(1/2) for points of shape (..., n)."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + np.sum(x * x, axis=-1))


# ---------------------------------------------------------------------------
# cutoff in phase space


def eval_chi_t(x, xi, t: float, profile: CutoffProfile | None = None):
    """chi_t(X) = chi(|xi| / (t <x>))."""
    if t <= 0:
        raise SymbolError("t must be positive")
    profile = profile or chi_profile()
    xi = np.asarray(xi, dtype=float)
    rho = np.sqrt(np.sum(xi * xi, axis=-1)) / (t * bracket(x))
    return profile.value(rho)


def _chi_t_grad_hess(x, xi, t: float, profile: CutoffProfile):
    """Gradient (M, 2n) and Hessian (M, 2n, 2n) of chi_t, exact.

    The radial argument rho = |xi|/(t<x>) is singular at xi = 0, but that
    point lies deep inside the plateau where all profile derivatives
    vanish, so the singular factors are masked out.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    M, n = x.shape
    br = bracket(x)
    nxi = np.sqrt(np.sum(xi * xi, axis=-1))
    rho = nxi / (t * br)
    d1 = profile.deriv(rho, 1)
    d2 = profile.deriv(rho, 2)
    live = (d1 != 0.0) | (d2 != 0.0)

    grad = np.zeros((M, 2 * n))
    hess = np.zeros((M, 2 * n, 2 * n))
    if not np.any(live):
        return grad, hess

    xl = x[live]
    xil = xi[live]
    brl = br[live]
    nl = nxi[live]
    rl = rho[live]
    # gradient of rho
    gr = np.zeros((len(xl), 2 * n))
    gr[:, :n] = -rl[:, None] * xl / (brl * brl)[:, None]
    gr[:, n:] = xil / (nl * t * brl)[:, None]
    # Hessian of rho
    hr = np.zeros((len(xl), 2 * n, 2 * n))
    eye = np.eye(n)
    hr[:, :n, :n] = rl[:, None, None] * (
        3.0 * xl[:, :, None] * xl[:, None, :] / (brl ** 4)[:, None, None]
        - eye[None, :, :] / (brl * brl)[:, None, None])
    hr[:, n:, n:] = (eye[None, :, :] - (xil / nl[:, None])[:, :, None]
                     * (xil / nl[:, None])[:, None, :]) / (t * brl * nl)[:, None, None]
    cross = -xil[:, :, None] * xl[:, None, :] / (t * nl)[:, None, None] \
        / (brl ** 3)[:, None, None]
    hr[:, n:, :n] = cross
    hr[:, :n, n:] = np.swapaxes(cross, 1, 2)

    grad[live] = profile.deriv(rl, 1)[:, None] * gr
    hess[live] = (profile.deriv(rl, 2)[:, None, None] * gr[:, :, None] * gr[:, None, :]
                  + profile.deriv(rl, 1)[:, None, None] * hr)
    return grad, hess


# ---------------------------------------------------------------------------
# p, q, lambda


def eval_p(model: PotentialModel, x, xi):
    """p(X) = |xi - A(x)|^2 + V(x)."""
    a = model.a.value(x)
    xi = np.asarray(xi, dtype=float)
    kin = np.sum((xi - a) ** 2, axis=-1)
    return kin + model.potential(x)


def eval_q(model: PotentialModel, x, xi, R: float, profile: CutoffProfile | None = None):
    """q(X) = |xi - chi_{2R}(X) A(x)|^2 + V(x)."""
    c = eval_chi_t(x, xi, 2.0 * R, profile)
    a = model.a.value(x)
    xi = np.asarray(xi, dtype=float)
    kin = np.sum((xi - np.asarray(c)[..., None] * a) ** 2, axis=-1)
    return kin + model.potential(x)


def eval_lambda(model: PotentialModel, x, xi, variant: str = "p",
                R: float | None = None, profile: CutoffProfile | None = None):
    """lambda_p or lambda_q = Re(p or q) + 2 |V2'|^2 (nonnegative)."""
    if variant == "p":
        re = np.real(eval_p(model, x, xi)) - 0.0
    elif variant == "q":
        if R is None:
            raise SymbolError("lambda_q needs the truncation radius R")
        re = np.real(eval_q(model, x, xi, R, profile))
    else:
        raise SymbolError("variant must be 'p' or 'q'")
    return re + 2.0 * model.v2_grad_sq(x)


def re_p_grad(model: PotentialModel, x, xi):
    """Gradient of Re p, shape (M, 2n): x-block then xi-block."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    a = model.a.value(x)
    jac = model.a.jacobian(x)
    w = xi - a
    M, n = x.shape
    out = np.empty((M, 2 * n))
    out[:, :n] = model.v1.gradient(x) - 2.0 * np.einsum("mk,mki->mi", w, jac)
    out[:, n:] = 2.0 * w
    return out


def lambda_p_grad(model: PotentialModel, x, xi):
    """Gradient of lambda_p = Re p + 2|V2'|^2."""
    x = np.asarray(x, dtype=float)
    out = re_p_grad(model, x, xi)
    g2 = model.v2.gradient(x)
    h2 = model.v2.hessian(x)
    n = x.shape[1]
    out[:, :n] += 4.0 * np.einsum("mk,mki->mi", g2, h2)
    return out


def q_parts_grad_hess(model: PotentialModel, x, xi, R: float,
                      profile: CutoffProfile | None = None):
    """Value, gradient and Hessian of Re q, plus Im q derivatives.

    Returns (re, grad_re (M,2n), hess_re (M,2n,2n), im, grad_im, hess_im).
    Assembled by exact product/chain rule through c = chi_{2R}.
    """
    profile = profile or chi_profile()
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    M, n = x.shape
    c = np.asarray(eval_chi_t(x, xi, 2.0 * R, profile))
    gc, hc = _chi_t_grad_hess(x, xi, 2.0 * R, profile)

    a = model.a.value(x)
    jac = model.a.jacobian(x)          # (M, k, i)
    ahess = model.a.hessian(x)         # (M, k, i, j)

    # u = xi . A(x)
    u = np.sum(xi * a, axis=-1)
    gu = np.zeros((M, 2 * n))
    gu[:, :n] = np.einsum("mk,mki->mi", xi, jac)
    gu[:, n:] = a
    hu = np.zeros((M, 2 * n, 2 * n))
    hu[:, :n, :n] = np.einsum("mk,mkij->mij", xi, ahess)
    hu[:, n:, :n] = jac
    hu[:, :n, n:] = np.swapaxes(jac, 1, 2)

    # w = |A(x)|^2
    w = np.sum(a * a, axis=-1)
    gw = np.zeros((M, 2 * n))
    gw[:, :n] = 2.0 * np.einsum("mk,mki->mi", a, jac)
    hw = np.zeros((M, 2 * n, 2 * n))
    hw[:, :n, :n] = 2.0 * (np.einsum("mki,mkj->mij", jac, jac)
                           + np.einsum("mk,mkij->mij", a, ahess))

    def outer(p, q):
        return p[:, :, None] * q[:, None, :]

    # Re q = |xi|^2 - 2 c u + c^2 w + V1
    re = np.sum(xi * xi, axis=-1) - 2.0 * c * u + c * c * w + model.v1.value(x)
    g = np.zeros((M, 2 * n))
    g[:, n:] = 2.0 * xi
    g[:, :n] += model.v1.gradient(x)
    g += -2.0 * (c[:, None] * gu + u[:, None] * gc)
    gb = 2.0 * c[:, None] * gc          # gradient of c^2
    g += c[:, None] ** 2 * gw + w[:, None] * gb

    h = np.zeros((M, 2 * n, 2 * n))
    h[:, n:, n:] = 2.0 * np.eye(n)[None, :, :]
    h[:, :n, :n] += model.v1.hessian(x)
    h += -2.0 * (c[:, None, None] * hu + outer(gc, gu) + outer(gu, gc)
                 + u[:, None, None] * hc)
    hb = 2.0 * (outer(gc, gc) + c[:, None, None] * hc)   # Hessian of c^2
    h += (c[:, None, None] ** 2 * hw + outer(gb, gw) + outer(gw, gb)
          + w[:, None, None] * hb)

    im = model.v2.value(x)
    gim = np.zeros((M, 2 * n))
    gim[:, :n] = model.v2.gradient(x)
    him = np.zeros((M, 2 * n, 2 * n))
    him[:, :n, :n] = model.v2.hessian(x)
    return re, g, h, im, gim, him


def q_hessian(model: PotentialModel, x, xi, R: float,
              profile: CutoffProfile | None = None):
    """Complex Hessian of q, shape (M, 2n, 2n)."""
    _, _, hre, _, _, him = q_parts_grad_hess(model, x, xi, R, profile)
    return hre + 1j * him


# ---------------------------------------------------------------------------
# R and F


def choose_R(model: PotentialModel, sample=None) -> float:
    """Smallest dyadic R with |A|^2, |V| <= (R^2/16) <x>^2 on the sample,
    doubled as a safety factor."""
    from .models import default_sample
    if sample is None:
        sample = default_sample(model.n)
    pts = np.asarray(sample, dtype=float)
    br2 = 1.0 + np.sum(pts * pts, axis=-1)
    a = model.a.value(pts)
    need = np.maximum(np.sum(a * a, axis=-1), np.abs(model.potential(pts))) / br2
    worst = float(np.max(need))
    for k in range(R_MAX_EXP + 1):
        r = 2.0 ** k
        # tolerate last-bit rounding in the sampled ratios
        if r * r / 16.0 >= worst * (1.0 - 1e-12):
            return 2.0 * r
    raise SymbolError(
        f"no R <= 2^{R_MAX_EXP} bounds |A|^2, |V| by (R^2/16)<x>^2 "
        f"(needed R^2/16 >= {worst:.3e}); the model violates the growth hypotheses")


def eval_F(model: PotentialModel, x, xi, z: complex, R: float,
           profile: CutoffProfile | None = None):
    """F = chi_R + (1 - chi_R) (q - z)/(p - z), with the quotient taken only
    off the plateau where |p - z| is elliptic."""
    if np.real(z) > np.abs(np.imag(z)):
        raise SymbolError("F requires Re z <= |Im z|")
    profile = profile or chi_profile()
    c = np.asarray(eval_chi_t(x, xi, R, profile), dtype=float)
    out = np.ones(c.shape, dtype=complex)
    off = c < 1.0
    if np.any(off):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        p = eval_p(model, x[off], xi[off])
        q = eval_q(model, x[off], xi[off], R, profile)
        den = p - z
        if np.any(np.abs(den) < F_DENOM_FLOOR):
            raise SymbolError(
                "p - z nearly vanishes off the chi_R plateau; the model/R pair "
                "violates the ellipticity this quotient relies on")
        out[off] = c[off] + (1.0 - c[off]) * (q - z) / den
    return out


# ---------------------------------------------------------------------------
# Hamilton derivatives and the weight g


def hamilton_im_re(model: PotentialModel, x, xi):
    """H_{Im p} Re p = -2 V2'(x) . (xi - A(x))."""
    xi = np.asarray(xi, dtype=float)
    return -2.0 * np.sum(model.v2.gradient(x) * (xi - model.a.value(x)), axis=-1)


def eval_G(model: PotentialModel, x, xi, h: float, epsilon: float,
           profile: CutoffProfile | None = None):
    """The weight seed, defined only where lambda_p >= h:

        G = eps h^(-1/3) (H_{Im p} Re p) / lambda_p^(2/3)
            * psi(Re p / (h^(2/3) lambda_p^(1/3)))
    """
    if not 0.0 < h <= 1.0:
        raise SymbolError("h must lie in (0, 1]")
    profile = profile or psi_profile()
    lam = eval_lambda(model, x, xi, "p")
    if np.any(lam < h):
        raise SymbolError("eval_G outside its domain: lambda_p < h at a requested point")
    re = np.real(eval_p(model, x, xi))
    arg = re / (h ** (2.0 / 3.0) * lam ** (1.0 / 3.0))
    return (epsilon * h ** (-1.0 / 3.0) * hamilton_im_re(model, x, xi)
            / lam ** (2.0 / 3.0) * profile.value(arg))


def eval_g(model: PotentialModel, x, xi, h: float, epsilon: float,
           profile: CutoffProfile | None = None):
    """g = (1 - psi(lambda_p / 2h)) G, extended by zero where lambda_p <= h."""
    if not 0.0 < h <= 1.0:
        raise SymbolError("h must lie in (0, 1]")
    profile = profile or psi_profile()
    lam = np.asarray(eval_lambda(model, x, xi, "p"))
    fac = 1.0 - profile.value(lam / (2.0 * h))
    out = np.zeros(lam.shape)
    live = fac > 0.0          # implies lambda_p > h, so G is defined there
    if np.any(live):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        out[live] = fac[live] * eval_G(model, x[live], xi[live], h, epsilon, profile)
    return out


def hamilton_v2_g(model: PotentialModel, x, xi, h: float, epsilon: float,
                  profile: CutoffProfile | None = None, step_rel: float = 1e-3):
    """H_{V2} g = -V2'(x) . d_xi g, with d_xi g by centered differences.

    The xi-step follows the local scale of g, which varies on sqrt(h)
    near the support boundary of the outer cutoff.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    g2 = model.v2.gradient(x)
    out = np.zeros(x.shape[:-1])
    for i in range(x.shape[1]):
        step = step_rel * np.sqrt(h) * (1.0 + np.abs(xi[:, i]))
        xp = xi.copy()
        xp[:, i] += step
        xm = xi.copy()
        xm[:, i] -= step
        dgi = (eval_g(model, x, xp, h, epsilon, profile)
               - eval_g(model, x, xm, h, epsilon, profile)) / (2.0 * step)
        out -= g2[:, i] * dgi
    return out


def eval_Psi(model: PotentialModel, x, xi, h: float, y: float, B: float,
             R: float, profile: CutoffProfile | None = None,
             chi_prof: CutoffProfile | None = None):
    """Psi(X) = psi(B lambda_q(sqrt(h) X) / y)."""
    if y <= 0 or B <= 0:
        raise SymbolError("need y > 0 and B > 0")
    profile = profile or psi_profile()
    s = np.sqrt(h)
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    lam = eval_lambda(model, s * x, s * xi, "q", R, chi_prof)
    return profile.value(B * lam / y)


# ---------------------------------------------------------------------------
# generic symbol wrapper


class SymbolField:
    """A scalar phase-space function with optional analytic derivatives.

    ``fn(x, xi)`` must broadcast over points of shape (..., n).  When
    ``deriv_fn(x, xi, alpha)`` is provided it covers multi-indices over the
    2n phase variables (x-block first) up to ``analytic_order``.
    """

    def __init__(self, n, fn, name="", deriv_fn=None, analytic_order=0):
        self.n = n
        self.name = name
        self._fn = fn
        self._deriv_fn = deriv_fn
        self.analytic_order = analytic_order if deriv_fn is not None else 0

    def __call__(self, x, xi):
        return self._fn(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))

    def deriv(self, x, xi, alpha):
        alpha = tuple(alpha)
        if sum(alpha) == 0:
            return self(x, xi)
        if self._deriv_fn is None or sum(alpha) > self.analytic_order:
            raise SymbolError(
                f"symbol {self.name!r} has no analytic derivative of order {sum(alpha)}")
        return self._deriv_fn(np.asarray(x, dtype=float), np.asarray(xi, dtype=float), alpha)

    def at(self, X: PhasePoint):
        x, xi = X.arrays()
        return complex(np.asarray(self(x, xi)).ravel()[0])


def _grad_to_deriv(grad_fn):
    def deriv(x, xi, alpha):
        i = next(i for i, a in enumerate(alpha) if a > 0)
        return grad_fn(x, xi)[:, i]
    return deriv


def p_symbol(model: PotentialModel) -> SymbolField:
    return SymbolField(model.n, lambda x, xi: eval_p(model, x, xi), f"p[{model.name}]")


def re_p_symbol(model: PotentialModel) -> SymbolField:
    return SymbolField(model.n, lambda x, xi: np.real(eval_p(model, x, xi)),
                       f"re_p[{model.name}]",
                       deriv_fn=_grad_to_deriv(lambda x, xi: re_p_grad(model, x, xi)),
                       analytic_order=1)


def im_p_symbol(model: PotentialModel) -> SymbolField:
    def grad(x, xi):
        M, n = np.asarray(x).shape
        out = np.zeros((M, 2 * n))
        out[:, :n] = model.v2.gradient(x)
        return out
    return SymbolField(model.n, lambda x, xi: model.v2.value(x) + 0.0 * np.sum(xi, axis=-1),
                       f"im_p[{model.name}]", deriv_fn=_grad_to_deriv(grad),
                       analytic_order=1)


def hamilton_im_re_symbol(model: PotentialModel) -> SymbolField:
    """H_{Im p} Re p as a symbol with analytic first derivatives."""
    def grad(x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        M, n = x.shape
        w = xi - model.a.value(x)
        g2 = model.v2.gradient(x)
        h2 = model.v2.hessian(x)
        jac = model.a.jacobian(x)
        out = np.zeros((M, 2 * n))
        out[:, :n] = -2.0 * (np.einsum("mik,mk->mi", h2, w)
                             - np.einsum("mk,mki->mi", g2, jac))
        out[:, n:] = -2.0 * g2
        return out
    return SymbolField(model.n, lambda x, xi: hamilton_im_re(model, x, xi),
                       f"H_im_re[{model.name}]", deriv_fn=_grad_to_deriv(grad),
                       analytic_order=1)


def q_symbol(model: PotentialModel, R: float, profile=None) -> SymbolField:
    return SymbolField(model.n, lambda x, xi: eval_q(model, x, xi, R, profile),
                       f"q[{model.name},R={R:g}]")


def f_symbol(model: PotentialModel, R: float, z: complex, profile=None) -> SymbolField:
    return SymbolField(model.n, lambda x, xi: eval_F(model, x, xi, z, R, profile),
                       f"F[{model.name},z={z:g}]")


def g_symbol(model: PotentialModel, h: float, epsilon: float, profile=None) -> SymbolField:
    return SymbolField(model.n, lambda x, xi: eval_g(model, x, xi, h, epsilon, profile),
                       f"g[{model.name},h={h:g}]")


def psi_weight_symbol(model: PotentialModel, h: float, y: float, B: float, R: float,
                      profile=None, chi_prof=None) -> SymbolField:
    return SymbolField(model.n,
                       lambda x, xi: eval_Psi(model, x, xi, h, y, B, R, profile, chi_prof),
                       f"Psi[{model.name},h={h:g},y={y:g}]")


def q_hessian_entry_symbols(model: PotentialModel, R: float, profile=None):
    """The 2n x 2n entries of q'' as complex symbols (upper triangle)."""
    out = []
    for i in range(2 * model.n):
        for j in range(i, 2 * model.n):
            def fn(x, xi, i=i, j=j):
                return q_hessian(model, x, xi, R, profile)[:, i, j]
            out.append(SymbolField(model.n, fn, f"q''[{model.name}][{i}{j}]"))
    return out


def hamilton_derivative(f: SymbolField, u: SymbolField, X: PhasePoint) -> float:
    """H_f u = d_xi f . d_x u - d_x f . d_xi u at X (analytic order-1 required)."""
    x, xi = X.arrays()
    n = X.n
    total = 0.0
    for i in range(n):
        ex = tuple(1 if k == i else 0 for k in range(2 * n))
        exi = tuple(1 if k == n + i else 0 for k in range(2 * n))
        total += float(np.real(f.deriv(x, xi, exi)[0] * u.deriv(x, xi, ex)[0]
                               - f.deriv(x, xi, ex)[0] * u.deriv(x, xi, exi)[0]))
    return total


# single-point conveniences ------------------------------------------------


def _point(model, X: PhasePoint):
    if X.n != model.n:
        raise SymbolError(f"model is {model.n}-dimensional, point is {X.n}-dimensional")
    return X.arrays()


def p_at(model, X: PhasePoint) -> complex:
    x, xi = _point(model, X)
    return complex(eval_p(model, x, xi)[0])


def q_at(model, X: PhasePoint, R: float, profile=None) -> complex:
    x, xi = _point(model, X)
    return complex(eval_q(model, x, xi, R, profile)[0])


def lambda_at(model, X: PhasePoint, variant="p", R=None, profile=None) -> float:
    x, xi = _point(model, X)
    return float(eval_lambda(model, x, xi, variant, R, profile)[0])


def F_at(model, X: PhasePoint, z, R, profile=None) -> complex:
    x, xi = _point(model, X)
    return complex(eval_F(model, x, xi, z, R, profile)[0])


def chi_t_at(X: PhasePoint, t, profile=None) -> float:
    x, xi = X.arrays()
    return float(np.asarray(eval_chi_t(x, xi, t, profile)).ravel()[0])


def G_at(model, X: PhasePoint, h, epsilon, profile=None) -> float:
    x, xi = _point(model, X)
    return float(eval_G(model, x, xi, h, epsilon, profile)[0])


def g_at(model, X: PhasePoint, h, epsilon, profile=None) -> float:
    x, xi = _point(model, X)
    return float(eval_g(model, x, xi, h, epsilon, profile)[0])


def Psi_at(model, X: PhasePoint, h, y, B, R, profile=None, chi_prof=None) -> float:
    x, xi = _point(model, X)
    return float(eval_Psi(model, x, xi, h, y, B, R, profile, chi_prof)[0])


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class CalibratedConstants:
    weight: WeightParams
    proof: ProofConstants
    profile_step: str
    gmax_unit: float          # max |g| at epsilon = 1 over the scan
    weight_floor: float       # the min-ratio the epsilon scan achieved


def _weight_min_ratio(model, x, xi, h_list, epsilon, C2, R, profile, chi_prof):
    """min over h and grid of the audited weight quotient, both variants."""
    worst = np.inf
    lam_p = eval_lambda(model, x, xi, "p")
    re_pv = np.real(eval_p(model, x, xi))
    lam_q = eval_lambda(model, x, xi, "q", R, chi_prof)
    re_qv = np.real(eval_q(model, x, xi, R, chi_prof))
    for h in h_list:
        ham = hamilton_v2_g(model, x, xi, h, epsilon, profile)
        for re, lam in ((re_qv, lam_q), (re_pv, lam_p)):
            live = lam > 0.0
            ratio = (re[live] + h * ham[live] + C2 * h) \
                / (h ** (2.0 / 3.0) * lam[live] ** (1.0 / 3.0))
            worst = min(worst, float(np.min(ratio)))
    return worst


def calibrate_constants(model: PotentialModel, h_list, grid_x, grid_xi,
                        profile: CutoffProfile | None = None,
                        chi_prof: CutoffProfile | None = None,
                        K: float = 2.0, M: float = 2.0,
                        weight_floor: float = 0.1,
                        R: float | None = None) -> CalibratedConstants:
    """Fix (epsilon, C2, C1, C0) on the given phase grid.

    epsilon starts from the |g| <= 1 ceiling and is then lowered along a
    geometric ladder until the weight quotient clears ``weight_floor`` (the
    transition zone of the cutoff contributes -eps |psi'| terms, so the
    bounded-multiplier ceiling alone is not sufficient); the scan keeps the
    largest epsilon that maximizes the audited minimum.
    """
    profile = profile or psi_profile()
    chi_prof = chi_prof or chi_profile()
    x = np.asarray(grid_x, dtype=float)
    xi = np.asarray(grid_xi, dtype=float)
    h_list = list(h_list)
    if not h_list:
        raise SymbolError("calibration needs at least one h")
    if R is None:
        R = choose_R(model)

    gmax = max(float(np.max(np.abs(eval_g(model, x, xi, h, 1.0, profile))))
               for h in h_list)
    eps0 = min(1.0, 1.0 / (2.0 * gmax)) if gmax > 0 else 1.0

    # C2 first, with the epsilon ceiling: it only needs to dominate the
    # negative part of the Hamilton term at small lambda
    C2 = 1.0
    best_eps, best_ratio = eps0, -np.inf
    for k in range(25):
        eps = eps0 * 2.0 ** (-k / 4.0)
        ratio = _weight_min_ratio(model, x, xi, h_list, eps, C2, R, profile, chi_prof)
        if ratio > best_ratio:
            best_eps, best_ratio = eps, ratio
        if best_ratio >= weight_floor and ratio < best_ratio:
            break
    epsilon = best_eps

    # C1: the measured constant of the weight inequality (its reciprocal
    # min-ratio), uniform over the h scan
    min_ratio = _weight_min_ratio(model, x, xi, h_list, epsilon, C2, R, profile, chi_prof)
    if min_ratio <= 0:
        raise SymbolError(
            f"weight inequality fails on the calibration grid (min ratio {min_ratio:.3e})")
    C1 = 1.0 / min_ratio

    # C0: largest dyadic value making |q| - T <= B lambda_q / 2 on the grid
    lam_q = eval_lambda(model, x, xi, "q", R, chi_prof)
    qv = np.abs(eval_q(model, x, xi, R, chi_prof)) - model.T
    degenerate = lam_q <= 1e-300
    if np.any(qv[degenerate] > 1e-12):
        raise SymbolError("|q| > T at a point with lambda_q = 0; no C0 can work")
    live = ~degenerate
    rho = float(np.max(qv[live] / lam_q[live])) if np.any(live) else 0.0
    c0 = None
    for k in range(C0_MIN_EXP + 1):
        cand = 2.0 ** (-k)
        B = 1.0 / (4.0 * cand * C1) ** 3
        if B / 2.0 >= rho:
            c0 = cand
            break
    if c0 is None:
        raise SymbolError(f"no C0 >= 2^-{C0_MIN_EXP} satisfies |q|-T <= B lambda_q/2")

    return CalibratedConstants(
        weight=WeightParams(epsilon=epsilon, R=R, C2=C2),
        proof=ProofConstants(C0=c0, C1=C1, K=K, M=M, T=model.T),
        profile_step=profile.name,
        gmax_unit=gmax,
        weight_floor=min_ratio,
    )
