"""Closed-form phase-space symbols for the quantization batteries.

Each battery symbol carries its exact supremum, an exact Hessian (the
three distinct entries, vectorized) and a supremum bound for the Hessian,
so the Wick identity checks pin their tolerances without estimating
anything from samples.  Symbols whose Hessian entries factor as
fx(x) fxi(xi) also expose ``hessian_factors``, which lets the remainder
quadrature collapse to matrix products.
"""

from __future__ import annotations

import numpy as np


class BatterySymbol:
    """Scalar symbol a(x, xi) with value, Hessian entries and metadata."""

    def __init__(self, name, fn, hessian_entries, sup_value, sup_hess,
                 nonnegative=False, is_complex=False, hessian_factors=None):
        self.name = name
        self._fn = fn
        self.hessian_entries = hessian_entries
        self.hessian_factors = hessian_factors
        self.sup_value = float(sup_value)
        self.sup_hess = float(sup_hess)
        self.nonnegative = nonnegative
        self.is_complex = is_complex

    def __call__(self, x, xi):
        return self._fn(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))

    def conjugate(self) -> "BatterySymbol":
        if not self.is_complex:
            return self
        factors = None
        if self.hessian_factors is not None:
            factors = {k: [(lambda t, f=fx: np.conjugate(f(t)),
                            lambda t, f=fxi: np.conjugate(f(t)))
                           for fx, fxi in terms]
                       for k, terms in self.hessian_factors.items()}
        return BatterySymbol(
            f"conj({self.name})",
            lambda x, xi: np.conjugate(self._fn(x, xi)),
            lambda x, xi: tuple(np.conjugate(v) for v in self.hessian_entries(x, xi)),
            self.sup_value, self.sup_hess, self.nonnegative, True, factors)


def gaussian_bump(amp=1.0, x0=0.0, xi0=0.0, ax=1.0, axi=1.0, name=None) -> BatterySymbol:
    """a = amp * exp(-ax (x-x0)^2 - axi (xi-xi0)^2)."""

    ex = lambda x: np.exp(-ax * (x - x0) ** 2)
    exi = lambda xi: np.exp(-axi * (xi - xi0) ** 2)

    def fn(x, xi):
        return amp * ex(x) * exi(xi)

    def hess(x, xi):
        a = fn(x, xi)
        u = x - x0
        v = xi - xi0
        return ((4.0 * ax * ax * u * u - 2.0 * ax) * a,
                4.0 * ax * axi * u * v * a,
                (4.0 * axi * axi * v * v - 2.0 * axi) * a)

    factors = {
        "xx": [(lambda x: amp * (4 * ax * ax * (x - x0) ** 2 - 2 * ax) * ex(x), exi)],
        "xxi": [(lambda x: amp * 2 * ax * (x - x0) * ex(x),
                 lambda xi: 2 * axi * (xi - xi0) * exi(xi))],
        "xixi": [(lambda x: amp * ex(x),
                  lambda xi: (4 * axi * axi * (xi - xi0) ** 2 - 2 * axi) * exi(xi))],
    }
    sup_h = abs(amp) * 4.0 * max(ax, axi) ** 2 * 10.0   # generous closed bound
    return BatterySymbol(name or f"gauss[{amp:g},{x0:g},{xi0:g}]",
                         fn, hess, abs(amp), sup_h, nonnegative=amp > 0,
                         hessian_factors=factors)


def lorentz_bump(amp=1.0, x0=0.0, xi0=0.0, ax=1.0, axi=1.0, name=None) -> BatterySymbol:
    """a = amp / (1 + ax (x-x0)^2 + axi (xi-xi0)^2) (not separable)."""

    def fn(x, xi):
        return amp / (1.0 + ax * (x - x0) ** 2 + axi * (xi - xi0) ** 2)

    def hess(x, xi):
        # written with explicit buffers: the remainder quadrature calls this
        # on large throwaway arrays
        u = np.subtract(x, x0)
        v = np.subtract(xi, xi0)
        u2 = u * u
        v2 = v * v
        inv = 1.0 + ax * u2
        inv += axi * v2
        np.reciprocal(inv, out=inv)
        inv2 = inv * inv
        inv3 = inv2 * inv
        hxx = u2
        hxx *= 8.0 * amp * ax * ax
        hxx *= inv3
        hxx -= (2.0 * amp * ax) * inv2
        hxxi = u
        hxxi = np.multiply(hxxi, v, out=v)
        hxxi *= 8.0 * amp * ax * axi
        hxxi *= inv3
        hxixi = v2
        hxixi *= 8.0 * amp * axi * axi
        hxixi *= inv3
        hxixi -= (2.0 * amp * axi) * inv2
        return hxx, hxxi, hxixi

    sup_h = abs(amp) * 8.0 * max(ax, axi)
    return BatterySymbol(name or f"lorentz[{amp:g},{x0:g},{xi0:g}]",
                         fn, hess, abs(amp), sup_h, nonnegative=amp > 0)


def sine_gauss(k=1.0, width=1.0, xwidth=None, name=None, squared=True) -> BatterySymbol:
    """a = sin^2(kx) (or sin kx) times Gaussians in xi and, optionally, x.

    Without the x-envelope the symbol does not decay spatially, which the
    finite box cannot represent consistently across quantizations; battery
    instances therefore set ``xwidth``.
    """

    e = lambda xi: np.exp(-xi * xi / width)
    e1 = lambda xi: -2.0 * xi / width * e(xi)
    e2 = lambda xi: (4.0 * xi * xi / width ** 2 - 2.0 / width) * e(xi)

    if squared:
        s0 = lambda x: np.sin(k * x) ** 2
        s1 = lambda x: k * np.sin(2.0 * k * x)
        s2 = lambda x: 2.0 * k * k * np.cos(2.0 * k * x)
        tag = f"sin2gauss[k={k:g}]"
        nonneg = True
    else:
        s0 = lambda x: np.sin(k * x)
        s1 = lambda x: k * np.cos(k * x)
        s2 = lambda x: -k * k * np.sin(k * x)
        tag = f"singauss[k={k:g}]"
        nonneg = False

    if xwidth is None:
        g0 = lambda x: np.ones_like(np.asarray(x, dtype=float))
        g1 = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        g2 = g1
    else:
        g0 = lambda x: np.exp(-x * x / xwidth)
        g1 = lambda x: -2.0 * x / xwidth * g0(x)
        g2 = lambda x: (4.0 * x * x / xwidth ** 2 - 2.0 / xwidth) * g0(x)
        tag += f"[xw={xwidth:g}]"

    u0 = lambda x: s0(x) * g0(x)
    u1 = lambda x: s1(x) * g0(x) + s0(x) * g1(x)
    u2 = lambda x: s2(x) * g0(x) + 2.0 * s1(x) * g1(x) + s0(x) * g2(x)

    def fn(x, xi):
        return u0(x) * e(xi)

    def hess(x, xi):
        return u2(x) * e(xi), u1(x) * e1(xi), u0(x) * e2(xi)

    factors = {"xx": [(u2, e)], "xxi": [(u1, e1)], "xixi": [(u0, e2)]}
    sup_h = 4.0 * max(k * k, 1.0 / width + 1.0) \
        + (0.0 if xwidth is None else 4.0 / xwidth + 8.0 * k / xwidth + 1.0)
    return BatterySymbol(name or tag, fn, hess, 1.0, sup_h, nonnegative=nonneg,
                         hessian_factors=factors)


def complex_phase_gauss(k=1.0, name=None) -> BatterySymbol:
    """a = e^{i k x} exp(-(x^2+xi^2)/2), complex-valued (adjoint battery)."""

    gx = lambda x: np.exp(1j * k * x - x * x / 2.0)
    gxi = lambda xi: np.exp(-xi * xi / 2.0)

    def fn(x, xi):
        return gx(x) * gxi(xi)

    def hess(x, xi):
        a = fn(x, xi)
        return (((1j * k - x) ** 2 - 1.0) * a,
                (1j * k - x) * (-xi) * a,
                (xi * xi - 1.0) * a)

    factors = {
        "xx": [(lambda x: ((1j * k - x) ** 2 - 1.0) * gx(x), gxi)],
        "xxi": [(lambda x: (1j * k - x) * gx(x), lambda xi: -xi * gxi(xi))],
        "xixi": [(gx, lambda xi: (xi * xi - 1.0) * gxi(xi))],
    }
    return BatterySymbol(name or f"phase_gauss[k={k:g}]", fn, hess, 1.0,
                         (1.0 + k) ** 2 + 2.0, is_complex=True,
                         hessian_factors=factors)


def quadratic_symbol(name="abs_X_sq") -> BatterySymbol:
    """a = x^2 + xi^2 (unbounded; for the normalization oracle only)."""

    def fn(x, xi):
        return x * x + xi * xi

    def hess(x, xi):
        two = np.full(np.broadcast(x, xi).shape, 2.0)
        zero = np.zeros_like(two)
        return two, zero, two

    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    factors = {"xx": [(lambda t: 2.0 * one(t), one)],
               "xxi": [(zero, zero)],
               "xixi": [(one, lambda t: 2.0 * one(t))]}
    return BatterySymbol(name, fn, hess, np.inf, 2.0, nonnegative=True,
                         hessian_factors=factors)


def default_wick_battery(count: int = 20):
    """The nonnegative battery: Gaussians and Lorentzians spread over the
    box plus squared-sine modulations.  Deterministic.  Lorentzians are
    kept at unit width or narrower: their polynomial tails are what the
    grid truncation feels first."""
    out = []
    centers = [(-4.0, 0.0), (-2.0, 2.0), (0.0, 0.0), (2.0, -2.0), (4.0, 0.0),
               (0.0, 4.0), (0.0, -4.0), (3.0, 3.0), (-3.0, -3.0), (1.0, -1.0)]
    for i, (x0, xi0) in enumerate(centers):
        out.append(gaussian_bump(amp=1.0 - 0.05 * i, x0=x0, xi0=xi0,
                                 ax=0.5 + 0.25 * (i % 3), axi=0.5 + 0.2 * (i % 2)))
    for i, (x0, xi0) in enumerate(centers[:3]):
        out.append(lorentz_bump(amp=0.5 + 0.1 * i, x0=x0 / 2.0, xi0=xi0 / 2.0,
                                ax=1.0 + 0.5 * (i % 2), axi=1.0))
    out.append(sine_gauss(k=1.0, xwidth=12.0))
    out.append(sine_gauss(k=2.0, xwidth=12.0))
    out.append(sine_gauss(k=0.5, width=2.0, xwidth=10.0))
    out.append(gaussian_bump(amp=2.0, ax=0.25, axi=0.25, name="wide_gauss"))
    out.append(gaussian_bump(amp=1.3, x0=-1.0, xi0=2.0, ax=1.5, axi=0.75,
                             name="tilt_gauss"))
    out.append(gaussian_bump(amp=0.8, x0=-2.5, xi0=-1.0, ax=0.75, axi=1.25,
                             name="offset_gauss"))
    out.append(gaussian_bump(amp=0.3, x0=1.0, xi0=1.0, ax=2.0, axi=2.0,
                             name="narrow_gauss"))
    return out[:count]


def adjoint_battery():
    """Complex symbols exercising (a^Wick)^* = (conj a)^Wick."""
    return [complex_phase_gauss(k=1.0), complex_phase_gauss(k=2.5)]


def composition_gaussian_pair():
    """f = e^{-x^2}, g = e^{-xi^2} and their Poisson bracket."""
    f = lambda x, xi: np.exp(-x * x) + 0.0 * xi
    g = lambda x, xi: np.exp(-xi * xi) + 0.0 * x
    f.name, g.name = "exp(-x^2)", "exp(-xi^2)"

    def bracket(x, xi):
        # {f, g} = -f_x g_xi since f is x-only and g is xi-only
        return -4.0 * x * xi * np.exp(-x * x - xi * xi)

    return f, g, bracket
