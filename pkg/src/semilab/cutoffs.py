"""Plateau cutoff functions with closed-form derivatives.

Two cutoffs drive everything downstream: a frequency cutoff with plateau
radius 1 and support radius 2, and a narrower one with plateau 1/2 and
support 1.  Both are built from a polynomial smoothstep glued to the
constant plateaus, so every derivative used by the audits is available in
closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

MAX_PROFILE_ORDER = 4

# Smoothstep kernels S: [0,1] -> [0,1] with S(0)=0, S(1)=1, monotone.
# Coefficients in ascending powers.  The key figure of merit for the weight
# audits is the maximum slope, which grows with smoothness at the junctions:
#   cubic   (C^1):  max S' = 1.5
#   quintic (C^2):  max S' = 1.875
#   septic  (C^3):  max S' = 2.1875
_STEP_COEFFS = {
    "smoothstep_c1": np.array([0.0, 0.0, 3.0, -2.0]),
    "smoothstep_c2": np.array([0.0, 0.0, 0.0, 10.0, -15.0, 6.0]),
    "smoothstep_c3": np.array([0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0]),
}

# The quintic step is the default: the septic one is smoother but its larger
# slope eats into the weight-inequality margin (see audits of Re q + h H g).
DEFAULT_STEP = "smoothstep_c2"


@dataclass(frozen=True)
class CutoffProfile:
    """Radial plateau cutoff s -> [0,1].

    Value is identically 1 for |s| <= plateau, identically 0 for
    |s| >= support, and a monotone smoothstep in between.  Derivatives up
    to order 4 are evaluated from the polynomial kernel.
    """

    name: str
    plateau: float
    support: float
    _dcoeffs: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.plateau < self.support:
            raise ValueError("need 0 < plateau < support")
        base = _STEP_COEFFS[self.name]
        ders = []
        c = base
        for _ in range(MAX_PROFILE_ORDER + 1):
            ders.append(c)
            c = npoly.polyder(c)
        object.__setattr__(self, "_dcoeffs", tuple(tuple(c) for c in ders))

    @property
    def width(self) -> float:
        return self.support - self.plateau

    def value(self, s):
        return self.deriv(s, 0)

    def deriv(self, s, order: int):
        """order-th derivative with respect to s, vectorized."""
        if not 0 <= order <= MAX_PROFILE_ORDER:
            raise ValueError(f"profile derivatives available up to order {MAX_PROFILE_ORDER}")
        s_in = np.asarray(s, dtype=float)
        scalar = s_in.ndim == 0
        sv = np.atleast_1d(s_in)
        u = (np.abs(sv) - self.plateau) / self.width
        inside = (u > 0.0) & (u < 1.0)
        if order == 0:
            out = np.where(u >= 1.0, 0.0, 1.0)
        else:
            out = np.zeros_like(u)
        if np.any(inside):
            kernel = npoly.polyval(u[inside], np.asarray(self._dcoeffs[order]))
            if order == 0:
                out[inside] = 1.0 - kernel
            else:
                out[inside] = -kernel * (np.sign(sv[inside]) ** order) / self.width ** order
        return float(out[0]) if scalar else out


def chi_profile(step: str = DEFAULT_STEP) -> CutoffProfile:
    """The wide cutoff: 1 on |s| <= 1, 0 on |s| >= 2."""
    return CutoffProfile(step, 1.0, 2.0)


def psi_profile(step: str = DEFAULT_STEP) -> CutoffProfile:
    """The narrow cutoff: 1 on |s| <= 1/2, 0 on |s| >= 1."""
    return CutoffProfile(step, 0.5, 1.0)


def available_steps():
    return sorted(_STEP_COEFFS)
