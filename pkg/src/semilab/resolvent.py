"""Resolvent sweeps: sigma_min over (h, z), scaling fits, certification.

The audited statement is the lower bound ||(P - z) u|| >= c h^(2/3) y^(1/3) ||u||
with y = |z| - T, for z in the parabolic region |z| >= K T + M h,
Re z <= C0 h^(2/3) y^(1/3).  On the discrete grid ||(P - z)^{-1}|| =
1 / sigma_min(P - z), so each sweep record stores sigma_min, the bound
h^(2/3) y^(1/3) and their ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .models import PotentialModel
from .quantize import GridSpec, OperatorMatrix, weyl_general, weyl_poly
from .symbols import choose_R

SIGMA_FLOOR_DEFAULT = 1e-2
BOX_CANDIDATES = (8.0, 12.0, 16.0)
BOUNDARY_DENSITY_TOL = 1e-10
N_MIN = 256
N_CAP = 1024


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class RegionParams:
    """Constants of the parabolic region."""

    K: float = 2.0
    M: float = 2.0
    C0: float = 1.0
    T: float = 0.0

    def __post_init__(self):
        if self.K <= 1.0 or self.M < 2.0 or not 0.0 < self.C0 <= 1.0 or self.T < 0.0:
            raise SweepError("need K > 1, M >= 2, C0 in (0, 1], T >= 0")


def region_contains(z: complex, h: float, params: RegionParams) -> bool:
    """|z| >= K T + M h and Re z <= C0 h^(2/3) (|z| - T)^(1/3)."""
    if h <= 0:
        raise SweepError("h must be positive")
    mod = abs(z)
    if mod < params.K * params.T + params.M * h:
        return False
    y = mod - params.T
    return z.real <= params.C0 * h ** (2.0 / 3.0) * y ** (1.0 / 3.0) + 1e-15


@dataclass(frozen=True)
class SweepRecord:
    model: str
    h: float
    z: complex
    y: float
    sigma_min: float
    bound: float
    ratio: float
    N: int
    L: float
    capped: bool = False
    doubling_delta: float | None = None

    @property
    def grid_descriptor(self) -> str:
        return f"L={self.L:g},N={self.N}"


def sigma_min(P, z: complex) -> float:
    """Smallest singular value of P - z I (dense SVD)."""
    a = P.shifted(z) if isinstance(P, OperatorMatrix) else np.asarray(P) - z * np.eye(len(P))
    return float(np.linalg.svd(a, compute_uv=False)[-1])


# ---------------------------------------------------------------------------
# z samplers


def imag_axis_sampler(y_list):
    """z = i (T + y) ... with T = 0 this is z = i y."""
    def sampler(h, params):
        return [1j * (params.T + y) for y in y_list]
    sampler.name = "imag"
    return sampler


def boundary_sampler(y_list):
    """z on the parabola boundary: Re z = C0 h^(2/3) y^(1/3), |z| = T + y."""
    def sampler(h, params):
        out = []
        for y in y_list:
            re = params.C0 * h ** (2.0 / 3.0) * y ** (1.0 / 3.0)
            mod = params.T + y
            if re > mod:
                raise SweepError(f"boundary point with y={y} has Re z > |z|")
            out.append(re + 1j * np.sqrt(mod * mod - re * re))
        return out
    sampler.name = "boundary"
    return sampler


def neg_real_sampler(y_list):
    """z = -(T + y), deep inside the region."""
    def sampler(h, params):
        return [-(params.T + y) + 0.0j for y in y_list]
    sampler.name = "negreal"
    return sampler


def fixed_sampler(z_list):
    def sampler(h, params):
        return list(z_list)
    sampler.name = "fixed"
    return sampler


SAMPLERS = {"imag": imag_axis_sampler, "boundary": boundary_sampler,
            "negreal": neg_real_sampler}


# ---------------------------------------------------------------------------
# grid policy


def choose_box_halfwidth(model: PotentialModel, h: float, z: complex,
                         candidates=BOX_CANDIDATES,
                         density_tol: float = BOUNDARY_DENSITY_TOL) -> float:
    """Smallest candidate L whose pilot singular state has boundary density
    below the tolerance (periodic wrap-around control)."""
    R = choose_R(model)
    for L in candidates:
        grid = GridSpec(L, N_MIN, h)
        if grid.xi_max > 2.0 * R:
            continue
        P = weyl_poly(model, grid, R=R)
        _, _, vh = np.linalg.svd(P.shifted(z))
        state = vh[-1].conj()
        density = np.abs(state) ** 2 / grid.dx
        if max(density[0], density[-1]) <= density_tol:
            return L
    return candidates[-1]


@dataclass(frozen=True)
class GridPolicy:
    """Resolves (model, h) to a GridSpec: fixed or pilot-chosen L, and
    N = clip(8 L^2 / h) to [N_MIN, N_CAP] rounded up to a power of 2."""

    L: float | None = None
    n_min: int = N_MIN
    n_cap: int = N_CAP

    def resolve(self, model: PotentialModel, h: float, z: complex) -> tuple[GridSpec, bool]:
        L = self.L if self.L is not None else choose_box_halfwidth(model, h, z)
        need = max(float(self.n_min), 8.0 * L * L / h)
        N = int(2 ** np.ceil(np.log2(need)))
        capped = N > self.n_cap
        N = min(N, self.n_cap)
        return GridSpec(L, N, h), capped


# ---------------------------------------------------------------------------
# the sweep


def sweep(model: PotentialModel, h_list, z_sampler, grid_policy: GridPolicy,
          params: RegionParams, convergence_check: bool = False):
    """One record per (h, z); deterministic; sorted by (h, |z|)."""
    records = []
    R = choose_R(model)
    for h in h_list:
        zs = z_sampler(h, params)
        if not zs:
            continue
        grid, capped = grid_policy.resolve(model, h, zs[0])
        P = weyl_poly(model, grid, R=R)
        P_half = None
        for z in zs:
            if not region_contains(z, h, params):
                raise SweepError(
                    f"z={z} at h={h} violates the region constraints "
                    f"(|z| >= KT+Mh and Re z <= C0 h^(2/3) y^(1/3))")
            y = abs(z) - params.T
            s = sigma_min(P, z)
            bound = h ** (2.0 / 3.0) * y ** (1.0 / 3.0)
            delta = None
            if convergence_check and grid.N >= 2 * N_MIN:
                if P_half is None:
                    P_half = weyl_poly(model, GridSpec(grid.L, grid.N // 2, h), R=R)
                s_half = sigma_min(P_half, z)
                delta = abs(s - s_half) / max(s, 1e-300)
            records.append(SweepRecord(model.name, h, complex(z), y, s, bound,
                                       s / bound, grid.N, grid.L, capped, delta))
    records.sort(key=lambda r: (r.h, abs(r.z), r.z.real))
    return records


@dataclass(frozen=True)
class ExponentFit:
    axis: str
    slope: float
    intercept: float
    residual: float
    n_records: int


def fit_exponents(records, axis: str) -> ExponentFit:
    """Least squares of log sigma_min against log h or log y."""
    if axis not in ("h", "y"):
        raise SweepError("axis must be 'h' or 'y'")
    if len(records) < 4:
        raise SweepError("need at least 4 records to fit an exponent")
    other = [r.y for r in records] if axis == "h" else [r.h for r in records]
    if max(other) - min(other) > 1e-12 * max(abs(v) for v in other):
        raise SweepError(f"records must keep the non-{axis} coordinate fixed")
    t = np.log([getattr(r, "h" if axis == "h" else "y") for r in records])
    s = np.log([r.sigma_min for r in records])
    coef = np.polyfit(t, s, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, t) - s) ** 2)))
    return ExponentFit(axis, float(coef[0]), float(coef[1]), resid, len(records))


def certify_lower_bound(records, floor: float = SIGMA_FLOOR_DEFAULT):
    """min ratio over the records; passes iff it clears the floor."""
    if not records:
        raise SweepError("no records to certify")
    worst = min(records, key=lambda r: r.ratio)
    return worst.ratio, worst, bool(worst.ratio >= floor)


# ---------------------------------------------------------------------------
# p vs q through localized states


@dataclass(frozen=True)
class PqComparison:
    model: str
    h: float
    z: complex
    R_override: float
    seed: int
    norms_p: tuple
    norms_q: tuple
    max_defect: float
    max_defect_over_h: float
    centers: tuple


def gaussian_packet(grid: GridSpec, x0: float, xi0: float, h: float) -> np.ndarray:
    """Unit-norm semiclassical packet centered at (x0, xi0)."""
    x = grid.x
    u = np.exp(-0.5 * (x - x0) ** 2 / h + 1j * x * xi0 / h)
    return u / np.linalg.norm(u)


def compare_pq(model: PotentialModel, grid: GridSpec, h: float, z: complex,
               R_override: float, n_states: int = 32, seed: int = 20240817,
               center_band=(0.0, 0.2)) -> PqComparison:
    """Report | ||(p^w - z)u|| - ||(q^w - z)u|| | for random Gaussian packets.

    ``center_band`` = (lo, hi) places packet frequency centers at
    |xi0| in [lo, hi] * <x0>, i.e. relative to the cutoff scale; with
    R_override = 1/4 the band (0, 0.2) sits inside the chi_{2R} plateau and
    (0.3, 0.4) inside its transition where F is active but p = q pointwise.
    """
    if model.n != 1:
        raise SweepError("compare_pq is 1-d only")
    if grid.h != h:
        raise SweepError("grid.h must match h")
    from .symbols import eval_p, eval_q

    p_m = weyl_general(lambda x, xi: eval_p(model, x[..., None], xi[..., None]),
                       grid, name=f"p[{model.name}]")
    q_m = weyl_general(lambda x, xi: eval_q(model, x[..., None], xi[..., None], R_override),
                       grid, name=f"q[{model.name},R={R_override:g}]")
    rng = np.random.default_rng(seed)
    lo, hi = center_band
    norms_p, norms_q, centers = [], [], []
    for _ in range(n_states):
        x0 = rng.uniform(1.5, 3.0) * rng.choice([-1.0, 1.0])
        scale = np.sqrt(1.0 + x0 * x0)
        xi0 = rng.uniform(lo, hi) * scale * rng.choice([-1.0, 1.0])
        if abs(xi0) > 0.8 * grid.xi_max:
            xi0 = 0.8 * grid.xi_max * np.sign(xi0)
        u = gaussian_packet(grid, x0, xi0, h)
        norms_p.append(float(np.linalg.norm(p_m.shifted(z) @ u)))
        norms_q.append(float(np.linalg.norm(q_m.shifted(z) @ u)))
        centers.append((x0, xi0))
    defects = np.abs(np.array(norms_p) - np.array(norms_q))
    return PqComparison(model.name, h, complex(z), R_override, seed,
                        tuple(norms_p), tuple(norms_q),
                        float(defects.max()), float(defects.max() / h),
                        tuple(centers))
