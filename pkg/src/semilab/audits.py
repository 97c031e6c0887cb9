"""Grid audits of symbol classes and pointwise inequalities.

A symbol class membership "a in S(m)" is certified by measuring
sup |d^alpha a| / m over a phase-space grid: orders 1 and 2 by centered
finite differences with steps proportional to the local scale, orders 3
and 4 only through analytic evaluators when the symbol declares them.
Inequalities are certified by recording the extremal value of the audited
quotient together with the point attaining it, so each report can be
replayed exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .cutoffs import CutoffProfile, chi_profile, psi_profile
from .models import PotentialModel
from .symbols import (PhasePoint, SymbolField, WeightParams, bracket, eval_lambda,
                      eval_p, eval_q, eval_chi_t, hamilton_v2_g, lambda_p_grad,
                      re_p_grad)

DEFAULT_CEILING = 1.0e3
FD_STEP_REL = 1e-3
DENOM_FLOOR = 1e-8


class AuditError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class PhaseGrid:
    """Flattened tensor grid of phase-space points."""

    x: np.ndarray            # (M, n)
    xi: np.ndarray           # (M, n)
    descriptor: str

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return len(self.x)


def _axis(box, points, far_max, far_points):
    vals = [np.linspace(-box, box, points)]
    if far_points > 0 and far_max > box:
        shell = np.logspace(np.log10(box * 1.25), np.log10(far_max), far_points)
        vals += [shell, -shell]
    return np.sort(np.concatenate(vals))


def default_phase_grid(n: int = 1, box: float = 20.0, points: int = 201,
                       far_max: float = 1.0e3, far_points: int = 12) -> PhaseGrid:
    """Dense |x|,|xi| <= box grid plus a log-spaced far-field shell.

    For n = 2 the per-axis counts are cut down so the 4-d tensor stays
    desk-sized.
    """
    if n == 2:
        points = min(points, 15)
        far_points = min(far_points, 4)
    ax = _axis(box, points, far_max, far_points)
    axes = np.meshgrid(*([ax] * (2 * n)), indexing="ij")
    flat = [a.ravel() for a in axes]
    x = np.column_stack(flat[:n])
    xi = np.column_stack(flat[n:])
    desc = f"tensor[n={n},box={box:g},pts={points},far={far_max:g}x{far_points}]"
    return PhaseGrid(x, xi, desc)


def compact_phase_grid(n: int = 1, box: float = 6.0, points: int = 41) -> PhaseGrid:
    return default_phase_grid(n, box=box, points=points, far_points=0)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class OrderRow:
    order: int
    ratio: float
    point: PhasePoint
    fd_step: float
    passed: bool


@dataclass(frozen=True)
class SymbolClassReport:
    symbol: str
    order_fn: str
    grid: str
    ceiling: float
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def ratio(self, order: int) -> float:
        for r in self.rows:
            if r.order == order:
                return r.ratio
        raise KeyError(order)


@dataclass(frozen=True)
class InequalityReport:
    inequality: str
    kind: str                 # "min" or "max"
    value: float
    point: PhasePoint
    h: float | None
    y: float | None
    passed: bool
    grid: str = ""


def all_passed(reports) -> bool:
    return all(r.passed for r in reports)


# ---------------------------------------------------------------------------
# finite differences on phase space


def _steps(grid: PhaseGrid, step_rel: float):
    z = np.concatenate([grid.x, grid.xi], axis=1)
    return step_rel * (1.0 + np.abs(z))


def _shift(grid: PhaseGrid, coord: int, delta):
    x = grid.x.copy()
    xi = grid.xi.copy()
    n = grid.n
    if coord < n:
        x[:, coord] += delta
    else:
        xi[:, coord - n] += delta
    return x, xi


def _fd_first(a, grid, coord, steps):
    d = steps[:, coord]
    xp, xip = _shift(grid, coord, d)
    xm, xim = _shift(grid, coord, -d)
    return (a(xp, xip) - a(xm, xim)) / (2.0 * d)


def _fd_second(a, grid, ci, cj, steps, center=None):
    if ci == cj:
        d = steps[:, ci]
        xp, xip = _shift(grid, ci, d)
        xm, xim = _shift(grid, ci, -d)
        c = a(grid.x, grid.xi) if center is None else center
        return (a(xp, xip) - 2.0 * c + a(xm, xim)) / (d * d)
    di = steps[:, ci]
    dj = steps[:, cj]
    out = None
    for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        x, xi = _shift(grid, ci, si * di)
        g2 = PhaseGrid(x, xi, grid.descriptor)
        x, xi = _shift(g2, cj, sj * dj)
        v = a(x, xi) * (si * sj)
        out = v if out is None else out + v
    return out / (4.0 * di * dj)


def check_symbol_class(a: SymbolField, m, min_order: int, max_order: int,
                       grid: PhaseGrid, ceiling: float = DEFAULT_CEILING,
                       step_rel: float = FD_STEP_REL) -> SymbolClassReport:
    """Certify sup |d^alpha a| / m(X) over the grid for each order.

    ``m`` is a vectorized order function m(x, xi) > 0."""
    if max_order > 4:
        raise AuditError("orders above 4 are not audited")
    if step_rel < 1e-3 - 1e-15:
        raise AuditError("finite-difference steps below 1e-3 of local scale are unstable")
    steps = _steps(grid, step_rel)
    mvals = np.asarray(m(grid.x, grid.xi), dtype=float)
    if np.any(mvals <= 0):
        raise AuditError("order function must be positive on the grid")
    dim = 2 * grid.n
    rows = []
    center = None
    for order in range(min_order, max_order + 1):
        worst = np.zeros(len(grid))
        wstep = np.zeros(len(grid))
        if order == 0:
            worst = np.abs(a(grid.x, grid.xi))
        elif order == 1:
            for c in range(dim):
                v = np.abs(_fd_first(a, grid, c, steps))
                upd = v > worst
                worst = np.where(upd, v, worst)
                wstep = np.where(upd, steps[:, c], wstep)
        elif order == 2:
            if center is None:
                center = a(grid.x, grid.xi)
            for ci in range(dim):
                for cj in range(ci, dim):
                    v = np.abs(_fd_second(a, grid, ci, cj, steps, center))
                    upd = v > worst
                    worst = np.where(upd, v, worst)
                    wstep = np.where(upd, steps[:, ci], wstep)
        else:
            if a.analytic_order < order:
                continue   # orders 3-4 only via analytic evaluators
            for alpha in itertools.product(range(order + 1), repeat=dim):
                if sum(alpha) != order:
                    continue
                v = np.abs(a.deriv(grid.x, grid.xi, alpha))
                worst = np.maximum(worst, v)
        if not np.all(np.isfinite(worst)):
            i = int(np.argmax(~np.isfinite(worst)))
            raise AuditError(
                f"non-finite difference quotient for {a.name!r} at "
                f"x={tuple(grid.x[i])}, xi={tuple(grid.xi[i])}")
        ratios = worst / mvals
        i = int(np.argmax(ratios))
        rows.append(OrderRow(order, float(ratios[i]),
                             PhasePoint(tuple(grid.x[i]), tuple(grid.xi[i])),
                             float(wstep[i]), bool(ratios[i] <= ceiling)))
    return SymbolClassReport(a.name, getattr(m, "__name__", "m"), grid.descriptor,
                             ceiling, tuple(rows))


# ---------------------------------------------------------------------------
# inequality audits


def _extremal(values, grid, mask=None):
    vals = np.asarray(values, dtype=float)
    idx = np.arange(len(grid)) if mask is None else np.flatnonzero(mask)
    sub = vals if mask is None else vals[mask]
    imin, imax = int(np.argmin(sub)), int(np.argmax(sub))
    pmin = PhasePoint(tuple(grid.x[idx[imin]]), tuple(grid.xi[idx[imin]]))
    pmax = PhasePoint(tuple(grid.x[idx[imax]]), tuple(grid.xi[idx[imax]]))
    return (float(sub[imin]), pmin), (float(sub[imax]), pmax)


def audit_ellipticity(model: PotentialModel, R: float, z_samples, grid: PhaseGrid,
                      ceiling: float = DEFAULT_CEILING,
                      profile: CutoffProfile | None = None):
    """Two-sided comparability off the chi_R plateau:

        Re p ~ Re q ~ <X>^2   and   |p - z| ~ |q - z| ~ <X>^2 + |z|.
    """
    profile = profile or chi_profile()
    for z in z_samples:
        if np.real(z) > np.abs(np.imag(z)):
            raise AuditError(f"z={z} violates Re z <= |Im z|")
    off = np.asarray(eval_chi_t(grid.x, grid.xi, R, profile)) < 1.0
    if not np.any(off):
        raise AuditError("grid never leaves the chi_R plateau; enlarge it")
    br2 = 1.0 + np.sum(grid.x * grid.x, axis=-1) + np.sum(grid.xi * grid.xi, axis=-1)
    p = eval_p(model, grid.x, grid.xi)
    q = eval_q(model, grid.x, grid.xi, R, profile)
    reports = []
    for name, vals in (("re_p_over_X2", np.real(p) / br2),
                       ("re_q_over_X2", np.real(q) / br2)):
        (vmin, pmin), (vmax, pmax) = _extremal(vals, grid, off)
        reports.append(InequalityReport(name, "min", vmin, pmin, None, None,
                                        bool(vmin >= 1.0 / ceiling), grid.descriptor))
        reports.append(InequalityReport(name, "max", vmax, pmax, None, None,
                                        bool(vmax <= ceiling), grid.descriptor))
    for z in z_samples:
        den = br2 + abs(z)
        for name, sym in (("p_minus_z", p), ("q_minus_z", q)):
            vals = np.abs(sym - z) / den
            (vmin, pmin), (vmax, pmax) = _extremal(vals, grid, off)
            tag = f"{name}_ellipticity"
            reports.append(InequalityReport(tag, "min", vmin, pmin, None, abs(z),
                                            bool(vmin >= 1.0 / ceiling), grid.descriptor))
            reports.append(InequalityReport(tag, "max", vmax, pmax, None, abs(z),
                                            bool(vmax <= ceiling), grid.descriptor))
    return reports


def audit_weight_inequality(model: PotentialModel, h_list, grid: PhaseGrid,
                            params: WeightParams, floor: float = 0.1,
                            profile: CutoffProfile | None = None,
                            chi_prof: CutoffProfile | None = None):
    """min over the grid of (Re q + h H_{Im q} g + C2 h) / (h^(2/3) lambda_q^(1/3))
    for each h, plus the p-variant with the same weight."""
    profile = profile or psi_profile()
    chi_prof = chi_prof or chi_profile()
    R = params.R
    lam_q = eval_lambda(model, grid.x, grid.xi, "q", R, chi_prof)
    lam_p = eval_lambda(model, grid.x, grid.xi, "p")
    re_q = np.real(eval_q(model, grid.x, grid.xi, R, chi_prof))
    re_p = np.real(eval_p(model, grid.x, grid.xi))
    reports = []
    for h in h_list:
        ham = hamilton_v2_g(model, grid.x, grid.xi, h, params.epsilon, profile)
        for tag, re, lam in (("weight_q", re_q, lam_q), ("weight_p", re_p, lam_p)):
            live = lam > 0.0
            ratio = np.full(len(grid), np.inf)
            ratio[live] = (re[live] + h * ham[live] + params.C2 * h) \
                / (h ** (2.0 / 3.0) * lam[live] ** (1.0 / 3.0))
            (vmin, pmin), _ = _extremal(ratio, grid, live)
            reports.append(InequalityReport(tag, "min", vmin, pmin, h, None,
                                            bool(vmin >= floor), grid.descriptor))
    return reports


def audit_psi_derivatives(model: PotentialModel, h_list, y_list, B: float, R: float,
                          grid: PhaseGrid, ceiling: float = DEFAULT_CEILING,
                          profile: CutoffProfile | None = None,
                          chi_prof: CutoffProfile | None = None):
    """max over the grid of |d^alpha Psi| (y/h)^(1/2) for orders 1 and 2."""
    from .symbols import psi_weight_symbol
    reports = []
    for h in h_list:
        for y in y_list:
            sym = psi_weight_symbol(model, h, y, B, R, profile, chi_prof)
            steps = _steps(grid, FD_STEP_REL)
            dim = 2 * grid.n
            scale = np.sqrt(y / h)
            for order in (1, 2):
                worst = np.zeros(len(grid))
                if order == 1:
                    for c in range(dim):
                        worst = np.maximum(worst, np.abs(_fd_first(sym, grid, c, steps)))
                else:
                    center = sym(grid.x, grid.xi)
                    for ci in range(dim):
                        for cj in range(ci, dim):
                            worst = np.maximum(
                                worst, np.abs(_fd_second(sym, grid, ci, cj, steps, center)))
                _, (vmax, pmax) = _extremal(worst * scale, grid)
                reports.append(InequalityReport(f"psi_deriv_order{order}", "max",
                                                vmax, pmax, h, y,
                                                bool(vmax <= ceiling), grid.descriptor))
    return reports


def audit_rep_bounds(model: PotentialModel, grid: PhaseGrid,
                     ceiling: float = DEFAULT_CEILING):
    """|Re p'| <= C (Re p)^(1/2) and |lambda_p'| <= C lambda_p^(1/2)."""
    re = np.real(eval_p(model, grid.x, grid.xi))
    lam = eval_lambda(model, grid.x, grid.xi, "p")
    gr = re_p_grad(model, grid.x, grid.xi)
    gl = lambda_p_grad(model, grid.x, grid.xi)
    reports = []
    for tag, vals, grad in (("re_p_grad", re, gr), ("lambda_p_grad", lam, gl)):
        live = vals >= DENOM_FLOOR
        if not np.any(live):
            reports.append(InequalityReport(tag, "max", 0.0,
                                            PhasePoint((0.0,) * grid.n, (0.0,) * grid.n),
                                            None, None, True, grid.descriptor))
            continue
        ratio = np.zeros(len(grid))
        ratio[live] = np.sqrt(np.sum(grad * grad, axis=-1))[live] / np.sqrt(vals[live])
        _, (vmax, pmax) = _extremal(ratio, grid, live)
        reports.append(InequalityReport(tag, "max", vmax, pmax, None, None,
                                        bool(vmax <= ceiling), grid.descriptor))
    return reports
