"""Command-line pipeline: audits -> quantization checks -> sweeps.

Commands: audit-model, audit-symbols, audit-weight, audit-wick, sweep,
report-all.  Exit status 0 means every check passed, 1 an audit or
certification failure, 2 a configuration error.  Every output embeds the
config hash and the seed, and reruns of the same config are byte-identical.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import audits as aud
from . import battery, quantize, reports, resolvent
from .config import ConfigError, RunConfig, load_config, reference_text
from .cutoffs import CutoffProfile, chi_profile, psi_profile
from .models import ModelError, audit_conditions, get_model
from .symbols import (SymbolError, calibrate_constants, choose_R, f_symbol,
                      q_hessian_entry_symbols)

OK, FAIL, BADCONFIG = 0, 1, 2


def _meta(cfg: RunConfig, **extra) -> dict:
    meta = {"config_hash": cfg.hash(), "seed": cfg.seed,
            "note": "finite-sample certification; hypotheses are global"}
    meta.update(extra)
    return meta


def _model(cfg: RunConfig):
    return get_model(cfg.model, **cfg.model_params)


def _profiles(cfg: RunConfig):
    return psi_profile(cfg.profile), chi_profile(cfg.profile)


def _audit_grid(cfg: RunConfig, n: int):
    return aud.default_phase_grid(n, box=cfg.grid_box, points=cfg.grid_points,
                                  far_max=cfg.far_max, far_points=cfg.far_points)


_CALIBRATION_CACHE = {}


def _calibrated(cfg: RunConfig, model, grid):
    key = (model.name, tuple(sorted(model.params.items())), cfg.profile,
           tuple(cfg.audit_h_list) or (2.0 ** -6,), cfg.weight_floor, grid.descriptor)
    if key not in _CALIBRATION_CACHE:
        psi_p, chi_p = _profiles(cfg)
        h_list = cfg.audit_h_list or (2.0 ** -6,)
        _CALIBRATION_CACHE[key] = calibrate_constants(
            model, h_list, grid.x, grid.xi, profile=psi_p, chi_prof=chi_p,
            K=cfg.K, M=cfg.M, weight_floor=cfg.weight_floor)
    return _CALIBRATION_CACHE[key]


# ---------------------------------------------------------------------------
# audit-model


def cmd_audit_model(cfg: RunConfig) -> int:
    model = _model(cfg)
    report = audit_conditions(model, ceilings={"v2_vs_v1": cfg.ceiling_v2,
                                               "v2_vs_v1_shifted": cfg.ceiling_v2})
    rows = [(r.condition, r.constant, " ".join(f"{v:.6g}" for v in r.worst_point),
             r.ceiling, r.passed) for r in report.rows]
    path = os.path.join(cfg.out_dir, "model_conditions.csv")
    reports.write_csv(path, ["condition", "constant", "worst_point", "ceiling", "pass"],
                      rows, _meta(cfg, model=model.name, sample=report.sample_size))
    return OK if report.passed else FAIL


# ---------------------------------------------------------------------------
# audit-symbols (symbol classes)


def cmd_audit_symbols(cfg: RunConfig) -> int:
    model = _model(cfg)
    psi_p, chi_p = _profiles(cfg)
    grid = _audit_grid(cfg, model.n)
    cal = _calibrated(cfg, model, grid)
    R = cal.weight.R
    one = lambda x, xi: np.ones(len(x))
    inv_bracket = lambda x, xi: 1.0 / np.sqrt(
        1.0 + np.sum(x * x, axis=-1) + np.sum(xi * xi, axis=-1))
    rows = []

    for sym in q_hessian_entry_symbols(model, R, chi_p):
        rep = aud.check_symbol_class(sym, one, 0, 2, grid, cfg.ceiling_qpp)
        for r in rep.rows:
            rows.append((rep.symbol, "S(1)", r.order, r.ratio,
                         " ".join(f"{v:.6g}" for v in r.point.x + r.point.xi),
                         cfg.ceiling_qpp, r.passed))

    h_ref = (cfg.audit_h_list or [2.0 ** -5])[len(cfg.audit_h_list or [0]) // 2]
    for y in (cfg.audit_y_list or [1.0]):
        re = cal.proof.C0 * h_ref ** (2 / 3) * y ** (1 / 3)
        z = re + 1j * np.sqrt(max((model.T + y) ** 2 - re * re, 0.0))
        fs = f_symbol(model, R, z, chi_p)
        rep = aud.check_symbol_class(fs, one, 0, 1, grid, cfg.ceiling)
        for r in rep.rows:
            rows.append((rep.symbol, "S(1)", r.order, r.ratio,
                         " ".join(f"{v:.6g}" for v in r.point.x + r.point.xi),
                         cfg.ceiling, r.passed))
        rep = aud.check_symbol_class(fs, inv_bracket, 1, 1, grid, cfg.ceiling)
        for r in rep.rows:
            rows.append((rep.symbol, "S(<X>^-1)", r.order, r.ratio,
                         " ".join(f"{v:.6g}" for v in r.point.x + r.point.xi),
                         cfg.ceiling, r.passed))

    path = os.path.join(cfg.out_dir, "symbol_classes.csv")
    ok = all(r[-1] for r in rows)
    reports.write_csv(path, ["symbol", "class", "order", "ratio", "point", "ceiling", "pass"],
                      rows, _meta(cfg, model=model.name, grid=grid.descriptor,
                                  profile=cfg.profile, R=R))
    return OK if ok else FAIL


# ---------------------------------------------------------------------------
# audit-weight (pointwise inequalities)


def _ineq_rows(reps):
    out = []
    for r in reps:
        out.append((r.inequality, r.kind, r.value,
                    "" if r.h is None else r.h, "" if r.y is None else r.y,
                    " ".join(f"{v:.6g}" for v in r.point.x + r.point.xi), r.passed))
    return out


def cmd_audit_weight(cfg: RunConfig) -> int:
    model = _model(cfg)
    psi_p, chi_p = _profiles(cfg)
    grid = _audit_grid(cfg, model.n)
    rows = []
    ok = True
    if not cfg.audit_h_list:
        rows.append(("weight_q", "skipped", "", "", "", "", True))
        rows.append(("psi_deriv", "skipped", "", "", "", "", True))
        cal = None
        R = choose_R(model)
    else:
        cal = _calibrated(cfg, model, grid)
        R = cal.weight.R
        reps = aud.audit_weight_inequality(model, cfg.audit_h_list, grid, cal.weight,
                                           floor=cfg.weight_floor, profile=psi_p,
                                           chi_prof=chi_p)
        reps += aud.audit_psi_derivatives(model, cfg.audit_h_list[::3] or cfg.audit_h_list,
                                          cfg.audit_y_list, cal.proof.B, R, grid,
                                          ceiling=cfg.ceiling, profile=psi_p,
                                          chi_prof=chi_p)
        ok &= aud.all_passed(reps)
        rows += _ineq_rows(reps)

    h_ref = cfg.audit_h_list[0] if cfg.audit_h_list else 2.0 ** -5
    y_ref = (cfg.audit_y_list or [1.0])[0]
    z_samples = [1j * (model.T + y_ref), -(model.T + y_ref) + 0j]
    reps = aud.audit_ellipticity(model, R, z_samples, grid, ceiling=cfg.ceiling,
                                 profile=chi_p)
    reps += aud.audit_rep_bounds(model, grid, ceiling=cfg.ceiling)
    ok &= aud.all_passed(reps)
    rows += _ineq_rows(reps)

    path = os.path.join(cfg.out_dir, "inequalities.csv")
    meta = _meta(cfg, model=model.name, grid=grid.descriptor, profile=cfg.profile, R=R)
    if cal is not None:
        meta.update(epsilon=cal.weight.epsilon, C2=cal.weight.C2,
                    C1=cal.proof.C1, C0=cal.proof.C0, B=cal.proof.B)
    reports.write_csv(path, ["inequality", "kind", "value", "h", "y", "point", "pass"],
                      rows, meta)
    return OK if ok else FAIL


# ---------------------------------------------------------------------------
# audit-wick


def cmd_audit_wick(cfg: RunConfig) -> int:
    grid = quantize.GridSpec(cfg.wick_L, cfg.wick_N, 1.0)
    frame = quantize.coherent_frame(grid, cfg.frame_spacing, cfg.frame_margin)
    defect = frame.identity_defect()
    ok = defect <= 1e-6

    adopted, defects = quantize.resolve_wick_normalization(
        battery.quadratic_symbol(), grid, frame)
    finding = [
        "wick-to-weyl remainder normalization",
        f"frame: spacing={cfg.frame_spacing}, margin={cfg.frame_margin}, "
        f"nodes={frame.node_count}, identity_defect={defect:.3e}",
        f"candidate pi^-1.0 (Gaussian-convolution mass): defect={defects[-1.0]:.3e}",
        f"candidate pi^-0.5 (as printed): defect={defects[-0.5]:.3e}",
        f"adopted exponent: pi^{adopted:g} (defect at the quadrature noise floor)",
    ]
    ok &= adopted == quantize.WICK_NORMALIZATION_EXPONENT

    syms = battery.default_wick_battery(cfg.battery_size)
    rows_out = []
    for row in quantize.check_wick_identities(syms, grid, frame):
        rows_out.append((row.symbol,
                         "" if row.min_eig_over_norm is None else row.min_eig_over_norm,
                         row.opnorm, row.sup_a, row.adjoint_defect,
                         "" if row.ww_defect is None else row.ww_defect,
                         "" if row.ww_tol is None else row.ww_tol, row.passed()))
        ok &= row.passed()
    for row in quantize.check_wick_identities(battery.adjoint_battery(), grid, frame,
                                              check_remainder=False):
        rows_out.append((row.symbol, "", row.opnorm, row.sup_a, row.adjoint_defect,
                         "", "", row.passed()))
        ok &= row.passed()

    path = os.path.join(cfg.out_dir, "wick_identities.csv")
    reports.write_csv(path, ["symbol", "min_eig_over_norm", "opnorm", "sup_a",
                             "adjoint_defect", "ww_defect", "ww_tol", "pass"],
                      rows_out, _meta(cfg, grid=grid.descriptor(),
                                      frame_defect=defect, normalization=adopted))

    f, g, br = battery.composition_gaussian_pair()
    comp = quantize.check_weyl_composition(f, g, br, cfg.composition_h_list)
    crow = [("first_order", comp.slope_first, 0.9, 1.1,
             0.9 <= comp.slope_first <= 1.1),
            ("second_order", comp.slope_second, 1.8, 2.2,
             1.8 <= comp.slope_second <= 2.2)]
    ok &= all(r[-1] for r in crow)
    detail = [(f"h={h:g}", d1, d2, "", "")
              for h, d1, d2 in zip(comp.h_list, comp.first_order, comp.second_order)]
    path = os.path.join(cfg.out_dir, "composition_slopes.csv")
    reports.write_csv(path, ["row", "value_or_d1", "lo_or_d2", "hi", "pass"],
                      crow + detail, _meta(cfg, pair=comp.pair))

    with open(os.path.join(cfg.out_dir, "normalization_finding.txt"), "w") as fh:
        fh.write("\n".join([f"# config_hash={cfg.hash()}", f"# seed={cfg.seed}"]
                           + finding) + "\n")
    return OK if ok else FAIL


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(cfg: RunConfig) -> int:
    model = _model(cfg)
    T = model.T if cfg.T is None else cfg.T
    if cfg.C0 is None:
        grid = _audit_grid(cfg, model.n)
        C0 = _calibrated(cfg, model, grid).proof.C0
    else:
        C0 = cfg.C0
    params = resolvent.RegionParams(K=cfg.K, M=cfg.M, C0=C0, T=T)
    sampler = resolvent.SAMPLERS[cfg.sampler](cfg.y_list)
    policy = resolvent.GridPolicy(L=cfg.grid_L, n_min=cfg.n_min, n_cap=cfg.n_cap)
    cache_dir = os.path.join(cfg.out_dir, "cache") if cfg.cache else None
    records = run_sweep_records(model, cfg.sweep_h_list, sampler, policy, params,
                                cfg.convergence_check, cache_dir)
    c_min, worst, passed = resolvent.certify_lower_bound(records, cfg.sigma_floor)

    rows = [(r.model, r.h, r.z.real, r.z.imag, r.y, r.sigma_min, r.bound, r.ratio,
             r.N, r.L) for r in records]
    path = os.path.join(cfg.out_dir, "sweep.csv")
    meta = _meta(cfg, sampler=sampler.name, K=params.K, M=params.M, C0=params.C0,
                 T=params.T, c_min=c_min, certified=passed,
                 capped=any(r.capped for r in records))
    reports.write_csv(path, ["model", "h", "re_z", "im_z", "y", "sigma_min",
                             "bound", "ratio", "N", "L"], rows, meta)

    fit_rows = []
    hs = sorted({r.h for r in records})
    ys = sorted({r.y for r in records})
    if len(hs) >= 4 and len(ys) == 1:
        fit = resolvent.fit_exponents(records, "h")
        fit_rows.append(("h", fit.slope, fit.intercept, fit.residual, fit.n_records))
    if len(ys) >= 4 and len(hs) == 1:
        fit = resolvent.fit_exponents(records, "y")
        fit_rows.append(("y", fit.slope, fit.intercept, fit.residual, fit.n_records))
    reports.write_csv(os.path.join(cfg.out_dir, "exponents.csv"),
                      ["axis", "slope", "intercept", "residual", "n_records"],
                      fit_rows, meta)
    if fit_rows:
        reports.append_footer(path, "exponent_fits", fit_rows)

    if len(hs) > 1:
        series = [("sigma_min", hs, [min(r.sigma_min for r in records if r.h == h)
                                     for h in hs], "steelblue"),
                  ("bound", hs, [min(r.bound for r in records if r.h == h)
                                 for h in hs], "firebrick")]
        reports.svg_xy_plot(os.path.join(cfg.out_dir, "sweep_sigma_vs_h.svg"), series,
                            "h", "sigma_min", "smallest singular value vs h", meta,
                            logx=True, logy=True)
    yss = [(y, [r.ratio for r in records if r.y == y]) for y in ys]
    series = [("min ratio", [y for y, _ in yss], [min(v) for _, v in yss], "seagreen")]
    reports.svg_xy_plot(os.path.join(cfg.out_dir, "sweep_ratio_vs_y.svg"), series,
                        "y", "sigma_min / bound", "certification ratio vs y", meta)
    return OK if passed else FAIL


def run_sweep_records(model, h_list, sampler, policy, params, convergence_check,
                      cache_dir):
    """sweep() with an optional on-disk matrix cache keyed by
    (model, kind, L, N, h, R)."""
    if cache_dir is None:
        return resolvent.sweep(model, h_list, sampler, policy, params,
                               convergence_check)
    R = choose_R(model)
    records = []
    for h in h_list:
        zs = sampler(h, params)
        if not zs:
            continue
        grid, capped = policy.resolve(model, h, zs[0])
        key = quantize.cache_key(model.name, "weyl_poly", grid, R)
        path = quantize.cache_path(cache_dir, key)
        if os.path.exists(path):
            P = quantize.load_matrix(path, key)
        else:
            P = quantize.weyl_poly(model, grid, R=R)
            quantize.save_matrix(path, P, key)
        for z in zs:
            if not resolvent.region_contains(z, h, params):
                raise resolvent.SweepError(
                    f"z={z} at h={h} violates the region constraints")
            y = abs(z) - params.T
            s = resolvent.sigma_min(P, z)
            bound = h ** (2.0 / 3.0) * y ** (1.0 / 3.0)
            records.append(resolvent.SweepRecord(model.name, h, complex(z), y, s,
                                                 bound, s / bound, grid.N, grid.L,
                                                 capped))
    records.sort(key=lambda r: (r.h, abs(r.z), r.z.real))
    return records


# ---------------------------------------------------------------------------
# spec-level entry points


def run_audits(cfg: RunConfig) -> int:
    """model conditions + symbol classes + inequalities."""
    codes = [cmd_audit_model(cfg), cmd_audit_symbols(cfg), cmd_audit_weight(cfg)]
    return max(codes)


def run_quantizer_checks(cfg: RunConfig) -> int:
    return cmd_audit_wick(cfg)


def run_sweep(cfg: RunConfig) -> int:
    return cmd_sweep(cfg)


def cmd_report_all(cfg: RunConfig) -> int:
    with open(os.path.join(cfg.out_dir, "config_reference.txt"), "w") as fh:
        fh.write(reference_text())
    return max([run_audits(cfg), run_quantizer_checks(cfg), run_sweep(cfg)])


COMMANDS = {
    "audit-model": cmd_audit_model,
    "audit-symbols": cmd_audit_symbols,
    "audit-weight": cmd_audit_weight,
    "audit-wick": cmd_audit_wick,
    "sweep": cmd_sweep,
    "report-all": cmd_report_all,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="semilab",
                                     description="resolvent-estimate audit pipeline")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--no-cache", action="store_true")
    args = parser.parse_args(argv)

    overrides = {}
    if args.out is not None:
        overrides[("run", "out_dir")] = args.out
    if args.seed is not None:
        overrides[("run", "seed")] = args.seed
    if args.no_cache:
        overrides[("run", "cache")] = "false"
    try:
        cfg = load_config(args.config, overrides)
        os.makedirs(cfg.out_dir, exist_ok=True)
        with open(os.path.join(cfg.out_dir, ".write_probe"), "w") as fh:
            fh.write("")
        os.remove(os.path.join(cfg.out_dir, ".write_probe"))
    except (ConfigError, ModelError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return BADCONFIG
    try:
        code = COMMANDS[args.command](cfg)
    except (ConfigError, ModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return BADCONFIG
    except (SymbolError, aud.AuditError, resolvent.SweepError,
            quantize.QuantizeError) as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return FAIL
    print(f"{args.command}: {'pass' if code == OK else 'FAIL'} "
          f"(outputs in {cfg.out_dir})")
    return code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
