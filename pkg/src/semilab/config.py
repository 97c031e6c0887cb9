"""Run configuration: a plain-text key=value file with sections.

Everything a run does is pinned here (model, grids, h lists, samplers,
ceilings, seed), so a rerun with the same file and seed reproduces every
output byte for byte.  ``reference_text()`` documents all defaults.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field

DEFAULTS = {
    "run": {
        "model": ("davies", "built-in model name"),
        "model_params": ("", "comma-separated k=v numeric parameters (e.g. alpha=1.0)"),
        "seed": ("20240817", "random seed, recorded verbatim in all outputs"),
        "out_dir": ("reports", "output directory"),
        "cache": ("true", "cache assembled operator matrices"),
    },
    "grid": {
        "L": ("8", "box half-width, or 'auto' for the pilot-density rule"),
        "n_min": ("256", "minimum grid size"),
        "n_cap": ("1024", "maximum grid size (resolution warning when capped)"),
    },
    "region": {
        "K": ("2.0", "modulus constant, K > 1"),
        "M": ("2.0", "semiclassical margin, M >= 2"),
        "C0": ("auto", "parabola constant, or 'auto' to take the calibrated value"),
        "T": ("auto", "spectral offset, or 'auto' to take the model value"),
    },
    "sweep": {
        "h_list": ("2^-4,2^-5,2^-6,2^-7,2^-8,2^-9", "strictly decreasing h values"),
        "sampler": ("imag", "z sampler: imag | boundary | negreal"),
        "y_list": ("1", "y = |z| - T values the sampler hits"),
        "sigma_floor": ("1e-2", "certification floor for sigma_min / bound"),
        "convergence_check": ("false", "also record the N-doubling delta"),
    },
    "audits": {
        "h_list": ("2^-3,2^-4,2^-5,2^-6,2^-7,2^-8,2^-9", "h values for weight audits"),
        "y_list": ("1,2,4,8", "y values for the Psi-derivative audit"),
        "ceiling": ("1e3", "generic one-sided ceiling; two-sided uses [1/c, c]"),
        "ceiling_qpp": ("3e5", "ceiling for the q'' class audit: the frequency "
                               "cutoff contributes derivatives of size ~ 2R x "
                               "profile-derivative maxima on magnetic models"),
        "ceiling_v2": ("4.0", "ceiling for the |V2| vs 1+V1+|V2'|^2 ratios"),
        "weight_floor": ("0.1", "required minimum of the weight quotient"),
        "profile": ("smoothstep_c2", "cutoff kernel: smoothstep_c1 | _c2 | _c3"),
        "grid_box": ("20", "dense grid half-width"),
        "grid_points": ("201", "dense grid points per axis"),
        "far_max": ("1e3", "far-field shell radius"),
        "far_points": ("12", "far-field shell points per sign"),
    },
    "wick": {
        "L": ("10", "box half-width for the quantization battery"),
        "N": ("64", "grid size for the quantization battery"),
        "frame_spacing": ("0.5", "coherent lattice spacing"),
        "frame_margin": ("4.0", "spatial margin of the coherent lattice"),
        "battery_size": ("20", "number of nonnegative battery symbols"),
        "composition_h_list": ("2^-4,2^-5,2^-6,2^-7", "h values for the Moyal slopes"),
    },
}


class ConfigError(ValueError):
    pass


def _parse_number(tok: str) -> float:
    tok = tok.strip()
    if "^" in tok:
        base, exp = tok.split("^", 1)
        return float(base) ** float(exp)
    return float(tok)


def parse_number_list(text: str):
    text = text.strip()
    if not text:
        return []
    return [_parse_number(t) for t in text.replace(",", " ").split()]


def parse_params(text: str) -> dict:
    out = {}
    for item in text.replace(",", " ").split():
        if "=" not in item:
            raise ConfigError(f"model parameter {item!r} is not k=v")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_number(v)
    return out


@dataclass(frozen=True)
class RunConfig:
    model: str
    model_params: dict
    seed: int
    out_dir: str
    cache: bool
    grid_L: float | None            # None means 'auto'
    n_min: int
    n_cap: int
    K: float
    M: float
    C0: float | None                # None means 'auto' (calibrated)
    T: float | None                 # None means 'auto' (model value)
    sweep_h_list: tuple
    sampler: str
    y_list: tuple
    sigma_floor: float
    convergence_check: bool
    audit_h_list: tuple
    audit_y_list: tuple
    ceiling: float
    ceiling_qpp: float
    ceiling_v2: float
    weight_floor: float
    profile: str
    grid_box: float
    grid_points: int
    far_max: float
    far_points: int
    wick_L: float
    wick_N: int
    frame_spacing: float
    frame_margin: float
    battery_size: int
    composition_h_list: tuple
    raw: dict = field(default_factory=dict, compare=False)

    def hash(self) -> str:
        buf = io.StringIO()
        for sec in sorted(self.raw):
            for key in sorted(self.raw[sec]):
                buf.write(f"{sec}.{key}={self.raw[sec][key]}\n")
        return hashlib.sha256(buf.getvalue().encode()).hexdigest()[:16]


def _effective(parser: configparser.ConfigParser) -> dict:
    eff = {}
    for sec, keys in DEFAULTS.items():
        eff[sec] = {}
        for key, (default, _) in keys.items():
            eff[sec][key] = parser.get(sec, key, fallback=default).strip()
        if parser.has_section(sec):
            for key in parser[sec]:
                if key not in keys:
                    raise ConfigError(f"unknown config key [{sec}] {key}")
    for sec in parser.sections():
        if sec not in DEFAULTS:
            raise ConfigError(f"unknown config section [{sec}]")
    return eff


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    parser = configparser.ConfigParser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path!r}")
    eff = _effective(parser)
    for (sec, key), value in (overrides or {}).items():
        eff[sec][key] = str(value)

    def g(sec, key):
        return eff[sec][key]

    def auto_or_float(sec, key):
        v = g(sec, key)
        return None if v.lower() == "auto" else _parse_number(v)

    def boolean(sec, key):
        v = g(sec, key).lower()
        if v not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"[{sec}] {key} must be boolean, got {v!r}")
        return v in ("true", "1", "yes")

    try:
        sweep_h = tuple(parse_number_list(g("sweep", "h_list")))
        if any(b >= a for a, b in zip(sweep_h, sweep_h[1:])):
            raise ConfigError("sweep h_list must be strictly decreasing")
        cfg = RunConfig(
            model=g("run", "model"),
            model_params=parse_params(g("run", "model_params")),
            seed=int(g("run", "seed")),
            out_dir=g("run", "out_dir"),
            cache=boolean("run", "cache"),
            grid_L=auto_or_float("grid", "L"),
            n_min=int(g("grid", "n_min")),
            n_cap=int(g("grid", "n_cap")),
            K=_parse_number(g("region", "K")),
            M=_parse_number(g("region", "M")),
            C0=auto_or_float("region", "C0"),
            T=auto_or_float("region", "T"),
            sweep_h_list=sweep_h,
            sampler=g("sweep", "sampler"),
            y_list=tuple(parse_number_list(g("sweep", "y_list"))),
            sigma_floor=_parse_number(g("sweep", "sigma_floor")),
            convergence_check=boolean("sweep", "convergence_check"),
            audit_h_list=tuple(parse_number_list(g("audits", "h_list"))),
            audit_y_list=tuple(parse_number_list(g("audits", "y_list"))),
            ceiling=_parse_number(g("audits", "ceiling")),
            ceiling_qpp=_parse_number(g("audits", "ceiling_qpp")),
            ceiling_v2=_parse_number(g("audits", "ceiling_v2")),
            weight_floor=_parse_number(g("audits", "weight_floor")),
            profile=g("audits", "profile"),
            grid_box=_parse_number(g("audits", "grid_box")),
            grid_points=int(g("audits", "grid_points")),
            far_max=_parse_number(g("audits", "far_max")),
            far_points=int(g("audits", "far_points")),
            wick_L=_parse_number(g("wick", "L")),
            wick_N=int(g("wick", "N")),
            frame_spacing=_parse_number(g("wick", "frame_spacing")),
            frame_margin=_parse_number(g("wick", "frame_margin")),
            battery_size=int(g("wick", "battery_size")),
            composition_h_list=tuple(parse_number_list(g("wick", "composition_h_list"))),
            raw=eff,
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.sampler not in ("imag", "boundary", "negreal"):
        raise ConfigError(f"unknown sampler {cfg.sampler!r}")
    return cfg


def reference_text() -> str:
    lines = ["# semilab configuration reference (generated)",
             "# every key with its default; values shown are the defaults", ""]
    for sec, keys in DEFAULTS.items():
        lines.append(f"[{sec}]")
        for key, (default, doc) in keys.items():
            lines.append(f"# {doc}")
            lines.append(f"{key} = {default}")
        lines.append("")
    return "\n".join(lines)
