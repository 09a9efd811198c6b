"""Command-line experiment runner.

Subcommands: scan, mc, fwhm, sens, fringes, optimize, reproduce <figure_id>.

Settings resolve in this order (first wins): command-line flags, the
``--config`` file (JSON or YAML; a previous JSON output is accepted as is),
the ``SUPERFRINGE_SEED`` environment variable (seed only), built-in
defaults. The default seed is fixed, so a bare invocation is reproducible.

Exit codes: 0 success, 2 bad configuration, 3 numeric failure, 4 I/O error.
Errors print one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import binning as bn
from . import mcsim
from .numerics import ConvergenceError
from .quadmodel import CoherentSource, intensity_response

SEED_ENV = "SUPERFRINGE_SEED"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

MODES = ("scan", "mc", "fwhm", "sens", "fringes", "optimize", "reproduce")
FIGURES = ("fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b", "fig3c")

# photon numbers for the resolution and sensitivity sweeps; only 19 and 132
# are tied to measured curves, the rest is a documented default grid
FIG2C_PHOTONS = (1.5, 2.0, 3.0, 5.0, 8.0, 10.0, 19.0, 30.0, 50.0, 80.0, 132.0, 200.0, 300.0, 500.0, 1000.0)
FIG2D_PHOTONS = (5.0, 10.0, 19.0, 30.0, 50.0, 80.0, 132.0, 200.0, 300.0, 500.0, 1000.0)
FIG3C_PHOTONS = (50.0, 100.0, 200.0, 400.0, 800.0)
FIG3C_THRESHOLDS = (0.95, 0.90)
SENSITIVITY_COEFFICIENT = 1.37


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "scan"
    n_photons: float = 19.0
    a: float = 0.5
    b: Optional[float] = None
    n_bins: Optional[int] = None
    phi_start: float = -math.pi
    phi_end: float = math.pi
    phi_steps: int = 256
    samples: int = mcsim.DEFAULT_SAMPLES
    seed: int = mcsim.DEFAULT_SEED
    visibility_threshold: float = 0.95
    efficiency: float = 1.0
    workers: int = 1
    figure_id: Optional[str] = None
    output_path: Optional[str] = None
    format: str = "csv"

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if (self.b is None) != (self.n_bins is None):
            raise ConfigError("b and n_bins must be given together")
        if self.phi_steps < 2:
            raise ConfigError("phi_steps must be >= 2")
        if not self.phi_end > self.phi_start:
            raise ConfigError("phi_end must exceed phi_start")
        if self.phi_end - self.phi_start > 2 * math.pi + 1e-12:
            raise ConfigError("phase range must not exceed one period (2 pi)")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not 0 < self.visibility_threshold < 1:
            raise ConfigError("visibility_threshold must lie in (0, 1)")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.mode == "reproduce" and self.figure_id not in FIGURES:
            raise ConfigError(f"unknown figure id {self.figure_id!r}; choose from {', '.join(FIGURES)}")
        try:
            self.source()
            self.scheme()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def source(self) -> CoherentSource:
        return CoherentSource(self.n_photons)

    def scheme(self) -> bn.Scheme:
        if self.b is None:
            return bn.BinaryScheme(self.a)
        return bn.MultiScheme(self.a, self.b, self.n_bins)

    def grid(self) -> np.ndarray:
        return mcsim.phase_grid(self.phi_start, self.phi_end, self.phi_steps)

    def to_json(self) -> dict:
        # execution details stay out so output bytes do not depend on them
        out = dataclasses.asdict(self)
        out.pop("output_path")
        out.pop("workers")
        return out


_FIELD_TYPES = {
    "n_photons": float, "a": float, "b": float, "n_bins": int, "phi_start": float, "phi_end": float,
    "phi_steps": int, "samples": int, "seed": int, "visibility_threshold": float, "efficiency": float,
    "workers": int, "figure_id": str, "output_path": str, "format": str, "mode": str,
}


def _coerce(key, value):
    if value is None:
        return None
    kind = _FIELD_TYPES[key]
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    return kind(value)


def load_config_file(path: str) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    try:
        if p.suffix.lower() in (".yaml", ".yml"):
            import yaml

            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except Exception as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from None
    if isinstance(data, dict) and isinstance(data.get("config"), dict):
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    unknown = set(data) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def _common_flags(parser: argparse.ArgumentParser):
    S = argparse.SUPPRESS
    parser.add_argument("--config", default=S, help="JSON or YAML config file (flags override it)")
    parser.add_argument("--n-photons", dest="n_photons", type=float, default=S, help="mean photon number N")
    parser.add_argument("--a", type=float, default=S, help="window half-width (quadrature units)")
    parser.add_argument("--b", type=float, default=S, help="multi-bin spacing; needs --bins")
    parser.add_argument("--bins", dest="n_bins", type=int, default=S, help="odd number of windows; needs --b")
    parser.add_argument("--phi-start", dest="phi_start", type=float, default=S)
    parser.add_argument("--phi-end", dest="phi_end", type=float, default=S)
    parser.add_argument("--steps", dest="phi_steps", type=int, default=S, help="grid points in [start, end)")
    parser.add_argument("--samples", type=int, default=S, help="Monte Carlo shots per phase point")
    parser.add_argument("--seed", type=int, default=S, help=f"master seed (env {SEED_ENV} is the fallback)")
    parser.add_argument("--visibility-threshold", dest="visibility_threshold", type=float, default=S)
    parser.add_argument("--efficiency", type=float, default=S, help="detection efficiency in (0, 1]")
    parser.add_argument("--workers", type=int, default=S, help="threads for Monte Carlo and the optimizer")
    parser.add_argument("--out", dest="output_path", default=S, help="output file (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default=S)
    parser.add_argument("--degrees", action="store_true", default=False, help="read --phi-start/--phi-end in degrees")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="superfringe", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    helps = {
        "scan": "analytic response, variance and sensitivity over a phase grid",
        "mc": "Monte Carlo response estimate over a phase grid",
        "fwhm": "central-fringe width and narrowing factor",
        "sens": "minimum phase sensitivity",
        "fringes": "fringe count and visibility per 2 pi",
        "optimize": "bin spacing maximising the fringe count at a visibility floor",
        "reproduce": "plot-ready dataset for one figure id",
    }
    for mode in MODES:
        p = sub.add_parser(mode, help=helps[mode])
        if mode == "reproduce":
            p.add_argument("figure_id", help=", ".join(FIGURES))
        _common_flags(p)
    return parser


def resolve_config(argv=None, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    ns = vars(build_parser().parse_args(argv))
    degrees = ns.pop("degrees", False)
    values: dict = {}
    if SEED_ENV in environ:
        try:
            values["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    if "config" in ns:
        values.update(load_config_file(ns.pop("config")))
    if degrees:
        for key in ("phi_start", "phi_end"):
            if key in ns:
                ns[key] = math.radians(ns[key])
    values.update(ns)
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    return cfg.validate()


# ---------------------------------------------------------------- output


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return format(float(x), ".17g")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        f = float(x)
        if math.isnan(f):
            return None
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return x


@dataclass
class Dataset:
    columns: list
    records: list  # list of dicts
    summary: dict


def render(cfg: RunConfig, data: Dataset) -> str:
    if cfg.format == "json":
        doc = {"config": cfg.to_json(), "records": data.records, "summary": data.summary}
        return json.dumps(_jsonable(doc), indent=2) + "\n"
    buf = io.StringIO()
    buf.write(",".join(data.columns) + "\n")
    for rec in data.records:
        buf.write(",".join(_num(rec.get(c)) for c in data.columns) + "\n")
    return buf.getvalue()


def _rows(columns, *arrays) -> list:
    return [dict(zip(columns, vals)) for vals in zip(*arrays)]


def _safe(fn, *args):
    try:
        return fn(*args)
    except (ValueError, ConvergenceError):
        return None


def _scan_summary(scheme, source) -> dict:
    out = {
        "fwhm": _safe(bn.fwhm, scheme, source),
        "fwhm_intensity": math.pi,
        "visibility": None,
        "visibility_mean": None,
        "fringe_count": bn.count_fringes(scheme, source),
        "min_sensitivity": None,
        "phi_at_min": None,
    }
    vis = _safe(bn.visibility, scheme, source)
    if vis is not None:
        out["visibility"], out["visibility_mean"] = vis.minimum, vis.mean
    best = _safe(bn.min_sensitivity, scheme, source)
    if best is not None:
        out["min_sensitivity"], out["phi_at_min"] = best.min_sensitivity, best.phi_at_min
    if out["fwhm"]:
        out["narrowing"] = math.pi / out["fwhm"]
    return out


def run_scan(cfg: RunConfig) -> Dataset:
    scheme, source, phi = cfg.scheme(), cfg.source(), cfg.grid()
    cols = ["phi", "response", "variance", "sensitivity"]
    recs = _rows(
        cols,
        phi,
        np.atleast_1d(bn.response(scheme, source, phi)),
        np.atleast_1d(bn.variance(scheme, source, phi)),
        np.atleast_1d(bn.sensitivity(scheme, source, phi)),
    )
    return Dataset(cols, recs, _scan_summary(scheme, source))


def run_mc(cfg: RunConfig) -> Dataset:
    scheme, source, phi = cfg.scheme(), cfg.source(), cfg.grid()
    config = mcsim.McConfig(cfg.samples, cfg.seed, phi, cfg.efficiency, cfg.workers)
    curve = mcsim.simulate_scan(scheme, source, config)
    cols = ["phi", "n_samples", "hits", "response_hat", "std_err"]
    recs = _rows(cols, curve.phi, curve.n_samples, curve.hits, curve.response_hat, curve.std_err)
    seen = source.attenuated(cfg.efficiency) if cfg.efficiency != 1.0 else source
    summary = {"pulls": mcsim.pull_stats(mcsim.pulls(curve, scheme, seen)).to_dict()}
    full_period = cfg.phi_end - cfg.phi_start >= 2 * math.pi - 1e-9
    if full_period:
        found = mcsim.empirical_fringes(curve)
        summary["fringe_count"] = len(found)
        if found:
            vis = mcsim.visibility_from_fringes(found)
            summary["visibility"], summary["visibility_mean"] = vis.minimum, vis.mean
        summary["fwhm"] = _safe(mcsim.empirical_fwhm, curve)
        if summary["fwhm"]:
            summary["narrowing"] = math.pi / summary["fwhm"]
    summary["analytic"] = _scan_summary(scheme, seen)
    return Dataset(cols, recs, summary)


def run_fwhm(cfg: RunConfig) -> Dataset:
    scheme, source = cfg.scheme(), cfg.source()
    width = bn.fwhm(scheme, source)
    closed = _safe(bn.fwhm_closed_form, source)
    rec = {
        "n_photons": source.N,
        "fwhm": width,
        "fwhm_a0_closed_form": closed,
        "fwhm_intensity": math.pi,
        "narrowing": math.pi / width,
    }
    return Dataset(list(rec), [rec], dict(rec))


def run_sens(cfg: RunConfig) -> Dataset:
    scheme, source = cfg.scheme(), cfg.source()
    best = bn.min_sensitivity(scheme, source)
    closed = _safe(bn.sensitivity_min_closed_form, source)
    rt = math.sqrt(source.N)
    rec = {
        "n_photons": source.N,
        "min_sensitivity": best.min_sensitivity,
        "phi_at_min": best.phi_at_min,
        "min_sensitivity_sqrt_n": best.min_sensitivity * rt,
        "snl": 1.0 / rt if rt > 0 else math.inf,
        "closed_form_a0_min": closed.delta_phi_min if closed else None,
        "closed_form_a0_phi": closed.phi_min if closed else None,
    }
    return Dataset(list(rec), [rec], dict(rec))


def run_fringes(cfg: RunConfig) -> Dataset:
    scheme, source = cfg.scheme(), cfg.source()
    found = bn.fringes(scheme, source)
    cols = ["phi", "peak", "trough_left", "trough_right", "visibility"]
    recs = [
        {"phi": f.phi, "peak": f.peak, "trough_left": f.trough_left, "trough_right": f.trough_right,
         "visibility": f.visibility}
        for f in found
    ]
    summary = {"fringe_count": len(found)}
    if found:
        vis = bn.visibility_from_fringes(found)
        summary.update(visibility=vis.minimum, visibility_mean=vis.mean)
    return Dataset(cols, recs, summary)


def run_optimize(cfg: RunConfig) -> Dataset:
    source = cfg.source()
    res = bn.optimize_spacing(source, cfg.a, cfg.visibility_threshold, workers=cfg.workers)
    rec = {
        "n_photons": source.N,
        "visibility_threshold": cfg.visibility_threshold,
        "b": res.b,
        "n_bins": res.n_bins,
        "M": res.M,
        "visibility": res.visibility,
    }
    return Dataset(list(rec), [rec], dict(rec))


def _fig_scan(cfg: RunConfig, n_photons: float) -> Dataset:
    source, scheme = CoherentSource(n_photons), bn.BinaryScheme(0.5)
    phi = cfg.grid()
    cols = ["phi", "response", "variance", "sensitivity", "intensity", "snl"]
    recs = _rows(
        cols,
        phi,
        bn.response(scheme, source, phi),
        bn.variance(scheme, source, phi),
        bn.sensitivity(scheme, source, phi),
        intensity_response(source, phi) / n_photons,
        np.full(phi.size, 1.0 / math.sqrt(n_photons)),
    )
    summary = _scan_summary(scheme, source)
    summary.update(n_photons=n_photons, a=0.5)
    return Dataset(cols, recs, summary)


def _fig2c(cfg: RunConfig) -> Dataset:
    scheme = bn.BinaryScheme(0.5)
    cols = ["n_photons", "fwhm", "fwhm_theory", "rayleigh"]
    recs = [
        {"n_photons": n, "fwhm": bn.fwhm(scheme, n), "fwhm_theory": bn.fwhm_closed_form(n), "rayleigh": math.pi}
        for n in FIG2C_PHOTONS
    ]
    slope, _ = bn.fit_power_law([r["n_photons"] for r in recs if r["n_photons"] >= 100],
                                [r["fwhm"] for r in recs if r["n_photons"] >= 100])
    return Dataset(cols, recs, {"a": 0.5, "n_grid": "default", "fwhm_exponent_large_n": slope})


def _fig2d(cfg: RunConfig) -> Dataset:
    scheme = bn.BinaryScheme(0.5)
    cols = ["n_photons", "min_sensitivity", "theory", "snl", "closed_form_a0"]
    recs = []
    for n in FIG2D_PHOTONS:
        recs.append({
            "n_photons": n,
            "min_sensitivity": bn.min_sensitivity(scheme, n).min_sensitivity,
            "theory": SENSITIVITY_COEFFICIENT / math.sqrt(n),
            "snl": 1.0 / math.sqrt(n),
            "closed_form_a0": bn.sensitivity_min_closed_form(n).delta_phi_min,
        })
    return Dataset(cols, recs, {"a": 0.5, "n_grid": "default", "theory_coefficient": SENSITIVITY_COEFFICIENT})


FIG3_SCHEME = dict(a=0.5, b=3.17, n_bins=5, n_photons=139.0)


def _fig3a(cfg: RunConfig) -> Dataset:
    scheme = bn.MultiScheme(FIG3_SCHEME["a"], FIG3_SCHEME["b"], FIG3_SCHEME["n_bins"])
    n = FIG3_SCHEME["n_photons"]
    phi = cfg.grid()
    q = bn.accepted_probability(scheme, n, phi)
    resp = scheme.lam0 * q
    band = scheme.lam0 * np.sqrt(q * (1 - q) / cfg.samples)
    cols = ["phi", "response", "band_lo", "band_hi", "intensity"]
    recs = _rows(cols, phi, resp, resp - band, resp + band, intensity_response(n, phi) / n)
    vis = bn.visibility(scheme, n)
    summary = dict(FIG3_SCHEME, fringe_count=vis.fringe_count, visibility=vis.minimum,
                   visibility_mean=vis.mean, band="+-1 standard error", samples=cfg.samples)
    return Dataset(cols, recs, summary)


def _fig3b(cfg: RunConfig) -> Dataset:
    scheme = bn.MultiScheme(FIG3_SCHEME["a"], FIG3_SCHEME["b"], FIG3_SCHEME["n_bins"])
    n = FIG3_SCHEME["n_photons"]
    phi = cfg.grid()
    cols = ["phi", "sensitivity", "snl"]
    recs = _rows(cols, phi, bn.sensitivity(scheme, n, phi), np.full(phi.size, 1 / math.sqrt(n)))
    best = bn.min_sensitivity(scheme, n)
    return Dataset(cols, recs, dict(FIG3_SCHEME, min_sensitivity=best.min_sensitivity, phi_at_min=best.phi_at_min))


def fig3c_table(photons=FIG3C_PHOTONS, thresholds=FIG3C_THRESHOLDS, a: float = 0.5, workers=None):
    """Optimised fringe counts per photon number and threshold, plus power-law fits."""
    results = {t: [] for t in thresholds}
    for n in photons:
        table = bn.scan_spacings(n, a, workers=workers)
        for t in thresholds:
            results[t].append(bn.optimize_spacing(n, a, t, candidates=table))
    fits = {t: bn.fit_power_law(photons, [r.M for r in results[t]]) for t in thresholds}
    sqrt_fits = {}
    for t in thresholds:
        m = np.array([r.M for r in results[t]], dtype=float)
        rt = np.sqrt(np.asarray(photons, dtype=float))
        sqrt_fits[t] = float(m @ rt / (rt @ rt))
    return results, fits, sqrt_fits


def _fig3c(cfg: RunConfig) -> Dataset:
    results, fits, sqrt_fits = fig3c_table(FIG3C_PHOTONS, FIG3C_THRESHOLDS, workers=cfg.workers)
    cols = ["n_photons"]
    for t in FIG3C_THRESHOLDS:
        tag = f"{int(round(t * 100)):03d}"
        cols += [f"M_{tag}", f"b_{tag}", f"bins_{tag}", f"visibility_{tag}", f"sqrt_fit_{tag}"]
    recs = []
    for i, n in enumerate(FIG3C_PHOTONS):
        rec = {"n_photons": n}
        for t in FIG3C_THRESHOLDS:
            tag = f"{int(round(t * 100)):03d}"
            r = results[t][i]
            rec.update({f"M_{tag}": r.M, f"b_{tag}": r.b, f"bins_{tag}": r.n_bins, f"visibility_{tag}": r.visibility,
                        f"sqrt_fit_{tag}": sqrt_fits[t] * math.sqrt(n)})
        recs.append(rec)
    summary = {"a": 0.5}
    for t in FIG3C_THRESHOLDS:
        tag = f"{int(round(t * 100)):03d}"
        summary[f"exponent_{tag}"], summary[f"prefactor_{tag}"] = fits[t]
        summary[f"sqrt_prefactor_{tag}"] = sqrt_fits[t]
    return Dataset(cols, recs, summary)


def run_reproduce(cfg: RunConfig) -> Dataset:
    fig = cfg.figure_id
    if fig == "fig2a":
        return _fig_scan(cfg, 19.0)
    if fig == "fig2b":
        return _fig_scan(cfg, 132.0)
    if fig == "fig2c":
        return _fig2c(cfg)
    if fig == "fig2d":
        return _fig2d(cfg)
    if fig == "fig3a":
        return _fig3a(cfg)
    if fig == "fig3b":
        return _fig3b(cfg)
    if fig == "fig3c":
        return _fig3c(cfg)
    raise ConfigError(f"unknown figure id {fig!r}")


RUNNERS = {
    "scan": run_scan,
    "mc": run_mc,
    "fwhm": run_fwhm,
    "sens": run_sens,
    "fringes": run_fringes,
    "optimize": run_optimize,
    "reproduce": run_reproduce,
}


def _fail(kind: str, code: int, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "code": code, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, str(exc))
    try:
        text = render(cfg, RUNNERS[cfg.mode](cfg))
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, str(exc))
    except (ConvergenceError, ValueError, FloatingPointError) as exc:
        return _fail("numeric", EXIT_NUMERIC, str(exc))
    if cfg.output_path:
        try:
            with open(cfg.output_path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            return _fail("io", EXIT_IO, f"cannot write {cfg.output_path}: {exc.strerror}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
