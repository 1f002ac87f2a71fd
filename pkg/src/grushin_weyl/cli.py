"""Command-line pipelines.

Each subcommand reads a flat ``key = value`` config, runs one module
pipeline, and writes CSV tables, a JSON report, a gnuplot script and a
``manifest.json`` that echoes the fully resolved config. The exit status is
0 when every check of the pipeline passes, 1 when a check fails, and the
error's own code when a computation raises.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AcceptanceFailure, ConfigError, GrushinError
from .geometry import (
    GrushinParams,
    Point,
    boundary_distance_constant,
    dilation_check,
    distance_field,
    padded_grid,
    sample_pairs,
)
from .heat import (
    covering_sum_circle,
    covering_tail,
    heat_trace,
    karamata_limits,
    t_min,
)
from .spectrum import (
    Space,
    Spectrum,
    assemble_spectrum,
    ideal_model_spectrum,
    solve_modes,
    ModeProblem,
    RadialGrid,
    ybar_truncation,
)
from .volumes import ball_bracket, ball_volume, ratio_table
from .weyl import weyl_fit

COMMON = {
    "alpha": 0.5,
    "n": 9,
    "c_m": 1.0,
    "spectrum.period": 2 * math.pi,
}

DEFAULTS = {
    "geodesic": {
        "geodesic.sources": 4,
        "geodesic.targets_per_source": 5,
        "geodesic.lambdas": "0.5,2,4",
        "geodesic.spacing": 0.01,
        "geodesic.tolerance": 0.02,
        "geodesic.source_r": 1.0,
        "geodesic.source_v": 0.0,
        "geodesic.field_r_max": 2.0,
        "geodesic.field_v_max": 2.0,
        "geodesic.field_resolution": 64,
        "geodesic.boundary_resolution": 32,
    },
    "volumes": {
        "volumes.taus": "0.5,0.2,0.1,0.05,0.02",
        "volumes.resolution": 96,
        "volumes.bracket_samples": 10,
        "volumes.asymptote_tau": 0.05,
        "volumes.asymptote_band": 0.05,
    },
    "spectrum": {
        "spectrum.space": "Ybar",
        "spectrum.lambda_max": 45.0,
        "spectrum.k_max": 3,
        "spectrum.grid.spacing": 0.02,
        "spectrum.oracle_tolerance": 1e-4,
        "spectrum.localization_radius": 0.0,
    },
    "weyl": {
        "weyl.input": "",
        "weyl.complete_below": 0.0,
        "weyl.model": "",
        "weyl.space": "Xdouble",
        "weyl.lambda_max": 2000.0,
        "weyl.law": "log_corrected",
        "weyl.beta": 0.0,
        "weyl.dimension": 0,
        "weyl.tolerance": 0.15,
        "weyl.grid.spacing": 0.0,
    },
    "heattrace": {
        "heat.space": "Xdouble",
        "heat.lambda_max": 2000.0,
        "heat.samples": 20,
        "heat.law": "log",
        "heat.beta": 0.0,
        "heat.tolerance": 0.15,
        "heat.grid.spacing": 0.0,
    },
    "covercheck": {
        "cover.t_values": "0.01,0.03,0.1,0.3,1",
        "cover.terms": 50,
        "cover.x": 0.0,
        "cover.y": 0.0,
        "cover.tolerance": 1e-10,
        "cover.tail_r0": 0.0,
        "cover.tail_s": "0.3,0.2,0.1",
        "cover.tail_terms": 6,
        "cover.tail_resolution": 96,
    },
}

_PI_FORM = re.compile(r"^\s*([0-9.eE+-]*)\s*\*?\s*pi\s*$")


def _number(text: str, key: str) -> float:
    text = str(text).strip()
    match = _PI_FORM.match(text)
    try:
        if match:
            coef = match.group(1)
            return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
        return float(text)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot read {text!r} as a number") from None


def _coerce(key: str, default, raw):
    if isinstance(default, bool):
        if str(raw).lower() in ("1", "true", "yes"):
            return True
        if str(raw).lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"config key {key!r}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        value = _number(raw, key)
        if value != int(value):
            raise ConfigError(f"config key {key!r}: expected an integer, got {raw!r}")
        return int(value)
    if isinstance(default, float):
        return _number(raw, key)
    return str(raw).strip()


def read_config(path: str | None) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    if not path:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key] = value
    return out


def resolve_config(command: str, raw: dict[str, str]) -> dict:
    schema = {**COMMON, **DEFAULTS[command]}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r} for '{command}'")
    return {key: _coerce(key, default, raw[key]) if key in raw else default for key, default in schema.items()}


def _floats(text, key) -> list[float]:
    return [_number(part, key) for part in str(text).split(",") if part.strip()]


def _params(cfg) -> GrushinParams:
    return GrushinParams(cfg["alpha"], cfg["n"], cfg["c_m"], cfg["spectrum.period"])


@dataclass
class Run:
    """Output directory bookkeeping for one pipeline invocation."""

    command: str
    out: Path
    config: dict
    refine: int
    workers: int
    files: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    def csv(self, name: str, header, rows):
        path = self.out / name
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        self.files.append(name)

    def json(self, name: str, payload):
        (self.out / name).write_text(json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n")
        self.files.append(name)

    def plot(self, name: str, lines):
        (self.out / name).write_text("\n".join(["set datafile separator ','", *lines]) + "\n")
        self.files.append(name)

    def check(self, name: str, ok: bool):
        self.checks[name] = bool(ok)

    def manifest(self, status: str, error: str | None = None):
        payload = {
            "command": self.command,
            "version": __version__,
            "config": self.config,
            "refine": self.refine,
            "workers": self.workers,
            "files": self.files,
            "checks": self.checks,
            "status": status,
        }
        if error:
            payload["error"] = error
        (self.out / "manifest.json").write_text(json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n")


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# ---------------------------------------------------------------- pipelines

def cmd_geodesic(run: Run):
    cfg = run.config
    params = _params(cfg)
    source = Point(cfg["geodesic.source_r"], cfg["geodesic.source_v"])
    grid = padded_grid(params, (0.0, cfg["geodesic.field_r_max"]),
                       (-cfg["geodesic.field_v_max"], cfg["geodesic.field_v_max"]),
                       resolution=cfg["geodesic.field_resolution"], anchor=source)
    field_ = distance_field(params, source, grid, tolerance=None)
    run.csv("distance_field.csv", ["r", "v", "distance"], field_.rows())

    groups = sample_pairs(params, cfg["geodesic.sources"], cfg["geodesic.targets_per_source"])
    lambdas = _floats(cfg["geodesic.lambdas"], "geodesic.lambdas")
    levels = max(1, run.refine)
    reports = [dilation_check(params, groups, lambdas, spacing=cfg["geodesic.spacing"] / 2**i)
               for i in range(levels)]
    rows = []
    for rep in reports:
        for i, errs in enumerate(rep.errors):
            rows.extend((rep.spacing, i, lam, e) for lam, e in zip(rep.lambdas, errs))
    run.csv("dilation.csv", ["spacing", "pair", "lambda", "relative_error"], rows)
    max_errors = [rep.max_errors for rep in reports]
    ratios = [(a / b).tolist() for a, b in zip(max_errors, max_errors[1:])]
    tol = cfg["geodesic.tolerance"]
    run.check("dilation_within_tolerance", np.all(max_errors[0] <= tol))
    if levels > 1:
        run.check("dilation_error_decreases", all(np.all(b <= a) for a, b in zip(max_errors, max_errors[1:])))

    const = boundary_distance_constant(params, cfg["geodesic.boundary_resolution"])
    run.json("geodesic.json", {
        "dilation": {
            "lambdas": lambdas,
            "spacings": [rep.spacing for rep in reports],
            "max_relative_error": max_errors,
            "convergence_ratios": ratios,
            "tolerance": tol,
        },
        "distance_field": {"source": [source.r, source.v], "resolution_indicator": field_.resolution_indicator},
        "boundary_constant": {"value": const.value, "error": const.error, "estimates": const.estimates,
                              "resolutions": const.resolutions},
    })
    run.plot("plot_geodesic.gp", [
        "set xlabel 'r'", "set ylabel 'v'", "set view map",
        "splot 'distance_field.csv' every ::1 using 1:2:3 with points palette pt 5 ps 0.3 title 'distance'",
    ])


def cmd_volumes(run: Run):
    cfg = run.config
    params = _params(cfg)
    params.require_integrable()
    taus = _floats(cfg["volumes.taus"], "volumes.taus")
    table = ratio_table(params, taus, resolution=cfg["volumes.resolution"])
    k = 2 * params.alpha
    asym = table.f_values * math.pi / (4.0 * table.tau_values**k)
    run.csv("ratio_table.csv", ["tau", "f", "G", "f_error", "f_pi_over_4tau2a"],
            zip(table.tau_values, table.f_values, table.G_values, table.f_errors, asym))
    band = cfg["volumes.asymptote_band"]
    small = table.tau_values <= cfg["volumes.asymptote_tau"]
    run.check("f_asymptote", bool(np.all(np.abs(asym[small] - 1.0) <= band)))

    rows, ok = [], True
    count = cfg["volumes.bracket_samples"]
    for i in range(count):
        # deterministic spread of (r0, s) with r0 > 2 s
        s = 0.05 + 0.45 * i / max(1, count - 1)
        r0 = s * (2.2 + 5.0 * ((i * 0.618033988749895) % 1.0))
        vol = ball_volume(params, Point(r0, 0.0), s, resolution=cfg["volumes.resolution"])
        lo, hi = ball_bracket(params, r0, s)
        inside = lo - vol.error_estimate <= vol.value <= hi + vol.error_estimate
        ok &= inside
        rows.append((r0, s, vol.value, vol.error_estimate, lo, hi, int(inside)))
    run.csv("ball_bracket.csv", ["r0", "s", "volume", "error_estimate", "lower", "upper", "inside"], rows)
    run.check("ball_bracket", ok)
    run.json("volumes.json", {"asymptote_band": band, "asymptote": dict(zip(map(str, taus), asym.tolist())),
                              "bracket_all_inside": ok})
    run.plot("plot_volumes.gp", [
        "set logscale x", "set xlabel 'tau'",
        "plot 'ratio_table.csv' every ::1 using 1:5 with linespoints title 'f pi / (4 tau^(2 alpha))'",
    ])


def _spectrum_from_config(run: Run, params, space_key: str, lam_key: str, spacing_key: str) -> Spectrum:
    """Assemble a spectrum; a zero spacing picks the default, each ``--refine`` level halves it."""
    cfg = run.config
    spacing = cfg[spacing_key] or None
    if spacing:
        spacing = spacing / 2 ** max(0, run.refine - 1)
    return assemble_spectrum(params, cfg[space_key], cfg[lam_key], spacing=spacing, workers=run.workers)


def cmd_spectrum(run: Run):
    cfg = run.config
    params = _params(cfg)
    lam_max = cfg["spectrum.lambda_max"]
    space = cfg["spectrum.space"]
    spacing = cfg["spectrum.grid.spacing"] / 2 ** max(0, run.refine - 1)
    if space == "ideal":
        spec = ideal_model_spectrum(lam_max)
    elif Space(space) is Space.YBAR:
        k_max = cfg["spectrum.k_max"]
        if k_max < 1:
            raise ConfigError("config key 'spectrum.k_max': Ybar needs k_max >= 1")
        parts = []
        for k in range(1, k_max + 1):
            R = ybar_truncation(params, k, lam_max)
            sol = solve_modes(params, ModeProblem(Space.YBAR, k, "Neumann", RadialGrid(spacing, R)), lam_max)
            parts.append((sol.eigenvalues, np.full(len(sol), k), np.arange(len(sol)), sol.convergence))
        lam = np.concatenate([p[0] for p in parts])
        spec = Spectrum(lam, np.full(lam.size, 2), np.concatenate([p[1] for p in parts]),
                        np.concatenate([p[2] for p in parts]), np.full(lam.size, "Neumann"), lam_max,
                        np.concatenate([p[3] for p in parts]))
        if abs(params.alpha - 0.5) < 1e-12 and abs(params.period - 2 * math.pi) < 1e-12:
            exact = 4.0 * spec.k * (spec.radial_index + 1)
            worst = float(np.max(np.abs(spec.lam / exact - 1.0))) if spec.lam.size else 0.0
            run.check("oracle_4km", worst <= cfg["spectrum.oracle_tolerance"])
    else:
        spec = assemble_spectrum(params, space, lam_max, spacing=spacing,
                                 localization_radius=cfg["spectrum.localization_radius"] or None,
                                 workers=run.workers)
        run.check("ground_state_zero", spec.lam.size > 0 and spec.lam[0] == 0.0 and spec.mult[0] == 1)
    run.csv("spectrum.csv", ["lambda", "mult", "k", "radial_index", "bc", "convergence"],
            ((l, m, k, i, b, c) for (l, m, k, i, b), c in zip(spec.rows(), spec.convergence)))
    run.csv("counting.csv", ["lambda", "N"], zip(spec.lam, spec.counting(spec.lam)))
    run.json("spectrum.json", {"entries": len(spec), "total_count": spec.total_count,
                               "complete_below": spec.complete_below,
                               "max_convergence_estimate": float(spec.convergence.max()) if len(spec) else 0.0})
    run.plot("plot_spectrum.gp", [
        "set xlabel 'lambda'", "set ylabel 'N(lambda)'",
        "plot 'counting.csv' every ::1 using 1:2 with steps title 'N'",
    ])


def _read_spectrum_csv(path: str, complete_below: float) -> Spectrum:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"config key 'weyl.input': cannot read {path}: {exc}") from None
    if not rows or "lambda" not in rows[0]:
        raise ConfigError(f"config key 'weyl.input': {path} has no 'lambda' column")
    lam = np.array([float(r["lambda"]) for r in rows])
    mult = np.array([int(r.get("mult") or 1) for r in rows])
    k = np.array([int(r.get("k") or 0) for r in rows])
    idx = np.array([int(r.get("radial_index") or 0) for r in rows])
    bc = np.array([r.get("bc") or "-" for r in rows])
    return Spectrum(lam, mult, k, idx, bc, complete_below or float(lam.max()))


def cmd_weyl(run: Run):
    cfg = run.config
    params = _params(cfg)
    if cfg["weyl.input"]:
        spec = _read_spectrum_csv(cfg["weyl.input"], cfg["weyl.complete_below"])
    elif cfg["weyl.model"] == "ideal":
        spec = ideal_model_spectrum(cfg["weyl.lambda_max"])
    else:
        spec = _spectrum_from_config(run, params, "weyl.space", "weyl.lambda_max", "weyl.grid.spacing")
    fit = weyl_fit(spec, cfg["weyl.law"], beta=cfg["weyl.beta"] or None, dimension=cfg["weyl.dimension"] or None,
                   tolerance=cfg["weyl.tolerance"], strict=False)
    grid = np.geomspace(*fit.window, 200)
    run.csv("counting.csv", ["lambda", "N"], zip(grid, spec.counting(grid)))
    run.json("fit.json", fit.report())
    run.check("plateau", fit.plateau_ok)
    run.plot("plot_weyl.gp", [
        "set logscale x", "set xlabel 'lambda'", "set ylabel 'N / (lambda log lambda)'",
        "plot 'counting.csv' every ::1 using 1:($2/($1*log($1))) with lines title 'N/(lambda log lambda)'",
    ])


def cmd_heattrace(run: Run):
    cfg = run.config
    params = _params(cfg)
    spec = _spectrum_from_config(run, params, "heat.space", "heat.lambda_max", "heat.grid.spacing")
    tm = t_min(spec)
    ts = np.geomspace(tm, 100.0 * tm, cfg["heat.samples"])
    series = heat_trace(spec, ts)
    run.csv("trace.csv", ["t", "Z", "truncation_error"], series.rows())
    result = karamata_limits(spec, cfg["heat.beta"] or None, cfg["heat.law"], tolerance=cfg["heat.tolerance"],
                             strict=False)
    run.json("karamata.json", {
        "law": result.law.value, "beta": result.beta, "heat_limit": result.heat_limit,
        "counting_limit": result.counting_limit, "ratio": result.ratio,
        "heat_variation": result.heat_variation, "counting_variation": result.counting_variation,
        "plateau_ok": result.plateau_ok, "heat_window": result.heat_window,
        "counting_window": result.counting_window, "t_min": tm,
    })
    run.check("tail_below_one_percent", bool(np.all(series.truncation_error <= 0.01 * series.Z_values)))
    run.check("plateau", result.plateau_ok)
    run.plot("plot_heattrace.gp", [
        "set logscale x", "set xlabel 't'", "set ylabel 't Z(t)'",
        "plot 'trace.csv' every ::1 using 1:($1*$2) with linespoints title 't Z(t)'",
    ])


def cmd_covercheck(run: Run):
    cfg = run.config
    params = _params(cfg)
    ts = _floats(cfg["cover.t_values"], "cover.t_values")
    rows, worst = [], 0.0
    for t in ts:
        lattice, fourier = covering_sum_circle(t, cfg["cover.x"], cfg["cover.y"], cfg["cover.terms"])
        rows.append((t, lattice, fourier, abs(lattice - fourier)))
        worst = max(worst, abs(lattice - fourier))
    run.csv("theta.csv", ["t", "lattice_sum", "fourier_sum", "residual"], rows)
    run.check("theta_identity", worst <= cfg["cover.tolerance"])

    s_values = _floats(cfg["cover.tail_s"], "cover.tail_s")
    first = covering_tail(params, cfg["cover.tail_r0"], s_values[0], terms=cfg["cover.tail_terms"],
                          resolution=cfg["cover.tail_resolution"])
    tails = [covering_tail(params, cfg["cover.tail_r0"], s, terms=cfg["cover.tail_terms"],
                           distances=first.distances) for s in s_values]
    x = 1.0 / np.array(s_values) ** 2
    y = np.log([t.bound for t in tails])
    slope, intercept = np.polyfit(x, y, 1)
    affine_residual = float(np.max(np.abs(slope * x + intercept - y) / np.abs(y)))
    run.csv("covering_tail.csv", ["s", "bound", "log_bound"], zip(s_values, [t.bound for t in tails], y))
    run.check("tail_slope_negative", slope < 0)
    run.json("covercheck.json", {
        "theta_max_residual": worst, "tolerance": cfg["cover.tolerance"],
        "tail": {"slope_in_inverse_s2": slope, "intercept": intercept, "relative_affine_residual": affine_residual,
                 "distances": first.distances, "C_LY": first.C_LY},
    })
    run.plot("plot_covercheck.gp", [
        "set xlabel '1/s^2'", "set ylabel 'log bound'",
        "plot 'covering_tail.csv' every ::1 using (1/$1**2):3 with linespoints title 'covering tail'",
    ])


COMMANDS = {
    "geodesic": cmd_geodesic,
    "volumes": cmd_volumes,
    "spectrum": cmd_spectrum,
    "weyl": cmd_weyl,
    "heattrace": cmd_heattrace,
    "covercheck": cmd_covercheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grushin-weyl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", default=f"out-{name}", help="output directory")
        p.add_argument("--refine", type=int, default=1, help="refinement levels (each halves the grid spacing)")
        p.add_argument("--workers", type=int, default=1, help="worker threads for mode solves")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args.command, read_config(args.config))
        if args.refine < 1 or args.workers < 1:
            raise ConfigError("--refine and --workers must be at least 1")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = Run(args.command, out, config, args.refine, args.workers)
    try:
        COMMANDS[args.command](run)
    except GrushinError as exc:
        run.manifest("FAILED", f"{type(exc).__name__}: {exc}")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # unexpected failure: still leave a marked manifest behind
        run.manifest("FAILED", f"{type(exc).__name__}: {exc}")
        traceback.print_exc()
        return GrushinError.exit_code
    failed = [name for name, ok in run.checks.items() if not ok]
    run.manifest("FAILED" if failed else "OK", f"checks failed: {', '.join(failed)}" if failed else None)
    for name, ok in run.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return AcceptanceFailure.exit_code if failed else 0


if __name__ == "__main__":
    sys.exit(main())
