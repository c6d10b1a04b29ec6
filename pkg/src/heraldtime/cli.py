"""Command-line surface for the full pipeline.

Subcommands::

    heraldtime simulate   --config run.cfg --out outdir
    heraldtime fit        events.csv [--config run.cfg] --out outdir
    heraldtime herald     events.csv|--config run.cfg --curve narrowing|centroid|both
    heraldtime optimize   --config run.cfg [--fix-sigma]
    heraldtime landscape  --config run.cfg --which tau1|tau1h_0|tau1h_dt_0
    heraldtime reproduce  table1|fig3a|fig3b|fig4|fig5 --out outdir

Every subcommand is a pure function of its declared inputs: no hidden state,
no network, and reruns with the same config and seed produce byte-identical
output.  ``--set key=value`` overrides any config key (type-checked against
the schema; unknown keys are rejected); ``--help`` lists the full key table
with units.

Exit codes: 0 success, 1 reproduction targets missed or unexpected error,
2 configuration error, 3 numerical non-convergence, 4 I/O error.  Failures
print a machine-readable JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic, herald, reproduce
from .dataio import (
    ConfigError,
    EventFileError,
    ReportError,
    format_schema_help,
    load_config,
    parse_overrides,
    read_events,
    write_events,
    write_report,
    write_table,
    RunConfig,
)
from .fitting import DegenerateDataError, fit as run_fit
from .params import HeraldtimeError
from .sampler import sample_from_source

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4


def _engineering(value: float, unit: str) -> str:
    """Three-significant-figure engineering formatting, e.g. 15.2 ps."""
    prefixes = [(1e12, "T"), (1e9, "G"), (1e6, "M"), (1e3, "k"), (1.0, ""),
                (1e-3, "m"), (1e-6, "u"), (1e-9, "n"), (1e-12, "p"),
                (1e-15, "f")]
    mag = abs(value)
    for scale, prefix in prefixes:
        if mag >= scale or (scale, prefix) == prefixes[-1]:
            return f"{value / scale:.3g} {prefix}{unit}"
    return f"{value:.3g} {unit}"


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    return load_config(args.config, args.set or ())


def _seeded(cfg: RunConfig, args) -> int:
    return int(args.seed) if args.seed is not None else int(cfg.get("sample.seed"))


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    cfg = _load(args)
    cfg.require_source()
    cfg.require_link()
    out = _out_dir(args)
    seed = _seeded(cfg, args)
    events = sample_from_source(cfg.source(), cfg.link(), cfg.detector(),
                                n=cfg.get("sample.n"), seed=seed)
    if cfg.has("meta.delta_lambda"):
        events.metadata["delta_lambda"] = cfg.get("meta.delta_lambda")
    path = out / "events.csv"
    write_events(events, path, unit=args.unit)
    print(f"wrote {events.count} events to {path}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    cfg = load_config(args.config, args.set or ()) if args.config \
        else RunConfig(parse_overrides(args.set or ()))
    events = read_events(args.events)
    result = run_fit(events, cfg.fit_config())
    out = _out_dir(args)
    report = result.summary()
    meta = events.metadata
    source_meta = meta.get("source") if isinstance(meta.get("source"), dict) else {}
    report["input_delta_lambda"] = meta.get("delta_lambda")
    report["input_tau_p"] = source_meta.get("tau_p")
    for key in ("source", "link", "seed"):
        if key in meta:
            report[f"input_{key}"] = meta[key]
    path = out / "fit_report.json"
    if args.format == "csv":
        path = out / "fit_report.csv"
        flat = {k: v for k, v in report.items() if not isinstance(v, dict)}
        write_table(path, ["key", "value"],
                    [[k, json.dumps(v)] for k, v in sorted(flat.items())])
    else:
        write_report(report, path)
    c = result.cov
    print(f"rho_t = {c.rho_t:+.4f}   tau1 = {_engineering(c.tau1, 's')}   "
          f"tau2 = {_engineering(c.tau2, 's')}")
    print(f"narrowing limit sqrt(1-rho_t^2) = "
          f"{math.sqrt(1 - c.rho_t ** 2):.4f}")
    print(f"background level = {result.background_level:.4g}   "
          f"reduced chi^2 = {result.reduced_chisq:.3f}")
    print(f"report: {path}")
    if not result.converged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _cmd_herald(args) -> int:
    out = _out_dir(args)
    cfg = load_config(args.config, args.set or ()) if args.config \
        else RunConfig(parse_overrides(args.set or ()))
    if args.events:
        source = read_events(args.events)
    else:
        cfg.require_source()
        cfg.require_link()
        source = analytic.temporal_covariance(cfg.source(), cfg.link())
    direction = cfg.get("herald.direction")
    center = cfg.get("herald.center")
    written = []
    if args.curve in ("narrowing", "both"):
        widths = cfg.grid("herald.width", scale="log")
        curve = herald.narrowing_curve(source, center=center, widths=widths,
                                       herald_on=direction)
        rows = [[w, r] + ([e] if curve.std_errors is not None else [])
                for w, r, e in zip(
                    curve.widths, curve.ratios,
                    curve.std_errors if curve.std_errors is not None
                    else np.zeros_like(curve.ratios))]
        header = ["width_s", "ratio"] + (
            ["std_error"] if curve.std_errors is not None else [])
        path = out / "narrowing_curve.csv"
        write_table(path, header, rows)
        written.append(path)
        print(f"narrowing asymptote = {curve.asymptote:.4f}")
    if args.curve in ("centroid", "both"):
        centers = cfg.grid("herald.center", scale="linear")
        cfg.require("herald.width", why="centroid curve window width")
        curve = herald.centroid_curve(source, width=cfg.get("herald.width"),
                                      centers=centers, herald_on=direction)
        rows = [[c, m] + ([e] if curve.std_errors is not None else [])
                for c, m, e in zip(
                    curve.centers, curve.means,
                    curve.std_errors if curve.std_errors is not None
                    else np.zeros_like(curve.means))]
        header = ["center_s", "mean_s"] + (
            ["std_error_s"] if curve.std_errors is not None else [])
        path = out / "centroid_curve.csv"
        write_table(path, header, rows)
        written.append(path)
        print(f"centroid slope = {curve.slope():+.5g}")
    for path in written:
        print(f"table: {path}")
    if args.svg:
        _render_curves_svg(written)
    return EXIT_OK


def _cmd_optimize(args) -> int:
    cfg = _load(args)
    cfg.require_link()
    link = cfg.link()
    sigma_fixed = cfg.get("source.sigma") if args.fix_sigma else None
    if args.fix_sigma and sigma_fixed is None:
        raise ConfigError("--fix-sigma requires source.sigma in the config")
    report = analytic.optimum(link, sigma_fixed=sigma_fixed)
    print(f"tau_p_opt = {_engineering(report.tau_p_opt, 's')}")
    if report.sigma_opt is not None:
        print(f"sigma_opt = {_engineering(report.sigma_opt, 'Hz')} "
              "(formula units 1/s)")
    print(f"rho_opt   = {report.rho_opt:+.4f}")
    print(f"tau1_min  = {_engineering(report.tau1_min, 's')}")
    print(f"tau1h_min = {_engineering(report.tau1h_min, 's')}")
    print(f"tau1h_dt  = {_engineering(report.tau1h_dt_abs, 's')}")
    out = _out_dir(args)
    payload = {
        "tau_p_opt_s": report.tau_p_opt,
        "sigma_opt_per_s": report.sigma_opt,
        "rho_opt": report.rho_opt,
        "tau1_min_s": report.tau1_min,
        "tau1h_min_s": report.tau1h_min,
        "tau1_abs_s": report.tau1_abs,
        "tau1h_dt_abs_s": report.tau1h_dt_abs,
        "link_beta_s2_per_m": link.beta,
        "link_length_m": link.length,
        "sigma_fixed_per_s": sigma_fixed,
    }
    if args.format == "csv":
        path = out / "optimum.csv"
        write_table(path, ["key", "value"],
                    [[k, json.dumps(v)] for k, v in sorted(payload.items())])
    else:
        path = out / "optimum.json"
        write_report(payload, path)
    print(f"report: {path}")
    return EXIT_OK


def _cmd_landscape(args) -> int:
    cfg = _load(args)
    cfg.require_link()
    tau_p = cfg.grid("landscape.tau_p", scale="log")
    sigma = cfg.grid("landscape.sigma", scale="log")
    grid = analytic.landscape(tau_p, sigma, cfg.link(), args.which)
    out = _out_dir(args)
    header = ["sigma_per_s"] + [repr(float(tp)) for tp in tau_p]
    rows = [[s] + list(row) for s, row in zip(sigma, grid)]
    path = out / f"landscape_{args.which}.csv"
    write_table(path, header, rows)
    print(f"landscape table ({grid.shape[0]}x{grid.shape[1]} cells, widths "
          f"in s): {path}")
    if args.svg:
        _render_heatmap_svg(path, tau_p, sigma, grid, args.which)
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    out = _out_dir(args)
    seed = int(args.seed) if args.seed is not None else reproduce.DEFAULT_SEED
    bundle = reproduce.run_recipe(args.name, seed=seed)
    for name, (header, rows) in sorted(bundle.tables.items()):
        write_table(out / f"{name}.csv", header, rows)
    write_report(bundle.summary(), out / f"{bundle.name}_summary.json")
    for check in bundle.checks:
        print(check.line())
    print(f"{bundle.name}: {'PASS' if bundle.passed else 'FAIL'} "
          f"({sum(c.passed for c in bundle.checks)}/{len(bundle.checks)} "
          f"checks), tables in {out}")
    return EXIT_OK if bundle.passed else EXIT_FAIL


# --------------------------------------------------------------------------
# Optional SVG rendering (static, data tables stay the primary output)
# --------------------------------------------------------------------------

def _matplotlib():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        return plt
    except ImportError as exc:
        raise ConfigError(
            "--svg requires matplotlib (pip install heraldtime[plot])") from exc


def _render_curves_svg(csv_paths) -> None:
    plt = _matplotlib()
    for path in csv_paths:
        rows = np.genfromtxt(path, delimiter=",", names=True)
        fields = rows.dtype.names
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(rows[fields[0]], rows[fields[1]], "-o", ms=3)
        ax.set_xlabel(fields[0])
        ax.set_ylabel(fields[1])
        fig.tight_layout()
        svg = Path(path).with_suffix(".svg")
        fig.savefig(svg)
        plt.close(fig)
        print(f"plot: {svg}")


def _render_heatmap_svg(csv_path, tau_p, sigma, grid, which) -> None:
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(5, 4))
    mesh = ax.pcolormesh(tau_p, sigma, np.log10(grid), shading="auto")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("tau_p [s]")
    ax.set_ylabel("sigma [1/s]")
    fig.colorbar(mesh, ax=ax, label=f"log10({which} / s)")
    fig.tight_layout()
    svg = Path(csv_path).with_suffix(".svg")
    fig.savefig(svg)
    plt.close(fig)
    print(f"plot: {svg}")


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heraldtime",
        description="Simulate, fit and optimize photon-pair arrival-time "
                    "statistics in dispersive fiber links.",
        epilog=format_schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_events=False, events_optional=False):
        if needs_events:
            p.add_argument("events", help="event CSV file")
        elif events_optional:
            p.add_argument("events", nargs="?", default=None,
                           help="event CSV file (omit to use the analytic model "
                                "from --config)")
        p.add_argument("--config", help="run configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the random seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker hint; results are deterministic and "
                            "independent of this value")
        p.add_argument("--format", choices=("csv", "json"), default="json",
                       help="summary report format (fit, optimize); curve and "
                            "landscape tables are always CSV")

    p = sub.add_parser("simulate", help="draw synthetic coincidence events")
    common(p)
    p.add_argument("--unit", default="ps", help="time unit for the event file")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="recover the joint Gaussian parameters")
    common(p, needs_events=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("herald", help="windowed conditional curves")
    common(p, events_optional=True)
    p.add_argument("--curve", choices=("narrowing", "centroid", "both"),
                   default="both")
    p.add_argument("--svg", action="store_true", help="also render SVG plots")
    p.set_defaults(func=_cmd_herald)

    p = sub.add_parser("optimize", help="optimal source settings for a link")
    common(p)
    p.add_argument("--fix-sigma", action="store_true",
                   help="hold source.sigma fixed, optimize the pump only")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("landscape", help="width landscape over (tau_p, sigma)")
    common(p)
    p.add_argument("--which", choices=("tau1", "tau1h_0", "tau1h_dt_0"),
                   default="tau1")
    p.add_argument("--svg", action="store_true", help="also render SVG heatmap")
    p.set_defaults(func=_cmd_landscape)

    p = sub.add_parser("reproduce",
                       help="regenerate a headline result against stored targets")
    common(p)
    p.add_argument("name", choices=sorted(reproduce.RECIPES))
    p.set_defaults(func=_cmd_reproduce)

    return parser


def _emit_error(kind: str, exc: Exception) -> None:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _emit_error("config", exc)
        return EXIT_CONFIG
    except (EventFileError, ReportError, OSError) as exc:
        _emit_error("io", exc)
        return EXIT_IO
    except DegenerateDataError as exc:
        _emit_error("numerical", exc)
        return EXIT_NONCONVERGENCE
    except HeraldtimeError as exc:
        _emit_error("config", exc)
        return EXIT_CONFIG
    except ValueError as exc:
        _emit_error("config", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
