"""Command-line interface: ``python -m spdepeaks <command> [options]``.

Commands
--------
bounds    theoretical thresholds and growth-index intervals -> bounds.json
oracle    exact second-moment field (linear sigma) -> moments.csv, growth_index.csv
simulate  Monte Carlo moment fields -> moments.csv (+ growth_index.csv)
estimate  growth-index report from one or more moments.csv files
validate  check a configuration (or CSV inputs) and print the resolved plan

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from . import bounds as B
from .config import ConfigError, RunConfig, load_config
from .estimate import EstimateError, MomentField, growth_index_estimate
from .grid import GridError, resolve
from .io import (CSVFormatError, RunManifest, canonical_hash, output_entries, read_moments_csv,
                 write_growth_csv, write_json, write_moments_csv)
from .kernels import Wave
from .levy import AliasingError, Brownian, QuadratureError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _finite(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else str(v)


# ---------------------------------------------------------------------------
# Commands (pure functions of a config; the CLI wraps them with file output)
# ---------------------------------------------------------------------------

def cmd_bounds(cfg: RunConfig) -> dict:
    """All thresholds and intervals that apply to the configured equation."""
    eq, sig, nu = cfg.equation, cfg.sigma, cfg.run.bounds_nu
    z = B.burkholder_constant(nu).z_nu
    cs = [0.0, 0.5, 1.0]
    rep = {
        "equation": eq.name,
        "sigma": {"lip": sig.lip, "lower_slope": sig.lower_slope},
        "nu": nu,
        "burkholder_z": z,
    }
    alphas = np.linspace(0.0, 1.0, 21)
    betas = np.linspace(0.0, 0.2, 11)
    if isinstance(eq, Wave):
        k = eq.kappa
        rep["threshold_wave"] = [
            {"c": c, **vars(B.moment_threshold_wave(k, sig.lip, nu, c))} for c in cs
        ]
        rep["lambda_exact_wave"] = B.lambda_exact_wave(k)
        alphas = alphas * k
        betas = betas * k
    else:
        model = eq.model
        rep["threshold_general"] = [
            {"c": c, "value": B.moment_threshold_general(model, sig, nu, c)} for c in cs
        ]
        rep["lambda_upper_general"] = B.lambda_upper_general(model, sig, nu)
        if isinstance(model, Brownian):
            rep["threshold_heat"] = [
                {"c": c, "value": B.moment_threshold_heat(model.kappa, sig.lip, c)} for c in cs
            ]
            iv = B.lambda_bounds_heat(sig)
            rep["lambda_bounds_heat"] = {"lower": iv.lower, "upper": iv.upper}
    if sig.lower_slope > 0 and (isinstance(eq, Wave) or isinstance(eq.model, Brownian)):
        region = B.lower_condition_region(eq, sig, alphas, betas)
        rep["lower_condition"] = {
            "alphas": alphas.tolist(), "betas": betas.tolist(),
            "feasible": region.astype(int).tolist(),
            "max_certified_alpha": float(alphas[region.any(axis=1)].max()) if region.any() else 0.0,
        }
    return rep


def theory_marks(cfg: RunConfig) -> dict:
    """Reference speeds for plots: the exact wave index or the heat interval."""
    if isinstance(cfg.equation, Wave):
        return {"exact": B.lambda_exact_wave(cfg.equation.kappa)}
    if isinstance(cfg.equation.model, Brownian):
        iv = B.lambda_bounds_heat(cfg.sigma)
        return {"lower": iv.lower, "upper": iv.upper}
    return {"upper": B.lambda_upper_general(cfg.equation.model, cfg.sigma, cfg.run.bounds_nu)}


def cmd_oracle(cfg: RunConfig):
    from .oracle import oracle_growth_rate, solve_second_moment

    field = solve_second_moment(cfg.renewal_problem())
    report = growth_index_estimate(field, cfg.alphas(), cfg.run.window, cfg.run.delta, cfg.run.center)
    try:
        rate = oracle_growth_rate(field, cfg.run.window)
    except EstimateError:
        rate = math.nan
    return field, report, rate


def cmd_simulate(cfg: RunConfig, workers: Optional[int] = None):
    from .simulate import simulate_ensemble

    sim = cfg.sim_config()
    if sim.n_paths < 2:
        raise ConfigError("run.n_paths: simulate needs at least 2 paths")
    fields = simulate_ensemble(sim, workers=workers)
    report = None
    primary = _primary(fields)
    try:
        report = growth_index_estimate(primary, cfg.alphas(), cfg.run.window, cfg.run.delta, cfg.run.center)
    except EstimateError:
        pass
    return fields, report


def _primary(fields: List[MomentField]) -> MomentField:
    for f in fields:
        if f.nu == 2.0:
            return f
    return min(fields, key=lambda f: f.nu)


def default_alphas(field: MomentField, center: float = 0.0) -> np.ndarray:
    T = float(field.times[-1])
    if T <= 0:
        raise EstimateError("the field has no positive times")
    reach = float(np.max(np.abs(field.xs - center))) / T
    return np.linspace(0.0, reach, 76)


def cmd_estimate(fields: List[MomentField], cfg: Optional[RunConfig] = None):
    out = []
    for f in fields:
        if cfg is not None:
            alphas, w, d, c = cfg.alphas(), cfg.run.window, cfg.run.delta, cfg.run.center
        else:
            from .estimate import DEFAULT_DELTA, DEFAULT_WINDOW

            alphas, w, d, c = default_alphas(f), DEFAULT_WINDOW, DEFAULT_DELTA, 0.0
        out.append(growth_index_estimate(f, alphas, w, d, c))
    return out


def plan(cfg: RunConfig, command: str) -> dict:
    """Resolved grid and run sizes, without computing anything."""
    eq = cfg.equation
    g = resolve(cfg.grid, eq, cfg.initial, cfg.sigma.lip, sampled=command == "simulate")
    p = {
        "command": command, "equation": eq.name,
        "grid": {"dt": g.dt, "dx": g.dx, "T": g.T, "L": g.L, "n_steps": g.n_steps,
                 "n_points": g.n_cells, "saved_times": int(g.saved_steps().size)},
        "alpha_grid": {"n": int(cfg.alphas().size), "min": float(cfg.alphas().min()),
                       "max": float(cfg.alphas().max())},
    }
    if command == "simulate":
        sim = cfg.sim_config()
        p["simulate"] = {"scheme": sim.scheme, "n_paths": sim.n_paths, "seed": sim.seed,
                         "noise_refine": sim.noise_refine, "nus": list(sim.nus),
                         "config_hash": sim.config_hash}
    if command == "oracle":
        cfg.renewal_problem()
    return p


# ---------------------------------------------------------------------------
# Plots (optional; matplotlib is imported only here)
# ---------------------------------------------------------------------------

def write_plots(out: Path, field: MomentField, report, marks: Optional[dict] = None,
                stem: str = "") -> List[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .estimate import region_sup

    files = []
    fig, ax = plt.subplots(figsize=(6, 4))
    picks = np.unique(np.linspace(0, report.alpha_grid.size - 1, 8).round().astype(int))
    for k in picks:
        a = report.alpha_grid[k]
        s = region_sup(field, a)
        ok = np.isfinite(s) & (s > 0)
        if ok.any():
            ax.plot(field.times[ok], np.log(s[ok]), label=f"alpha={a:.3g}")
    ax.set_xlabel("t")
    ax.set_ylabel(f"ln sup E|u|^{field.nu:g} over |x| >= alpha t")
    ax.legend(fontsize=7)
    fig.tight_layout()
    p = out / f"{stem}log_sup_moment.svg"
    fig.savefig(p)
    plt.close(fig)
    files.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    ok = np.isfinite(report.slopes)
    ax.errorbar(report.alpha_grid[ok], report.slopes[ok], yerr=report.slope_ses[ok], fmt=".", ms=3)
    ax.axhspan(-report.delta, report.delta, color="0.9")
    for name, v in (marks or {}).items():
        if v is not None:
            ax.axvline(v, ls="--", color="k" if name == "exact" else "r", lw=0.8)
            ax.text(v, ax.get_ylim()[1], name, fontsize=7, va="top")
    ax.set_xlabel("alpha")
    ax.set_ylabel("trailing-window slope")
    fig.tight_layout()
    p = out / f"{stem}slope_vs_alpha.svg"
    fig.savefig(p)
    plt.close(fig)
    files.append(p)
    return files


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spdepeaks", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("bounds", "oracle", "simulate", "estimate", "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON configuration (or a manifest.json to rerun)")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, help="override run.seed")
        sp.add_argument("--workers", type=int, help="worker processes (default: available CPUs)")
        sp.add_argument("--plot", action="store_true", help="also write SVG plots")
        sp.add_argument("--dry-run", action="store_true", help="validate and print the plan only")
        if name in ("estimate", "validate"):
            sp.add_argument("inputs", nargs="*", type=Path, help="moments.csv files")
    return ap


def _config(args, required: bool = True) -> Optional[RunConfig]:
    if args.config is None:
        if required:
            raise ConfigError("--config is required for this command")
        return None
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _manifest(args, cfg: Optional[RunConfig], files: List[Path], summary: dict, started: str) -> Path:
    cdict = cfg.to_dict() if cfg is not None else {}
    m = RunManifest(
        command=args.command, config=cdict, seed=int(cfg.run.seed) if cfg else 0,
        config_hash=canonical_hash(cdict), tool_version=__version__, started=started,
        finished=_now(), outputs=output_entries(files), summary=summary,
    )
    return m.write(args.out / "manifest.json")


def _report_summary(report) -> dict:
    if report is None:
        return {}
    return {"lambda_lower_hat": _finite(report.lambda_lower_hat),
            "lambda_upper_hat": _finite(report.lambda_upper_hat),
            "gamma_bar_hat": _finite(report.gamma_bar_hat)}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = _now()
    cmd = args.command
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    if workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _config(args, required=cmd not in ("estimate", "validate"))
        if cmd == "validate":
            if cfg is not None:
                info = {"valid": True, "plan": plan(cfg, "simulate")}
                try:
                    cfg.renewal_problem()
                    info["oracle"] = "available"
                except ConfigError as exc:
                    info["oracle"] = f"unavailable: {exc}"
                print(json.dumps(info, indent=2, default=_finite))
            for p in args.inputs:
                fields = read_moments_csv(p)
                print(f"{p}: ok ({len(fields)} field(s), nu={[f.nu for f in fields]})")
            if cfg is None and not args.inputs:
                raise ConfigError("validate needs --config and/or CSV inputs")
            return EXIT_OK
        if args.dry_run:
            if cmd == "estimate":
                for p in args.inputs:
                    read_moments_csv(p)
                print(json.dumps({"command": cmd, "inputs": [str(p) for p in args.inputs]}, indent=2))
            else:
                print(json.dumps(plan(cfg, cmd), indent=2, default=_finite))
            return EXIT_OK

        args.out.mkdir(parents=True, exist_ok=True)
        files: List[Path] = []
        summary: dict = {}
        if cmd == "bounds":
            rep = cmd_bounds(cfg)
            files.append(write_json(args.out / "bounds.json", rep))
            summary = {k: rep[k] for k in ("lambda_exact_wave", "lambda_bounds_heat", "lambda_upper_general") if k in rep}
            print(json.dumps(rep if len(json.dumps(rep)) < 4000 else summary, indent=2, default=_finite))
        elif cmd == "oracle":
            field, report, rate = cmd_oracle(cfg)
            files.append(write_moments_csv(args.out / "moments.csv", [field]))
            files.append(write_growth_csv(args.out / "growth_index.csv", report))
            summary = {"growth_rate": _finite(rate), **_report_summary(report)}
            if args.plot:
                files += write_plots(args.out, field, report, theory_marks(cfg))
        elif cmd == "simulate":
            fields, report = cmd_simulate(cfg, workers)
            files.append(write_moments_csv(args.out / "moments.csv", fields))
            if report is not None:
                files.append(write_growth_csv(args.out / "growth_index.csv", report))
            summary = {"n_paths": cfg.run.n_paths, "min_ess": {f"{f.nu:g}": f.meta.get("min_ess") for f in fields},
                       **_report_summary(report)}
            if args.plot and report is not None:
                files += write_plots(args.out, _primary(fields), report, theory_marks(cfg))
        elif cmd == "estimate":
            if not args.inputs:
                raise ConfigError("estimate needs at least one moments.csv input")
            fields = [(p, f) for p in args.inputs for f in read_moments_csv(p)]
            reports = cmd_estimate([f for _, f in fields], cfg)
            # the first file's primary field gets the plain name, as simulate writes it
            lead = _primary([f for p, f in fields if p == args.inputs[0]])
            for (p, f), rep in zip(fields, reports):
                stem = "" if f is lead else f"{p.stem}_nu{f.nu:g}_"
                files.append(write_growth_csv(args.out / f"{stem}growth_index.csv", rep))
                summary[f"{p.name}:nu={f.nu:g}"] = _report_summary(rep)
                if args.plot:
                    files += write_plots(args.out, f, rep, theory_marks(cfg) if cfg else None, stem)
        if summary:
            print(json.dumps(summary, indent=2, default=_finite))
        _manifest(args, cfg, files, summary, started)
        return EXIT_OK
    except (ConfigError, GridError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CSVFormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, QuadratureError, AliasingError, EstimateError, RuntimeError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


__all__ = ["run", "main", "cmd_bounds", "cmd_oracle", "cmd_simulate", "cmd_estimate", "plan",
           "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERIC", "EXIT_IO"]
