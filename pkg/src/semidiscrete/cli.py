"""Command-line front end: ``semidiscrete <command> [--config FILE] [flags]``.

Every command writes its CSV (and any requested SVG) into the output
directory, which defaults to ``$SEMIDISCRETE_OUT`` or ``./results``.
Failures print one JSON line to stderr and exit with

    2  the config or the command line cannot be parsed
    3  a value violates its constraint
    4  paths diverged while ``allow_divergence = false``
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, plots, stability
from .config import (ConfigError, ExperimentConfig, ValidationError, build_config,
                     load_config_file, parse_assignments)
from .csvout import write_csv
from .schemes import DivergenceError, Scheme

OUT_ENV = "SEMIDISCRETE_OUT"
DEFAULT_OUT = "results"

COMMANDS = {
    "simulate": "trajectories",
    "stability": "stability",
    "convergence": "convergence",
    "decomposition": "decomposition",
    "integral-bound": "integral-bound",
    "positivity": "positivity",
    "moments": "moments",
}

# make-figures recipes: (name, step, schemes)
SD_FAMILY = ("SD_LANGEVIN", "SD_EXP", "TSD", "EXP_TSD", "LSD")
FIGURES = (
    ("figure1", 0.09, SD_FAMILY + ("TEM",)),
    ("figure2", 0.25, SD_FAMILY),
    ("figure3", 0.5, SD_FAMILY),
)
DIFFERENCE_DELTAS = (0.01, 0.05, 0.09)
ZOOM_FROM = 1.0

log = logging.getLogger("semidiscrete")


class _Exit(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code, self.kind, self.extra = code, kind, extra


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Exit(2, "usage", message)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semidiscrete", description="Semi-discrete SDE scheme experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "simulate": "record trajectories of several schemes on common noise",
        "stability": "long-horizon decay and divergence statistics",
        "convergence": "strong order by self-convergence on coupled paths",
        "decomposition": "drift inequality and martingale-part check on a y grid",
        "integral-bound": "tail of the left-point stochastic integral error",
        "positivity": "count nonpositive states and sign changes",
        "moments": "E sup |y|^p over the horizon",
        "make-figures": "trajectory and difference figures in one run",
    }
    for name, text in helps.items():
        _add_common(sub.add_parser(name, help=text, description=text))
    return parser


def load_layers(args) -> list[dict]:
    layers = []
    if args.config:
        layers.append(load_config_file(args.config))
    if args.overrides:
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        layers.append(parse_assignments(args.overrides, origin="--set"))
    flags = {"seed": args.seed, "threads": args.threads, "out": args.out}
    layers.append({k: v for k, v in flags.items() if v is not None})
    return layers


def output_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _schemes(cfg: ExperimentConfig) -> list[Scheme]:
    return [Scheme.default(name, cfg.mode, cfg.policy, cfg.em_policy) for name in cfg.schemes]


def _forbid(cfg: ExperimentConfig, n_diverged: int, what: str):
    if n_diverged and not cfg.allow_divergence:
        raise DivergenceError(f"{n_diverged} {what} diverged and allow_divergence is false")


def _difference_rows(reports):
    for r in reports:
        diff = r.difference()[0]
        for n, t in enumerate(r.times):
            yield {"delta": r.delta, "step": n, "t": t, "difference": diff[n]}


# ---------------------------------------------------------------------------
# commands; each returns the list of files written

def cmd_simulate(cfg: ExperimentConfig, out: Path) -> list[Path]:
    schemes = _schemes(cfg)
    reports = []
    for delta in cfg.deltas:
        rep = analysis.run_trajectories(schemes, cfg.x0, delta, cfg.T, cfg.n_paths, cfg.seed,
                                        cfg.threads)
        _forbid(cfg, sum(int(np.any(~np.isfinite(v[:, -1]))) for v in rep.paths.values()),
                "trajectories")
        reports.append(rep)
    files = []
    multi = len(reports) > 1
    for rep in reports:
        tag = f"_delta{rep.delta:g}" if multi else ""
        files.append(write_csv(out / f"trajectories{tag}.csv", "trajectories", rep.rows()))
        if "trajectory" in cfg.plots:
            files.append(plots.emit_plot(rep, "trajectory", out / f"trajectories{tag}.svg"))
    if "difference" in cfg.plots:
        files.append(write_csv(out / "difference.csv", "difference", _difference_rows(reports)))
        files.append(plots.emit_plot(reports, "difference", out / "difference.svg"))
    return files


def cmd_stability(cfg, out):
    rows = []
    for scheme in _schemes(cfg):
        for delta in cfg.deltas:
            rep = analysis.run_stability_experiment(scheme, cfg.x0, delta, cfg.T, cfg.n_paths,
                                                    cfg.threshold, cfg.seed, cfg.threads)
            _forbid(cfg, round(rep.fraction_diverged * rep.n_paths) if rep.n_paths else 0,
                    f"{scheme.name} paths")
            rows.append(rep.row())
    return [write_csv(out / "stability.csv", "stability", rows)]


def cmd_convergence(cfg, out):
    reports = [analysis.estimate_strong_order(s, cfg.x0, cfg.T, cfg.deltas, cfg.ref_delta,
                                              cfg.n_paths, cfg.seed, cfg.threads)
               for s in _schemes(cfg)]
    rows = [row for r in reports for row in r.rows()]
    files = [write_csv(out / "convergence.csv", "convergence", rows)]
    if "convergence" in cfg.plots:
        files.append(plots.emit_plot(reports, "convergence", out / "convergence.svg"))
    return files


def cmd_decomposition(cfg, out):
    rows = []
    for name in cfg.schemes:
        for delta in cfg.deltas:
            rep = stability.check_drift_inequality(name, delta, policy=cfg.policy, n_mc=cfg.n_mc,
                                                   seed=cfg.seed)
            rows.extend(rep.rows())
    return [write_csv(out / "decomposition.csv", "decomposition", rows)]


def cmd_integral_bound(cfg, out):
    rows = [stability.integral_bound_check(c, d, r, cfg.n_samples, cfg.n_substeps, cfg.seed).row()
            for c in cfg.c_values for d in cfg.deltas for r in cfg.r_values]
    return [write_csv(out / "integral-bound.csv", "integral-bound", rows)]


def cmd_positivity(cfg, out):
    rows = []
    for scheme in _schemes(cfg):
        for delta in cfg.deltas:
            rows.append(analysis.positivity_report(scheme, cfg.x0, delta, cfg.T, cfg.n_paths,
                                                   cfg.seed, cfg.threads).row())
    return [write_csv(out / "positivity.csv", "positivity", rows)]


def cmd_moments(cfg, out):
    rows = []
    for scheme in _schemes(cfg):
        for delta in cfg.deltas:
            for p in cfg.p:
                rep = analysis.estimate_sup_moment(scheme, p, cfg.x0, delta, cfg.T, cfg.n_paths,
                                                   cfg.seed, cfg.threads)
                _forbid(cfg, rep.n_diverged, f"{scheme.name} paths")
                rows.append(rep.row())
    return [write_csv(out / "moments.csv", "moments", rows)]


def cmd_make_figures(cfg, out):
    """``figure1``..``figure3`` overlay trajectories (full and from ``t = 1``); ``figure4`` is TEM minus LSD."""
    files = []
    for name, delta, names in FIGURES:
        schemes = [Scheme.default(n, cfg.mode, cfg.policy, cfg.em_policy) for n in names]
        rep = analysis.run_trajectories(schemes, cfg.x0, delta, cfg.T, cfg.n_paths, cfg.seed,
                                        cfg.threads)
        files.append(write_csv(out / f"{name}.csv", "trajectories", rep.rows()))
        files.append(plots.emit_plot(rep, "trajectory", out / f"{name}.svg"))
        files.append(plots.emit_plot(rep, "trajectory", out / f"{name}_zoom.svg", t_min=ZOOM_FROM))
    pair = [Scheme.default(n, cfg.mode, cfg.policy, cfg.em_policy) for n in ("TEM", "LSD")]
    reports = [analysis.run_trajectories(pair, cfg.x0, d, cfg.T, cfg.n_paths, cfg.seed, cfg.threads)
               for d in DIFFERENCE_DELTAS]
    files.append(write_csv(out / "figure4.csv", "difference", _difference_rows(reports)))
    files.append(plots.emit_plot(reports, "difference", out / "figure4.svg"))
    return files


HANDLERS = {
    "simulate": cmd_simulate,
    "stability": cmd_stability,
    "convergence": cmd_convergence,
    "decomposition": cmd_decomposition,
    "integral-bound": cmd_integral_bound,
    "positivity": cmd_positivity,
    "moments": cmd_moments,
    "make-figures": cmd_make_figures,
}


def run(argv=None) -> int:
    """Parse ``argv``, run the command and return the exit status."""
    try:
        args = build_parser().parse_args(argv)
        experiment = COMMANDS.get(args.command, "trajectories")
        cfg = build_config(experiment, *load_layers(args))
        out = output_dir(cfg)
        files = HANDLERS[args.command](cfg, out)
    except _Exit as exc:
        return _fail(exc.code, exc.kind, str(exc), **exc.extra)
    except ConfigError as exc:
        return _fail(2, "config", str(exc))
    except ValidationError as exc:
        return _fail(3, "validation", exc.constraint, key=exc.key)
    except DivergenceError as exc:
        return _fail(4, "divergence", str(exc))
    except ValueError as exc:
        return _fail(3, "validation", str(exc))
    for f in files:
        if f is not None:
            print(f)
    return 0


def _fail(code: int, kind: str, message: str, **extra) -> int:
    record = {"error": kind, "exit": code, "message": message, **extra}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
