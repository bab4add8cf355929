"""Turn experiment reports into SVG figures."""

from __future__ import annotations

import logging
from pathlib import Path

from . import svg
from .analysis import ConvergenceReport, TrajectoryReport, fit_loglog

log = logging.getLogger(__name__)

PLOT_KINDS = ("trajectory", "convergence", "difference")


def _figure(report, kind: str, t_min: float = 0.0) -> str | None:
    if kind == "trajectory":
        if report.empty:
            return None
        keep = report.times >= t_min
        series = {name: [(report.times[keep], row[keep]) for row in traj]
                  for name, traj in report.paths.items()}
        title = f"trajectories, step {report.delta:g}" + (f", t >= {t_min:g}" if t_min else "")
        return svg.line_plot(series, title)
    if kind == "convergence":
        reports = report if isinstance(report, list) else [report]
        if not reports:
            return None
        results = {}
        for r in reports:
            _, intercept, _ = fit_loglog(r.deltas, r.l2_errors)
            results[r.scheme.name] = (r.deltas, r.l2_errors, r.fitted_order, intercept)
        return svg.convergence_plot(results)
    if kind == "difference":
        reports = report if isinstance(report, list) else [report]
        series = {}
        for r in reports:
            if "TEM" in r.paths and "LSD" in r.paths and r.paths["TEM"].shape[0]:
                series[f"step {r.delta:g}"] = (r.times, r.difference()[0])
        if not series:
            return None
        return svg.line_plot(series, "TEM minus LSD", ylabel="y_TEM - y_LSD")
    raise ValueError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")


def emit_plot(report: TrajectoryReport | ConvergenceReport | list, kind: str, path,
              t_min: float = 0.0) -> Path | None:
    """Write the SVG for ``report``; returns ``None`` (and logs a warning) if there is nothing to draw."""
    text = _figure(report, kind, t_min)
    if text is None:
        log.warning("nothing to plot for %s figure %s", kind, path)
        return None
    return svg.write_svg(path, text)
