"""Monte Carlo experiments: strong order, long-time stability, positivity, moments.

Path ``i`` of every experiment is driven by the stream ``RngSeed(seed, i)``,
so results depend only on ``(config, seed)``.  Paths are processed in
fixed-size chunks which may run on several threads; the chunking never
depends on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .noise import RngSeed, aux_normal_matrix, increment_matrix, refine, sample_increments
from .schemes import DivergenceError, Scheme, SchemeKind, TimeGrid, check_initial, simulate_batch

CHUNK = 128


def _chunks(n_paths: int) -> list[range]:
    return [range(i, min(i + CHUNK, n_paths)) for i in range(0, n_paths, CHUNK)]


def parallel_map(fn, items, threads: int = 1) -> list:
    """Ordered map over ``items``, optionally on a thread pool."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _as_scheme(scheme) -> Scheme:
    if isinstance(scheme, Scheme):
        return scheme
    return Scheme.default(scheme)


def _run_chunk(scheme: Scheme, x0, grid: TimeGrid, seed, ids, record, backend):
    dw = increment_matrix(seed, ids, grid.n_steps, grid.delta)
    aux = aux_normal_matrix(seed, ids, grid.n_steps) if scheme.exact else None
    return simulate_batch(scheme, x0, grid.delta, dw, aux=aux, record=record, backend=backend)


def simulate_paths(scheme, x0: float, delta: float, T: float, n_paths: int, seed: int = 0,
                   record: bool = True, threads: int = 1, backend: str | None = None):
    """Simulate ``n_paths`` paths on the grid covering ``[0, T]``.

    Returns ``(grid, terminal, diverged_at, trajectories)``.
    """
    scheme = _as_scheme(scheme)
    check_initial(scheme, x0)
    grid = TimeGrid.covering(delta, T)
    if n_paths == 0:
        shape = (0, grid.n_steps + 1)
        return grid, np.empty(0), np.empty(0, dtype=np.int64), (np.empty(shape) if record else None)
    if grid.n_steps == 0:
        traj = np.full((n_paths, 1), float(x0)) if record else None
        return grid, np.full(n_paths, float(x0)), np.full(n_paths, -1, dtype=np.int64), traj
    parts = parallel_map(lambda ids: _run_chunk(scheme, x0, grid, seed, ids, record, backend),
                         _chunks(n_paths), threads)
    terminal = np.concatenate([p[0] for p in parts])
    diverged_at = np.concatenate([p[1] for p in parts])
    traj = np.concatenate([p[2] for p in parts]) if record else None
    return grid, terminal, diverged_at, traj


# ---------------------------------------------------------------------------
# strong convergence order

@dataclass
class ConvergenceReport:
    scheme: SchemeKind
    deltas: list[float]
    l2_errors: list[float]
    fitted_order: float
    fit_r2: float
    ref_delta: float
    n_paths: int

    def rows(self):
        for d, e in zip(self.deltas, self.l2_errors):
            yield {"scheme": self.scheme.name, "delta": d, "l2_error": e,
                   "fitted_order": self.fitted_order, "r2": self.fit_r2}


def fit_loglog(deltas, errors) -> tuple[float, float, float]:
    """Least-squares fit of log(error) = order * log(delta) + b.  Returns (order, b, r2)."""
    x = np.log(np.asarray(deltas, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    if x.size < 2 or not np.all(np.isfinite(y)):
        return math.nan, math.nan, math.nan
    order, intercept = np.polyfit(x, y, 1)
    resid = y - (order * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else math.nan
    return float(order), float(intercept), r2


def l2_error(a: np.ndarray, b: np.ndarray) -> float:
    return math.sqrt(math.fsum((a - b) ** 2) / a.size)


def _dyadic_levels(deltas, ref_delta, T):
    base = deltas[0]
    n_base = round(T / base)
    if n_base < 1 or not math.isclose(n_base * base, T, rel_tol=1e-9):
        raise ValueError(f"T={T} is not a multiple of the coarsest step {base}")
    levels = []
    for d in list(deltas) + [ref_delta]:
        k = round(math.log2(base / d))
        if k < 0 or not math.isclose(base / 2**k, d, rel_tol=1e-9):
            raise ValueError(f"step {d} is not a dyadic refinement of {base}")
        levels.append(k)
    return n_base, levels


def coupled_terminal_values(scheme: Scheme, x0: float, T: float, base_delta: float,
                            levels: list[int], ids, seed: int, backend: str | None = None):
    """Terminal values at several dyadic levels, all driven by the same Brownian paths."""
    n_base = round(T / base_delta)
    depth = max(levels)
    paths = [refine(sample_increments(RngSeed(seed, i), n_base, base_delta), depth) for i in ids]
    out = []
    for k in levels:
        dt = base_delta / 2**k
        dw = np.stack([p.increments(k) for p in paths])
        aux = aux_normal_matrix(seed, ids, dw.shape[1], level=k) if scheme.exact else None
        terminal, diverged_at, _ = simulate_batch(scheme, x0, dt, dw, aux=aux, backend=backend)
        out.append((terminal, diverged_at))
    return out


def estimate_strong_order(scheme, x0: float = 1.0, T: float = 1.0,
                          deltas=tuple(2.0**-k for k in range(4, 10)),
                          ref_delta: float = 2.0**-13, n_paths: int = 4000, seed: int = 0,
                          threads: int = 1, backend: str | None = None) -> ConvergenceReport:
    """Self-convergence study against a same-scheme fine-grid reference.

    All step sizes share Brownian paths through dyadic bridge refinement, so
    the coarse increments are exact sums of the reference increments.  Raises
    ``DivergenceError`` if a reference path diverges.
    """
    scheme = _as_scheme(scheme)
    check_initial(scheme, x0)
    deltas = sorted((float(d) for d in deltas), reverse=True)
    if len(set(deltas)) != len(deltas):
        raise ValueError("deltas must be distinct")
    if not ref_delta < deltas[-1]:
        raise ValueError("reference step must be finer than every tested step")
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    _, levels = _dyadic_levels(deltas, ref_delta, T)

    def work(ids):
        return coupled_terminal_values(scheme, x0, T, deltas[0], levels, ids, seed, backend)

    parts = parallel_map(work, _chunks(n_paths), threads)
    per_level = [
        (np.concatenate([p[j][0] for p in parts]), np.concatenate([p[j][1] for p in parts]))
        for j in range(len(levels))
    ]
    ref, ref_div = per_level[-1]
    if np.any(ref_div >= 0):
        raise DivergenceError(f"{int(np.sum(ref_div >= 0))} reference paths of {scheme.name} diverged")
    errors = []
    for terminal, div in per_level[:-1]:
        errors.append(math.inf if np.any(div >= 0) else l2_error(terminal, ref))
    order, _, r2 = fit_loglog(deltas, errors)
    return ConvergenceReport(scheme.kind, deltas, errors, order, r2, float(ref_delta), n_paths)


# ---------------------------------------------------------------------------
# long-time stability

@dataclass
class StabilityReport:
    scheme: SchemeKind
    delta: float
    T: float
    n_paths: int
    threshold: float
    fraction_below_threshold_at_T: float
    fraction_diverged: float
    terminal_abs_quantiles: tuple[float, float]

    @property
    def empty(self) -> bool:
        return self.n_paths == 0

    def row(self) -> dict:
        q50, q99 = self.terminal_abs_quantiles
        return {"scheme": self.scheme.name, "delta": self.delta, "T": self.T,
                "n_paths": self.n_paths, "frac_below": self.fraction_below_threshold_at_T,
                "frac_diverged": self.fraction_diverged, "q50": q50, "q99": q99}


def run_stability_experiment(scheme, x0: float = 10.0, delta: float = 0.5, T: float = 50.0,
                             n_paths: int = 1000, threshold: float = 1e-3, seed: int = 0,
                             threads: int = 1, backend: str | None = None) -> StabilityReport:
    """Fraction of paths with |y_T| below ``threshold``, plus divergence statistics.

    Diverged paths count as not below the threshold and are left out of the
    quantiles.  With ``n_paths = 0`` every statistic is NaN.
    """
    scheme = _as_scheme(scheme)
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta!r}")
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold!r}")
    _, terminal, diverged_at, _ = simulate_paths(scheme, x0, delta, T, n_paths, seed,
                                                 record=False, threads=threads, backend=backend)
    if n_paths == 0:
        return StabilityReport(scheme.kind, delta, T, 0, threshold, math.nan, math.nan,
                               (math.nan, math.nan))
    ok = diverged_at < 0
    absval = np.abs(terminal[ok])
    below = int(np.count_nonzero(absval < threshold))
    quantiles = ((float(np.quantile(absval, 0.5)), float(np.quantile(absval, 0.99)))
                 if absval.size else (math.nan, math.nan))
    return StabilityReport(scheme.kind, delta, T, n_paths, threshold, below / n_paths,
                           float(np.count_nonzero(~ok)) / n_paths, quantiles)


# ---------------------------------------------------------------------------
# positivity and moments

@dataclass
class PositivityReport:
    scheme: SchemeKind
    delta: float
    T: float
    n_paths: int
    n_states: int
    n_nonpositive: int
    n_sign_changes: int

    @property
    def violation_fraction(self) -> float:
        return self.n_nonpositive / self.n_states if self.n_states else math.nan

    def row(self) -> dict:
        return {"scheme": self.scheme.name, "delta": self.delta, "T": self.T,
                "n_paths": self.n_paths, "violation_fraction": self.violation_fraction,
                "sign_changes": self.n_sign_changes}


def positivity_report(scheme, x0: float, delta: float, T: float, n_paths: int, seed: int = 0,
                      threads: int = 1, backend: str | None = None) -> PositivityReport:
    scheme = _as_scheme(scheme)
    if not x0 > 0:
        raise ValueError(f"positivity checks need x0 > 0, got {x0!r}")
    grid, _, _, traj = simulate_paths(scheme, x0, delta, T, n_paths, seed, record=True,
                                      threads=threads, backend=backend)
    states = traj[:, 1:]
    finite = np.isfinite(states)
    nonpos = int(np.count_nonzero(finite & (states <= 0)))
    s = np.sign(traj)
    changes = int(np.count_nonzero((s[:, 1:] * s[:, :-1]) < 0))
    return PositivityReport(scheme.kind, delta, T, n_paths, states.size, nonpos, changes)


def check_positivity(scheme, x0: float, delta: float, T: float, n_paths: int, seed: int = 0,
                     threads: int = 1) -> float:
    """Fraction of simulated states (after t = 0) that are <= 0."""
    return positivity_report(scheme, x0, delta, T, n_paths, seed, threads).violation_fraction


@dataclass
class MomentReport:
    scheme: SchemeKind
    p: int
    delta: float
    T: float
    n_paths: int
    estimate: float
    stderr: float
    n_diverged: int = 0

    def row(self) -> dict:
        return {"scheme": self.scheme.name, "p": self.p, "delta": self.delta, "T": self.T,
                "n_paths": self.n_paths, "estimate": self.estimate, "stderr": self.stderr}


def estimate_sup_moment(scheme, p: int, x0: float, delta: float, T: float, n_paths: int,
                        seed: int = 0, threads: int = 1,
                        backend: str | None = None) -> MomentReport:
    """Monte Carlo estimate of E[max_n |y_n|^p] over the grid, with its standard error."""
    if int(p) != p or not 2 <= p <= 9:
        raise ValueError(f"p must be an integer in [2, 9], got {p!r}")
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2 for a standard error")
    scheme = _as_scheme(scheme)
    _, _, diverged_at, traj = simulate_paths(scheme, x0, delta, T, n_paths, seed, record=True,
                                             threads=threads, backend=backend)
    ok = diverged_at < 0
    sups = np.max(np.abs(traj[ok]), axis=1) ** int(p)
    n = sups.size
    est = math.fsum(sups) / n if n else math.nan
    se = float(np.std(sups, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return MomentReport(scheme.kind, int(p), delta, T, n_paths, est, se, int(np.count_nonzero(~ok)))


# ---------------------------------------------------------------------------
# trajectories

@dataclass
class TrajectoryReport:
    delta: float
    times: np.ndarray
    paths: dict  # scheme name -> (n_paths, n_steps + 1) array

    @property
    def empty(self) -> bool:
        return not self.paths or all(v.shape[0] == 0 for v in self.paths.values())

    def rows(self):
        for name, traj in self.paths.items():
            for pid in range(traj.shape[0]):
                for n in range(traj.shape[1]):
                    yield {"path_id": pid, "step": n, "t": self.times[n], "scheme": name,
                           "y": traj[pid, n]}

    def difference(self, minuend: str = "TEM", subtrahend: str = "LSD") -> np.ndarray:
        return self.paths[minuend] - self.paths[subtrahend]


def run_trajectories(schemes, x0: float, delta: float, T: float, n_paths: int = 1,
                     seed: int = 0, threads: int = 1) -> TrajectoryReport:
    """Record full trajectories of several schemes on common Brownian paths."""
    paths = {}
    times = None
    for s in schemes:
        scheme = _as_scheme(s)
        grid, _, _, traj = simulate_paths(scheme, x0, delta, T, n_paths, seed, record=True,
                                          threads=threads)
        times = grid.times()
        paths[scheme.name] = traj
    if times is None:
        times = TimeGrid.covering(delta, T).times()
    return TrajectoryReport(float(delta), times, paths)
