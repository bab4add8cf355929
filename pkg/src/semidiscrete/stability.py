"""Square decomposition of the truncated SD steps and its stability checks.

For both truncated schemes the squared one-step map splits as

    y_{n+1}^2 = y_n^2 + phi1(y_n) + phi2(y_n, dW_n)

with ``phi2`` conditionally mean zero.  Asymptotic stability follows once
``phi1(y) <= -kappa1(|clamp(y)|)`` for a gauge ``kappa1`` vanishing only at 0.
All formulas are written relative to ``t_n``.

The ``kappa1`` gauges here are the nonnegative ones (the condition reads
``phi1 <= -kappa1``), and ``phi2`` is the exact remainder of the square, so
the decomposition identity holds for every draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .noise import RngSeed, sample_increments, standard_normals
from .schemes import IntegralMode, SchemeKind
from .truncation import TruncationPolicy

_SCHEMES = (SchemeKind.TSD, SchemeKind.EXP_TSD)


def _check_u(u):
    if np.any(np.asarray(u) < 0):
        raise ValueError("kappa functions are defined for u >= 0")


def kappa_underlying(u):
    """Dissipation gauge of the SDE itself: 2x a(x) + b(x)^2 = -19 x^4."""
    _check_u(u)
    return 19.0 * np.asarray(u, dtype=float) ** 4 if np.ndim(u) else 19.0 * float(u) ** 4


def kappa1_tsd(u, delta):
    _check_u(u)
    u2 = np.asarray(u, dtype=float) ** 2
    out = 0.95 * -np.expm1(-20.0 * u2 * delta) * u2
    return out if np.ndim(u) else float(out)


def kappa1_exp_tsd(u, delta):
    _check_u(u)
    u2 = np.asarray(u, dtype=float) ** 2
    out = -np.expm1(-19.0 * u2 * delta) * u2
    return out if np.ndim(u) else float(out)


def _frozen(y, delta, policy):
    p = policy.clamp(delta, y)
    return p, np.asarray(p) * np.asarray(p)


def phi1_tsd(y, delta, policy: TruncationPolicy):
    """(1 - e^{-20 c delta}) (c/20 - y^2) with c = clamp(y)^2.

    Evaluated as ``-kappa1(|clamp(y)|) - (1 - e^{-20 c delta}) (y^2 - c)``;
    ``y^2 - c >= 0`` so the drift inequality also holds in floating point.
    """
    p, c = _frozen(y, delta, policy)
    y = np.asarray(y, dtype=float)
    excess = y * y - c
    out = -kappa1_tsd(np.abs(p), delta) - (-np.expm1(-20.0 * c * delta)) * excess
    return out if out.ndim else float(out)


def phi1_exp_tsd(y, delta, policy: TruncationPolicy):
    """-(1 - e^{-19 c delta}) y^2 with c = clamp(y)^2."""
    _, c = _frozen(y, delta, policy)
    y = np.asarray(y, dtype=float)
    out = np.expm1(-19.0 * c * delta) * (y * y)
    return out if out.ndim else float(out)


def langevin_integral(c, delta, draw, mode: IntegralMode):
    """Sample of J = e^{-10 c delta} int_0^delta e^{10 c s} dW_s.

    ``draw`` is the increment dW for LOWER_ENDPOINT (integrand frozen at the
    left end) and a standard normal for EXACT_GAUSSIAN.
    """
    c = np.asarray(c, dtype=float)
    draw = np.asarray(draw, dtype=float)
    if mode is IntegralMode.LOWER_ENDPOINT:
        return np.exp(-10.0 * c * delta) * draw
    safe = np.where(c > 0, c, 1.0)
    sd = np.where(c > 0, np.sqrt(-np.expm1(-20.0 * safe * delta) / (20.0 * safe)), np.sqrt(delta))
    return sd * draw


def phi2_tsd_sample(y, delta, policy: TruncationPolicy, draw,
                    mode: IntegralMode = IntegralMode.EXACT_GAUSSIAN):
    """Martingale part of the squared TSD step.

    With ``J`` from :func:`langevin_integral` the step is
    ``e^{-10 c delta} y + c J``, and this returns
    ``2 e^{-10 c delta} y c J + c^2 J^2 - (c/20)(1 - e^{-20 c delta})``.
    It has conditional mean zero only in EXACT_GAUSSIAN mode.
    """
    _, c = _frozen(y, delta, policy)
    y = np.asarray(y, dtype=float)
    j = langevin_integral(c, delta, draw, mode)
    out = (2.0 * np.exp(-10.0 * c * delta) * y * c * j + c * c * j * j
           - (c / 20.0) * -np.expm1(-20.0 * c * delta))
    return out if out.ndim else float(out)


def phi2_exp_tsd_sample(y, delta, policy: TruncationPolicy, dw):
    """y^2 e^{-19 c delta} (e^{-2 c delta + 2 p dW} - 1), p = clamp(y), c = p^2."""
    p, c = _frozen(y, delta, policy)
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore"):
        out = (y * y) * np.exp(-19.0 * c * delta) * np.expm1(2.0 * (p * np.asarray(dw) - c * delta))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# drift inequality

@dataclass
class DecompositionReport:
    scheme: SchemeKind
    delta: float
    y: np.ndarray
    phi1_values: np.ndarray
    kappa1_bounds: np.ndarray
    inequality_holds: np.ndarray
    phi2_mc_mean: np.ndarray
    phi2_mc_stderr: np.ndarray
    kappa1_exceeds_kappa: np.ndarray = field(default=None)

    @property
    def all_hold(self) -> bool:
        return bool(np.all(self.inequality_holds))

    @property
    def n_violations(self) -> int:
        return int(np.count_nonzero(~self.inequality_holds))

    def rows(self):
        for i in range(self.y.size):
            yield {
                "scheme": self.scheme.name,
                "delta": self.delta,
                "y": self.y[i],
                "phi1": self.phi1_values[i],
                "neg_kappa1": -self.kappa1_bounds[i],
                "holds": bool(self.inequality_holds[i]),
                "phi2_mean": self.phi2_mc_mean[i],
                "phi2_stderr": self.phi2_mc_stderr[i],
            }


def default_grid(delta: float, policy: TruncationPolicy) -> np.ndarray:
    """y in [-5, 5] step 0.01 plus the two clamp switch points."""
    cap = policy.cap(delta)
    grid = np.concatenate([np.arange(-500, 501) / 100.0, [-cap, cap]])
    return np.unique(grid)


def check_drift_inequality(scheme: SchemeKind | str, delta: float, y_grid=None,
                           policy: TruncationPolicy | None = None, n_mc: int = 1000,
                           seed: int = 0) -> DecompositionReport:
    """Evaluate phi1 against -kappa1 pointwise and estimate E[phi2] by Monte Carlo.

    ``n_mc = 0`` skips the Monte Carlo columns (they are NaN).  The TSD
    martingale part is sampled in EXACT_GAUSSIAN mode.
    """
    if isinstance(scheme, str):
        scheme = SchemeKind.parse(scheme)
    if scheme not in _SCHEMES:
        raise ValueError(f"decomposition is available for TSD and EXP_TSD, not {scheme.name}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta!r}")
    policy = policy or TruncationPolicy()
    y = default_grid(delta, policy) if y_grid is None else np.asarray(y_grid, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("y_grid must be finite")
    u = np.abs(policy.clamp(delta, y))
    if scheme is SchemeKind.TSD:
        phi1 = phi1_tsd(y, delta, policy)
        k1 = kappa1_tsd(u, delta)
    else:
        phi1 = phi1_exp_tsd(y, delta, policy)
        k1 = kappa1_exp_tsd(u, delta)
    phi1 = np.atleast_1d(phi1)
    k1 = np.atleast_1d(k1)
    holds = phi1 <= -k1

    mean = np.full(y.size, np.nan)
    stderr = np.full(y.size, np.nan)
    if n_mc:
        # common random numbers across grid points
        if scheme is SchemeKind.TSD:
            draws = standard_normals(RngSeed(seed, 0), n_mc)
            samples = phi2_tsd_sample(y[:, None], delta, policy, draws[None, :],
                                      IntegralMode.EXACT_GAUSSIAN)
        else:
            draws = sample_increments(RngSeed(seed, 0), n_mc, delta).increments()
            samples = phi2_exp_tsd_sample(y[:, None], delta, policy, draws[None, :])
        mean = samples.mean(axis=1)
        stderr = samples.std(axis=1, ddof=1) / math.sqrt(n_mc) if n_mc > 1 else np.full(y.size, np.nan)

    return DecompositionReport(
        scheme=scheme, delta=float(delta), y=y, phi1_values=phi1, kappa1_bounds=k1,
        inequality_holds=holds, phi2_mc_mean=mean, phi2_mc_stderr=stderr,
        kappa1_exceeds_kappa=k1 > kappa_underlying(u),
    )


# ---------------------------------------------------------------------------
# left-point approximation of the stochastic integral

@dataclass(frozen=True)
class BoundCheckReport:
    c: float
    delta: float
    r: float
    n_samples: int
    n_substeps: int
    empirical_prob: float
    stderr: float
    theoretical_bound: float

    @property
    def within_bound(self) -> bool:
        return self.empirical_prob <= self.theoretical_bound + 3.0 * self.stderr

    def row(self) -> dict:
        return {"c": self.c, "delta": self.delta, "r": self.r,
                "empirical": self.empirical_prob, "bound": self.theoretical_bound}


def integral_bound(c: float, delta: float, r: float) -> float:
    """2 e^{20 c delta} delta^{1 - 2r}: bound on P(|D| >= delta^r)."""
    return 2.0 * math.exp(20.0 * c * delta) * delta ** (1.0 - 2.0 * r)


def integral_bound_check(c: float, delta: float, r: float, n_samples: int = 10_000,
                         n_substeps: int = 256, seed: int = 0) -> BoundCheckReport:
    """Estimate P(|D| >= delta^r) for D = int_0^delta (e^{10 c s} - 1) dW_s.

    ``D`` is the error of freezing the integrand at the left endpoint; it is
    simulated by a left-point Ito sum over ``n_substeps`` sub-increments.
    """
    if not 0 < r < 0.5:
        raise ValueError(f"r must lie in (0, 1/2), got {r!r}")
    if c < 0:
        raise ValueError(f"c must be nonnegative, got {c!r}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta!r}")
    if n_substeps < 64:
        raise ValueError(f"n_substeps must be >= 64, got {n_substeps}")
    if n_samples < 1:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    h = delta / n_substeps
    dw = sample_increments(RngSeed(seed, 0), n_samples * n_substeps, h).increments()
    dw = dw.reshape(n_samples, n_substeps)
    weights = np.expm1(10.0 * c * h * np.arange(n_substeps))
    d = dw @ weights
    prob = float(np.mean(np.abs(d) >= delta**r))
    return BoundCheckReport(
        c=float(c), delta=float(delta), r=float(r), n_samples=n_samples, n_substeps=n_substeps,
        empirical_prob=prob, stderr=math.sqrt(prob * (1.0 - prob) / n_samples),
        theoretical_bound=integral_bound(c, delta, r),
    )


def exact_integral_variance(c: float, delta: float) -> float:
    """Var D = int_0^delta (e^{10 c s} - 1)^2 ds in closed form."""
    if c == 0:
        return 0.0
    k = 10.0 * c
    return (math.expm1(2 * k * delta) / (2 * k) - 2 * math.expm1(k * delta) / k + delta)

