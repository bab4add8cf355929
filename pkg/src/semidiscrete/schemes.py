"""One-step integrators for dx = -10 x^3 dt + x^2 dW and path drivers.

The semi-discrete (SD) schemes freeze part of the coefficients at the left
endpoint of each step so that the frozen equation has a closed-form solution:

* ``SD_LANGEVIN`` / ``TSD``: freeze ``c = y_n^2`` (clamped for TSD) in
  ``dy = -10 c y dt + c dW``, an Ornstein-Uhlenbeck step.
* ``SD_EXP`` / ``EXP_TSD``: freeze ``p = y_n`` (clamped) in
  ``dy = -10 p^2 y dt + p y dW``, a geometric Brownian motion step.
* ``LSD``: SD step for the Lamperti variable ``z = -1/x``, which has additive
  noise; the state is kept in ``z`` and reported as ``x = -1/z``.

``TEM`` and ``EM`` are the truncated and plain Euler-Maruyama baselines.
All Langevin-type steps are written relative to ``t_n``, so no exponential
with a positive argument that grows with ``t_n`` is ever evaluated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .noise import BrownianPath, PURPOSE_AUX, standard_normals
from .truncation import EmTruncationPolicy, TruncationPolicy, signed_clamp


class SchemeKind(enum.Enum):
    SD_LANGEVIN = "SD_LANGEVIN"
    SD_EXP = "SD_EXP"
    TSD = "TSD"
    EXP_TSD = "EXP_TSD"
    LSD = "LSD"
    TEM = "TEM"
    EM = "EM"

    @classmethod
    def parse(cls, name: str) -> "SchemeKind":
        key = name.strip().upper().replace("-", "_")
        key = _ALIASES.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown scheme {name!r}; choose from "
                             f"{', '.join(k.name for k in cls)}") from None

    @property
    def truncated(self) -> bool:
        return self in (SchemeKind.TSD, SchemeKind.EXP_TSD, SchemeKind.TEM)


_ALIASES = {"SD": "SD_LANGEVIN", "EXPSD": "SD_EXP", "EXPTSD": "EXP_TSD", "EXP_SD": "SD_EXP"}


class IntegralMode(enum.Enum):
    """How the stochastic integral of the Langevin-type step is sampled."""

    LOWER_ENDPOINT = "LOWER_ENDPOINT"  # integrand frozen at t_n, as in the reference figures
    EXACT_GAUSSIAN = "EXACT_GAUSSIAN"  # exact draw from the OU transition law

    @classmethod
    def parse(cls, name: str) -> "IntegralMode":
        try:
            return cls[name.strip().upper().replace("-", "_")]
        except KeyError:
            raise ValueError(f"unknown integral mode {name!r}") from None


class DivergenceError(RuntimeError):
    """A trajectory became non-finite where that is not allowed."""


@dataclass(frozen=True)
class SdeProblem:
    drift: Callable[[float, float], float]
    diffusion: Callable[[float, float], float]
    x0: float
    label: str = "sde"


def _cubic_drift(t, x):
    return -10.0 * x**3


def _square_diffusion(t, x):
    return x**2


def cubic_example(x0: float = 10.0) -> SdeProblem:
    """The test equation dx = -10 x^3 dt + x^2 dW."""
    return SdeProblem(_cubic_drift, _square_diffusion, float(x0), label="cubic")


def is_cubic_example(problem: SdeProblem) -> bool:
    return problem.drift is _cubic_drift and problem.diffusion is _square_diffusion


@dataclass(frozen=True)
class TimeGrid:
    delta: float
    n_steps: int
    t0: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ValueError(f"n_steps must be a nonnegative integer, got {self.n_steps!r}")

    @classmethod
    def covering(cls, delta: float, horizon: float, t0: float = 0.0) -> "TimeGrid":
        """Smallest uniform grid with step ``delta`` reaching ``horizon``."""
        return cls(delta, max(0, math.ceil(horizon / delta - 1e-9)), t0)

    @property
    def horizon(self) -> float:
        return self.n_steps * self.delta

    def t(self, n: int) -> float:
        return self.t0 + n * self.delta

    def times(self) -> np.ndarray:
        return self.t0 + self.delta * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class SchemeState:
    y: float
    t: float = 0.0
    step_index: int = 0
    diverged: bool = False

    def advance(self, y: float, dt: float) -> "SchemeState":
        if self.diverged:
            return self
        if not math.isfinite(y):
            return SchemeState(math.nan, self.t + dt, self.step_index + 1, diverged=True)
        return SchemeState(y, self.t + dt, self.step_index + 1)


# ---------------------------------------------------------------------------
# exact OU kernel

def ou_std(rate: float, dt: float) -> float:
    """Standard deviation of int_0^dt e^{rate (dt - s)} dW_s."""
    if rate == 0.0:
        return math.sqrt(dt)
    return math.sqrt(math.expm1(2.0 * rate * dt) / (2.0 * rate))


def exact_linear_step(a_coef: float, b_coef: float, x: float, dt: float, gaussian: float) -> float:
    """Exact transition of dx = a x dt + b dW over ``dt`` driven by a N(0,1) draw."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    return math.exp(a_coef * dt) * x + b_coef * ou_std(a_coef, dt) * gaussian


def coupled_gaussian(c: float, dt: float, dw: float, z: float) -> float:
    """Standardised OU integral draw correlated with the step's increment.

    For the Langevin step with frozen ``c`` the integral
    ``J = int_0^dt e^{-10 c (dt - s)} dW_s`` is jointly Gaussian with ``dW``.
    Returns ``J / sd(J)`` built from ``dw`` and an independent N(0,1) ``z``,
    so the exact scheme stays pathwise coupled to the Brownian increments.
    """
    if c == 0.0:
        return dw / math.sqrt(dt)
    sd = ou_std(-10.0 * c, dt)
    cov = -math.expm1(-10.0 * c * dt) / (10.0 * c)
    rho = min(cov / (sd * math.sqrt(dt)), 1.0)
    return rho * dw / math.sqrt(dt) + math.sqrt(max(1.0 - rho * rho, 0.0)) * z


# ---------------------------------------------------------------------------
# one-step maps

def _require_dt(dt):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")


def langevin_value(y: float, dw: float, dt: float, cap: float = math.inf,
                   mode: IntegralMode = IntegralMode.LOWER_ENDPOINT,
                   gaussian: float | None = None) -> float:
    p = signed_clamp(y, cap)
    c = p * p
    if mode is IntegralMode.LOWER_ENDPOINT:
        return math.exp(-10.0 * c * dt) * (y + c * dw)
    if gaussian is None:
        raise ValueError("EXACT_GAUSSIAN mode needs a standard normal draw")
    if c == 0.0:
        return y
    return math.exp(-10.0 * c * dt) * y + c * ou_std(-10.0 * c, dt) * gaussian


def step_sd_langevin(problem: SdeProblem, state: SchemeState, dw: float, dt: float,
                     policy: TruncationPolicy | None = None,
                     mode: IntegralMode = IntegralMode.LOWER_ENDPOINT,
                     gaussian: float | None = None) -> SchemeState:
    _require_dt(dt)
    cap = policy.cap(dt) if policy is not None else math.inf
    return state.advance(langevin_value(state.y, dw, dt, cap, mode, gaussian), dt)


def exponential_value(y: float, dw: float, dt: float, cap: float = math.inf) -> float:
    p = signed_clamp(y, cap)
    try:
        return y * math.exp(-10.5 * p * p * dt + p * dw)
    except OverflowError:
        return math.copysign(math.inf, y)


def step_sd_exp(problem: SdeProblem, state: SchemeState, dw: float, dt: float,
                policy: TruncationPolicy | None = None) -> SchemeState:
    _require_dt(dt)
    cap = policy.cap(dt) if policy is not None else math.inf
    return state.advance(exponential_value(state.y, dw, dt, cap), dt)


def to_lamperti(x: float) -> float:
    if not x > 0:
        raise ValueError(f"the Lamperti scheme needs x > 0, got {x!r}")
    return -1.0 / x


def lsd_to_x(y_tilde: float) -> float:
    if not y_tilde < 0:
        raise ValueError(f"Lamperti state must be negative, got {y_tilde!r}")
    return -1.0 / y_tilde


def step_lsd(state: SchemeState, dw: float, dt: float) -> SchemeState:
    """Advance the Lamperti state ``z``; the result is always <= -sqrt(22 dt)."""
    _require_dt(dt)
    if not state.y < 0:
        raise ValueError(f"Lamperti state must be negative, got {state.y!r}")
    s = dw + state.y
    return state.advance(-math.sqrt(s * s + 22.0 * dt), dt)


def step_tem(problem: SdeProblem, state: SchemeState, dw: float, dt: float,
             policy: EmTruncationPolicy) -> SchemeState:
    _require_dt(dt)
    u = policy.clamp(dt, state.y)
    return state.advance(state.y - 10.0 * u**3 * dt + u * u * dw, dt)


def step_em(problem: SdeProblem, state: SchemeState, dw: float, dt: float) -> SchemeState:
    _require_dt(dt)
    y = state.y
    try:
        value = y + problem.drift(state.t, y) * dt + problem.diffusion(state.t, y) * dw
    except OverflowError:
        value = math.inf
    return state.advance(value, dt)


# ---------------------------------------------------------------------------
# path drivers

@dataclass(frozen=True)
class Scheme:
    """A scheme kind together with the options it needs."""

    kind: SchemeKind
    policy: TruncationPolicy | None = None
    em_policy: EmTruncationPolicy | None = None
    mode: IntegralMode = IntegralMode.LOWER_ENDPOINT

    def __post_init__(self):
        if self.kind in (SchemeKind.TSD, SchemeKind.EXP_TSD) and self.policy is None:
            raise ValueError(f"{self.kind.name} needs a TruncationPolicy")
        if self.kind is SchemeKind.TEM and self.em_policy is None:
            raise ValueError("TEM needs an EmTruncationPolicy")

    @classmethod
    def default(cls, kind: SchemeKind | str, mode: IntegralMode = IntegralMode.LOWER_ENDPOINT,
                policy: TruncationPolicy | None = None,
                em_policy: EmTruncationPolicy | None = None) -> "Scheme":
        """Attach default truncation policies where the kind needs one."""
        if isinstance(kind, str):
            kind = SchemeKind.parse(kind)
        return cls(
            kind,
            policy=(policy or TruncationPolicy()) if kind in (SchemeKind.TSD, SchemeKind.EXP_TSD) else None,
            em_policy=(em_policy or EmTruncationPolicy()) if kind is SchemeKind.TEM else None,
            mode=mode,
        )

    @property
    def name(self) -> str:
        return self.kind.name

    @property
    def exact(self) -> bool:
        return (self.mode is IntegralMode.EXACT_GAUSSIAN
                and self.kind in (SchemeKind.SD_LANGEVIN, SchemeKind.TSD))

    def kernel_args(self, dt: float) -> tuple[int, float]:
        k = self.kind
        if k is SchemeKind.SD_LANGEVIN:
            return kernels.LANGEVIN, math.inf
        if k is SchemeKind.TSD:
            return kernels.LANGEVIN, self.policy.cap(dt)
        if k is SchemeKind.SD_EXP:
            return kernels.EXPONENTIAL, math.inf
        if k is SchemeKind.EXP_TSD:
            return kernels.EXPONENTIAL, self.policy.cap(dt)
        if k is SchemeKind.LSD:
            return kernels.LAMPERTI, math.inf
        if k is SchemeKind.TEM:
            return kernels.TRUNC_EM, self.em_policy.cap(dt)
        return kernels.EULER, math.inf


def check_initial(scheme: Scheme, x0: float):
    if scheme.kind is SchemeKind.LSD and not x0 > 0:
        raise ValueError(f"LSD needs x0 > 0, got {x0!r}")


def simulate_batch(scheme: Scheme, x0: float, dt: float, dw: np.ndarray,
                   aux: np.ndarray | None = None, record: bool = False,
                   backend: str | None = None):
    """Run ``scheme`` from ``x0`` over each row of increments ``dw``.

    Returns ``(terminal, diverged_at, trajectory)`` as in ``kernels.run_batch``.
    Only the bundled cubic equation is supported here.
    """
    check_initial(scheme, x0)
    _require_dt(dt)
    code, cap = scheme.kernel_args(dt)
    return kernels.run_batch(code, x0, dw, dt, cap=cap, exact=scheme.exact, aux=aux,
                             record=record, backend=backend)


def simulate_path(kind: SchemeKind | Scheme, problem: SdeProblem, grid: TimeGrid,
                  path: BrownianPath, policy: TruncationPolicy | EmTruncationPolicy | None = None,
                  mode: IntegralMode = IntegralMode.LOWER_ENDPOINT,
                  level: int = 0) -> list[SchemeState]:
    """Iterate the one-step map of ``kind`` along ``path`` and record every state.

    Uses the level-``level`` increments of ``path``, whose step must match
    ``grid.delta``.  LSD states are reported in x coordinates.  The path stops
    (with ``diverged`` set on the last state) at the first non-finite iterate.
    """
    if isinstance(kind, Scheme):
        scheme = kind
    else:
        scheme = Scheme(
            kind,
            policy=policy if isinstance(policy, TruncationPolicy) else None,
            em_policy=policy if isinstance(policy, EmTruncationPolicy) else None,
            mode=mode,
        )
    dt = grid.delta
    if grid.n_steps and not math.isclose(path.step_size(level), dt, rel_tol=1e-12):
        raise ValueError(f"path step {path.step_size(level)} does not match grid delta {dt}")
    state = SchemeState(problem.x0, grid.t0, 0)
    states = [state]
    if grid.n_steps == 0:
        return states
    dws = path.increments(level)
    if dws.size < grid.n_steps:
        raise ValueError(f"path has {dws.size} increments, grid needs {grid.n_steps}")
    check_initial(scheme, problem.x0)
    aux = None
    if scheme.exact:
        aux = standard_normals(path.seed, grid.n_steps, level=level, purpose=PURPOSE_AUX)
    k = scheme.kind
    z_state = SchemeState(to_lamperti(problem.x0), grid.t0, 0) if k is SchemeKind.LSD else None
    for n in range(grid.n_steps):
        dw = float(dws[n])
        if k in (SchemeKind.SD_LANGEVIN, SchemeKind.TSD):
            g = None
            if scheme.exact:
                cap = scheme.policy.cap(dt) if scheme.policy else math.inf
                p = signed_clamp(state.y, cap)
                g = None if state.diverged else coupled_gaussian(p * p, dt, dw, float(aux[n]))
            state = step_sd_langevin(problem, state, dw, dt, scheme.policy, scheme.mode, g)
        elif k in (SchemeKind.SD_EXP, SchemeKind.EXP_TSD):
            state = step_sd_exp(problem, state, dw, dt, scheme.policy)
        elif k is SchemeKind.LSD:
            z_state = step_lsd(z_state, dw, dt)
            state = SchemeState(lsd_to_x(z_state.y), z_state.t, z_state.step_index)
        elif k is SchemeKind.TEM:
            state = step_tem(problem, state, dw, dt, scheme.em_policy)
        else:
            state = step_em(problem, state, dw, dt)
        states.append(state)
        if state.diverged:
            break
    return states
