"""Truncation machinery shared by the truncated schemes.

The growth envelope is the power family ``mu(u) = c_bar * u**(1 + gamma)``,
the step-size dependent level is ``h(delta) = c_bar + sqrt(epsilon * ln(1/delta))``
and the clamp keeps the frozen state inside ``mu^{-1}(h(delta))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# dyadic grid used to validate delta**(1/6) * h(delta) <= h_hat
_H_HAT_GRID = tuple(2.0**-k for k in range(21))


def _check_delta(delta):
    d = np.asarray(delta)
    if not np.all((d > 0.0) & (d <= 1.0)):
        raise ValueError(f"delta must lie in (0, 1], got {delta!r}")


def signed_clamp(x, cap):
    """sign(x) * min(|x|, cap), with 0 mapped to 0.  Works on scalars and arrays."""
    if np.ndim(x) == 0 and np.ndim(cap) == 0:
        x = float(x)
        if x == 0.0:
            return 0.0
        return math.copysign(min(abs(x), cap), x)
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.minimum(np.abs(x), cap)


@dataclass(frozen=True)
class TruncationPolicy:
    c_bar: float = 10.0
    gamma: float = 1.0
    epsilon: float = 1.0 / 3.0
    h_hat: float = 11.0

    def __post_init__(self):
        if not self.c_bar > 0:
            raise ValueError(f"c_bar must be positive, got {self.c_bar!r}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if not 0 < self.epsilon <= 1.0 / 3.0:
            raise ValueError(f"epsilon must lie in (0, 1/3], got {self.epsilon!r}")
        if not self.h_hat >= max(1.0, self.mu(1.0)):
            raise ValueError(f"h_hat must be >= max(1, mu(1)) = {max(1.0, self.mu(1.0))}")
        worst = max(d ** (1 / 6) * self.h_of_delta(d) for d in _H_HAT_GRID)
        if worst > self.h_hat:
            raise ValueError(f"delta^(1/6) h(delta) reaches {worst:.6g} > h_hat={self.h_hat}")

    def mu(self, u: float) -> float:
        if u < 0:
            raise ValueError(f"mu is defined for u >= 0, got {u!r}")
        return self.c_bar * u ** (1.0 + self.gamma)

    def mu_inverse(self, v: float) -> float:
        if np.any(np.asarray(v) < self.c_bar):  # mu(1) == c_bar
            raise ValueError(f"mu_inverse is defined on [mu(1), inf) = [{self.c_bar}, inf), got {v!r}")
        return (v / self.c_bar) ** (1.0 / (1.0 + self.gamma))

    def h_of_delta(self, delta: float) -> float:
        _check_delta(delta)
        if np.ndim(delta):
            return self.c_bar + np.sqrt(-self.epsilon * np.log(np.asarray(delta, dtype=float)))
        return self.c_bar + math.sqrt(self.epsilon * math.log(1.0 / delta))

    def cap(self, delta: float) -> float:
        """Truncation level mu^{-1}(h(delta))."""
        return self.mu_inverse(self.h_of_delta(delta))

    def clamp(self, delta, x):
        return signed_clamp(x, self.cap(delta))


@dataclass(frozen=True)
class EmTruncationPolicy:
    """Truncation for the Euler-Maruyama baseline: mu(u) = c_bar u^3, h(delta) = delta^-q."""

    c_bar: float = 10.0
    q: float = 0.25

    def __post_init__(self):
        if not self.c_bar > 0:
            raise ValueError(f"c_bar must be positive, got {self.c_bar!r}")
        if not self.q > 0:
            raise ValueError(f"q must be positive so that h is decreasing, got {self.q!r}")

    def mu(self, u: float) -> float:
        if u < 0:
            raise ValueError(f"mu is defined for u >= 0, got {u!r}")
        return self.c_bar * u**3

    def h_of_delta(self, delta: float) -> float:
        _check_delta(delta)
        return delta ** (-self.q)

    def cap(self, delta: float) -> float:
        return (self.h_of_delta(delta) / self.c_bar) ** (1.0 / 3.0)

    def clamp(self, delta, x):
        return signed_clamp(x, self.cap(delta))


# functional spellings

def mu(policy: TruncationPolicy, u: float) -> float:
    return policy.mu(u)


def mu_inverse(policy: TruncationPolicy, v: float) -> float:
    return policy.mu_inverse(v)


def h_of_delta(policy: TruncationPolicy, delta: float) -> float:
    return policy.h_of_delta(delta)


def clamp_pi(policy: TruncationPolicy, delta: float, x):
    return policy.clamp(delta, x)


def clamp_em(policy: EmTruncationPolicy, delta: float, x):
    return policy.clamp(delta, x)
