"""Pure-numpy batch kernels, vectorised across paths.

Same contract as the compiled ``_ckernels`` module; see ``kernels.run_batch``.
"""

import numpy as np

LANGEVIN, EXPONENTIAL, LAMPERTI, TRUNC_EM, EULER = range(5)


def _langevin(y, dw, dt, cap, exact, z):
    p = np.sign(y) * np.minimum(np.abs(y), cap)
    c = p * p
    decay = np.exp(-10.0 * c * dt)
    if not exact:
        return decay * (y + c * dw)
    pos = c > 0.0
    cs = np.where(pos, c, 1.0)
    sd = np.sqrt(-np.expm1(-20.0 * cs * dt) / (20.0 * cs))
    cov = -np.expm1(-10.0 * cs * dt) / (10.0 * cs)
    rho = np.minimum(cov / (sd * np.sqrt(dt)), 1.0)
    g = rho * dw / np.sqrt(dt) + np.sqrt(np.maximum(1.0 - rho * rho, 0.0)) * z
    return np.where(pos, decay * y + c * sd * g, y)


def _step(code, y, dw, dt, cap, exact, z):
    if code == LANGEVIN:
        return _langevin(y, dw, dt, cap, exact, z)
    if code == EXPONENTIAL:
        p = np.sign(y) * np.minimum(np.abs(y), cap)
        return y * np.exp(-10.5 * p * p * dt + p * dw)
    if code == LAMPERTI:
        s = dw + y
        return -np.sqrt(s * s + 22.0 * dt)
    if code == TRUNC_EM:
        u = np.sign(y) * np.minimum(np.abs(y), cap)
        return y - 10.0 * u * u * u * dt + u * u * dw
    if code == EULER:
        return y - 10.0 * y * y * y * dt + y * y * dw
    raise ValueError(f"unknown kernel code {code}")


def run_batch(code, y0, dw, dt, cap, exact, aux, traj, terminal, diverged_at):
    n_paths, n_steps = dw.shape
    record = traj.shape[0] > 0
    lamperti = code == LAMPERTI
    y = np.full(n_paths, -1.0 / y0 if lamperti else y0)
    alive = np.ones(n_paths, dtype=bool)
    diverged_at[:] = -1
    if record:
        traj[:, 0] = y0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for n in range(n_steps):
            z = aux[:, n] if exact else None
            y = _step(code, y, dw[:, n], dt, cap, exact, z)
            bad = alive & ~np.isfinite(y)
            if bad.any():
                diverged_at[bad] = n + 1
                alive &= ~bad
            y[~alive] = np.nan
            if record:
                traj[:, n + 1] = -1.0 / y if lamperti else y
    terminal[:] = -1.0 / y if lamperti else y
