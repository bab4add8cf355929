"""Backend selection for the batch path kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy fallback.  Set ``SEMIDISCRETE_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

LANGEVIN = _pykernels.LANGEVIN
EXPONENTIAL = _pykernels.EXPONENTIAL
LAMPERTI = _pykernels.LAMPERTI
TRUNC_EM = _pykernels.TRUNC_EM
EULER = _pykernels.EULER

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _default_backend() -> str:
    forced = os.environ.get("SEMIDISCRETE_BACKEND", "").strip().lower()
    if forced:
        if forced not in _BACKENDS:
            raise ImportError(f"SEMIDISCRETE_BACKEND={forced!r} is not available "
                              f"(have {available_backends()})")
        return forced
    return "cython" if "cython" in _BACKENDS else "python"


BACKEND = _default_backend()


def run_batch(code: int, y0: float, dw: np.ndarray, dt: float, cap: float = np.inf,
              exact: bool = False, aux: np.ndarray | None = None, record: bool = False,
              backend: str | None = None):
    """Iterate one scheme over a batch of paths.

    ``dw`` has shape ``(n_paths, n_steps)``.  Returns ``(terminal, diverged_at,
    trajectory)`` where ``diverged_at[i]`` is the step index at which path ``i``
    first became non-finite (``-1`` if never) and ``trajectory`` is ``None``
    unless ``record``.  Lamperti-coordinate results are reported as ``x``.
    """
    impl = _BACKENDS[backend or BACKEND]
    dw = np.ascontiguousarray(dw, dtype=np.float64)
    if dw.ndim != 2:
        raise ValueError("dw must be 2-D (n_paths, n_steps)")
    n_paths, n_steps = dw.shape
    if exact:
        if aux is None or aux.shape != dw.shape:
            raise ValueError("exact Gaussian mode needs aux normals shaped like dw")
        aux = np.ascontiguousarray(aux, dtype=np.float64)
    else:
        aux = np.empty((0, 0))
    traj = np.empty((n_paths, n_steps + 1) if record else (0, 0))
    terminal = np.empty(n_paths)
    diverged_at = np.empty(n_paths, dtype=np.int64)
    impl.run_batch(int(code), float(y0), dw, float(dt), float(cap), bool(exact), aux,
                   traj, terminal, diverged_at)
    return terminal, diverged_at, (traj if record else None)
