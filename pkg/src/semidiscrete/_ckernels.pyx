# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch kernels: one path at a time, GIL released.

Same contract as ``_pykernels.run_batch``.
"""

from libc.math cimport exp, expm1, sqrt, fabs, fmin, copysign, isfinite, NAN

cdef enum:
    LANGEVIN = 0
    EXPONENTIAL = 1
    LAMPERTI = 2
    TRUNC_EM = 3
    EULER = 4


cdef inline double fmax0(double v) noexcept nogil:
    return v if v > 0.0 else 0.0


cdef inline double _clamp(double y, double cap) noexcept nogil:
    if y == 0.0:
        return 0.0
    return copysign(fmin(fabs(y), cap), y)


cdef inline double _langevin(double y, double dw, double dt, double cap,
                             bint exact, double z) noexcept nogil:
    cdef double p = _clamp(y, cap)
    cdef double c = p * p
    cdef double decay = exp(-10.0 * c * dt)
    cdef double sd, cov, rho, g
    if not exact:
        return decay * (y + c * dw)
    if c == 0.0:
        return y
    sd = sqrt(-expm1(-20.0 * c * dt) / (20.0 * c))
    cov = -expm1(-10.0 * c * dt) / (10.0 * c)
    rho = fmin(cov / (sd * sqrt(dt)), 1.0)
    g = rho * dw / sqrt(dt) + sqrt(fmax0(1.0 - rho * rho)) * z
    return decay * y + c * sd * g


cdef inline double _step(int code, double y, double dw, double dt, double cap,
                         bint exact, double z) noexcept nogil:
    cdef double p, s
    if code == LANGEVIN:
        return _langevin(y, dw, dt, cap, exact, z)
    elif code == EXPONENTIAL:
        p = _clamp(y, cap)
        return y * exp(-10.5 * p * p * dt + p * dw)
    elif code == LAMPERTI:
        s = dw + y
        return -sqrt(s * s + 22.0 * dt)
    elif code == TRUNC_EM:
        p = _clamp(y, cap)
        return y - 10.0 * p * p * p * dt + p * p * dw
    else:
        return y - 10.0 * y * y * y * dt + y * y * dw


def run_batch(int code, double y0, const double[:, ::1] dw, double dt, double cap,
              bint exact, const double[:, ::1] aux, double[:, ::1] traj,
              double[::1] terminal, long long[::1] diverged_at):
    if code < LANGEVIN or code > EULER:
        raise ValueError(f"unknown kernel code {code}")
    cdef Py_ssize_t n_paths = dw.shape[0]
    cdef Py_ssize_t n_steps = dw.shape[1]
    cdef bint record = traj.shape[0] > 0
    cdef bint lamperti = code == LAMPERTI
    cdef Py_ssize_t i, n, k
    cdef double y, z = 0.0
    with nogil:
        for i in range(n_paths):
            diverged_at[i] = -1
            y = -1.0 / y0 if lamperti else y0
            if record:
                traj[i, 0] = y0
            for n in range(n_steps):
                if exact:
                    z = aux[i, n]
                y = _step(code, y, dw[i, n], dt, cap, exact, z)
                if not isfinite(y):
                    diverged_at[i] = n + 1
                    y = NAN
                    if record:
                        for k in range(n + 1, n_steps + 1):
                            traj[i, k] = NAN
                    break
                if record:
                    traj[i, n + 1] = -1.0 / y if lamperti else y
            terminal[i] = -1.0 / y if lamperti else y
