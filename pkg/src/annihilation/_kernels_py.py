"""Pure-Python (numpy) twin of the compiled ``_kernels`` module.

Same call signatures; used when the extension is not built or when
``ANNIHILATION_PURE_PYTHON`` is set.
"""
import math

import numpy as np

BACKEND = "python"

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _rhs(t, x, b, a, fk, fp, gk, gp, reduced, fkind, fparams):
    n = len(x)
    out = np.zeros(n)
    if n > 1:
        d = x[:, None] - x[None, :]
        off = ~np.eye(n, dtype=bool)
        safe = np.where(off, d, 1.0)
        force = np.sign(safe) * np.abs(safe) ** (-a)
        if fk == 1:
            force = force + fp[0] * safe
        elif fk == 2:
            force = force + fp[0] * safe**3
        elif fk == 3:
            force = force + fp[0] * np.sin(fp[1] * safe)
        force[~off] = 0.0
        out = b * (force @ b)
    if reduced:
        out = out + np.where(fkind == 1, fparams[:, 0], 0.0)
        out = out + np.where(fkind == 2, fparams[:, 0] * np.sin(fparams[:, 1] * t + fparams[:, 2]), 0.0)
    elif gk == 1:
        out = out + b * gp[0]
    elif gk == 2:
        out = out + b * (gp[0] * x + gp[1])
    elif gk == 3:
        out = out + b * gp[0] * np.sin(gp[1] * x + gp[2])
    return out


def velocity(t, x, b, a, fk, fp, gk, gp, reduced, fkind, fparams, out):
    out[:] = _rhs(t, np.asarray(x), np.asarray(b), a, fk, fp, gk, gp, reduced, fkind, fparams)


def dopri_step(t, h, x, k1, b, a, fk, fp, gk, gp, reduced, fkind, fparams,
               rtol, atol, work, y_out, k_out):
    """One trial step; returns the scaled error norm (``<= 1`` means acceptable)."""
    x = np.asarray(x)
    b = np.asarray(b)
    args = (b, a, fk, fp, gk, gp, reduced, fkind, fparams)
    ks = [np.asarray(k1)]
    for stage in range(1, 6):
        y = x + h * sum(c * k for c, k in zip(_A[stage], ks))
        ks.append(_rhs(t + _C[stage] * h, y, *args))
    y_new = x + h * sum(c * k for c, k in zip(_B, ks) if c != 0.0)
    k7 = _rhs(t + h, y_new, *args)
    ks.append(k7)
    y_out[:] = y_new
    k_out[:] = k7
    e = h * sum(c * k for c, k in zip(_E, ks) if c != 0.0)
    n = len(x)
    if n == 1:
        d = np.array([max(1.0, abs(x[0]))])
    else:
        gaps = np.minimum(np.diff(x), np.diff(y_new))
        d = np.full(n, np.inf)
        d[1:] = gaps
        d[:-1] = np.minimum(d[:-1], gaps)
    if np.any(d <= 0):
        return math.inf
    err = np.abs(e) / (atol + rtol * d)
    if not (np.all(np.isfinite(err)) and np.all(np.isfinite(y_new))):
        return math.inf
    return float(err.max()) if n else 0.0


def rk4_run(t0, h, nsteps, x0, b, a, fk, fp, gk, gp, reduced, fkind, fparams, work, out):
    """Classical RK4 with fixed ``h``; returns the first unordered step index or -1."""
    args = (np.asarray(b), a, fk, fp, gk, gp, reduced, fkind, fparams)
    y = np.array(x0, dtype=float)
    out[0] = y
    for s in range(nsteps):
        t = t0 + s * h
        k1 = _rhs(t, y, *args)
        k2 = _rhs(t + 0.5 * h, y + 0.5 * h * k1, *args)
        k3 = _rhs(t + 0.5 * h, y + 0.5 * h * k2, *args)
        k4 = _rhs(t + h, y + h * k3, *args)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[s + 1] = y
        if not np.all(np.diff(y) > 0):
            return s + 1
    return -1
