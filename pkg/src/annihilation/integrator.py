"""Adaptive integration of the particle ODE between collisions.

The stepper is a Dormand-Prince 5(4) pair whose local error is measured
relative to each particle's distance to its nearest neighbour, and whose
step is capped by ``kappa * (min gap)**(a + 1)``, the time scale on which a
colliding pair closes its gap.  Integration stops once the smallest gap
falls below ``collision_gap_epsilon``; the collision layer itself is left to
:mod:`annihilation.collisions`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .errors import DomainError, OrderingError, StepFailure
from .model import ParticleSystem

__all__ = [
    "StepController",
    "TrajectorySegment",
    "default_epsilon",
    "adaptive_step",
    "integrate_segment",
    "reference_integrate",
    "kernel_velocity",
]

GAP_BELOW_EPSILON = "gap_below_epsilon"
REACHED_T = "reached_T"


def default_epsilon(a):
    """Collision layer width whose closing time ``eps**(1+a)`` is about ``1e-12``."""
    return 1e-12 ** (1.0 / (1.0 + a))


@dataclass(frozen=True)
class StepController:
    """Tolerances and step bounds for :func:`integrate_segment`.

    ``collision_gap_epsilon=None`` picks :func:`default_epsilon` for the law's
    exponent.  Clusters are gaps below ``cluster_factor * epsilon``.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    gap_cap_kappa: float = 0.02
    h_min: float = 1e-22
    h_max: float = 0.05
    collision_gap_epsilon: float | None = None
    cluster_factor: float = 10.0
    max_steps: int = 2_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "gap_cap_kappa", "h_min", "h_max", "cluster_factor"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if not self.h_min < self.h_max:
            raise ValueError(f"h_min ({self.h_min}) must be smaller than h_max ({self.h_max})")
        if self.collision_gap_epsilon is not None and not self.collision_gap_epsilon > 0:
            raise ValueError("collision_gap_epsilon must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")

    def epsilon(self, a):
        if self.collision_gap_epsilon is None:
            return default_epsilon(a)
        return self.collision_gap_epsilon

    def cluster_epsilon(self, a):
        return self.cluster_factor * self.epsilon(a)

    def with_epsilon(self, epsilon):
        return replace(self, collision_gap_epsilon=epsilon)


@dataclass
class TrajectorySegment:
    """Samples of one inter-collision interval.

    ``step`` flags samples that are accepted integrator states (the initial
    state included); the others come from dense output on a requested grid.
    ``t_end`` is the nominal end of the interval: the restart time after a
    collision, or the final time.
    """

    times: np.ndarray
    positions: np.ndarray
    labels: np.ndarray
    signs: np.ndarray
    step: np.ndarray
    step_sizes: np.ndarray
    error_estimates: np.ndarray
    stop_reason: str
    n_total: int
    forcing: object = None
    t_end: float = None

    def __post_init__(self):
        if self.t_end is None:
            self.t_end = float(self.times[-1])

    @property
    def n(self):
        return self.positions.shape[1]

    @property
    def t_start(self):
        return float(self.times[0])

    @property
    def t_stop(self):
        """Time of the last integrated state."""
        return float(self.times[-1])

    @property
    def interval(self):
        return (self.t_start, self.t_end)

    @property
    def gaps(self):
        return np.diff(self.positions, axis=1)

    def accepted(self):
        """Copy restricted to accepted integrator states."""
        keep = self.step
        return replace(
            self,
            times=self.times[keep],
            positions=self.positions[keep],
            step=self.step[keep],
            step_sizes=self.step_sizes[keep],
            error_estimates=self.error_estimates[keep],
        )

    def system_at(self, k):
        return ParticleSystem(self.positions[k], self.signs, self.labels, self.n_total, self.forcing)

    def column(self, label):
        """Index of original particle ``label`` in ``positions``."""
        hits = np.flatnonzero(self.labels == label)
        if not len(hits):
            raise KeyError(f"particle {label} is not alive in this segment")
        return int(hits[0])


def _pack(law, system):
    fk, fp = law.f_reg.code()
    gk, gp = law.g_ext.code()
    n = system.n
    if system.reduced:
        fkind, fparams = system.forcing.code(system.labels.tolist())
        reduced = 1
    else:
        fkind, fparams = np.zeros(n, dtype=np.int64), np.zeros((n, 3))
        reduced = 0
    return (law.a, fk, fp, gk, gp, reduced, fkind, fparams)


def kernel_velocity(law, system, t=0.0, kernels=None):
    """Velocity field evaluated by the selected kernel backend."""
    kernels = kernels or _backend.kernels
    out = np.empty(system.n)
    kernels.velocity(float(t), np.ascontiguousarray(system.positions), system.signs.astype(float),
                     *_pack(law, system), out)
    return out


def _min_gap(x):
    return float(np.min(np.diff(x))) if len(x) > 1 else math.inf


class _Stepper:
    """Mutable integration state shared by :func:`adaptive_step` and :func:`integrate_segment`."""

    def __init__(self, law, system, t, controller, kernels=None, h=None):
        self.kernels = kernels or _backend.kernels
        self.a = law.a
        self.ctrl = controller
        self.pack = _pack(law, system)
        self.b = system.signs.astype(float)
        self.x = np.array(system.positions, dtype=float)
        self.t = float(t)
        n = len(self.x)
        self.work = np.empty((6, n))
        self.y = np.empty(n)
        self.k1 = np.empty(n)
        self.k_new = np.empty(n)
        self.kernels.velocity(self.t, self.x, self.b, *self.pack, self.k1)
        self.h = controller.h_max if h is None else float(h)

    def cap(self):
        rmin = _min_gap(self.x)
        if math.isinf(rmin):
            return math.inf
        return self.ctrl.gap_cap_kappa * rmin ** (self.a + 1.0)

    def step(self, t_end):
        """Advance by one accepted step, never past ``t_end``; returns ``(h, err_norm)``."""
        ctrl = self.ctrl
        remaining = t_end - self.t
        h = min(self.h, self.cap(), ctrl.h_max, remaining)
        n = len(self.x)
        while True:
            err = self.kernels.dopri_step(
                self.t, h, self.x, self.k1, self.b, *self.pack,
                ctrl.rel_tol, ctrl.abs_tol, self.work, self.y, self.k_new,
            )
            ordered = n < 2 or bool(np.all(self.y[1:] > self.y[:-1]))
            if ordered and err <= 1.0:
                break
            if not ordered or not math.isfinite(err):
                h *= 0.5
            else:
                h *= max(0.2, 0.9 * err ** -0.2)
            if h < ctrl.h_min:
                raise StepFailure(
                    f"step size fell below h_min={ctrl.h_min:g} at t={self.t!r} "
                    f"(min gap {_min_gap(self.x):.3e})"
                )
        self.t = t_end if h == remaining else self.t + h
        self.x, self.y = self.y, self.x
        self.k1, self.k_new = self.k_new, self.k1
        growth = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        self.h = h * growth
        return h, err


def adaptive_step(law, system, t, controller, h=None, kernels=None):
    """Take one accepted adaptive step from ``(system, t)``.

    Returns ``(new_system, new_t, h_used, error_estimate)``, where
    ``error_estimate`` is the local error relative to the nearest-neighbour
    distance (at most ``rel_tol`` for an accepted step, up to ``abs_tol``).
    """
    if system.n > 1 and not system.is_ordered():
        raise OrderingError("positions must be strictly increasing")
    stepper = _Stepper(law, system, t, controller, kernels, h)
    h_used, err = stepper.step(math.inf)
    return system.with_positions(stepper.x.copy()), stepper.t, h_used, err * controller.rel_tol


def _hermite(t0, t1, x0, x1, v0, v1, s):
    h = t1 - t0
    th = (s - t0) / h
    h00 = (1 + 2 * th) * (1 - th) ** 2
    h10 = th * (1 - th) ** 2
    h01 = th**2 * (3 - 2 * th)
    h11 = th**2 * (th - 1)
    return h00 * x0 + h10 * h * v0 + h01 * x1 + h11 * h * v1


def integrate_segment(law, system, t0, t_end, controller, grid=None, kernels=None):
    """Integrate until the smallest gap drops below epsilon or ``t_end`` is reached.

    Every accepted step is sampled.  Times in ``grid`` are added by cubic
    Hermite interpolation of the bracketing steps.
    """
    if not t0 < t_end:
        raise ValueError(f"need t0 < t_end, got {t0} and {t_end}")
    if system.n > 1 and not system.is_ordered():
        raise OrderingError("initial positions must be strictly increasing")
    eps = controller.epsilon(law.a)
    grid = np.sort(np.asarray([] if grid is None else grid, dtype=float))
    grid = grid[(grid > t0) & (grid <= t_end)]
    g_next = 0

    times = [float(t0)]
    states = [np.array(system.positions, dtype=float)]
    step_flags = [True]
    sizes = [0.0]
    errors = [0.0]
    reason = REACHED_T

    def finish():
        return TrajectorySegment(
            times=np.array(times),
            positions=np.array(states).reshape(len(times), system.n),
            labels=system.labels.copy(),
            signs=system.signs.copy(),
            step=np.array(step_flags),
            step_sizes=np.array(sizes),
            error_estimates=np.array(errors),
            stop_reason=reason,
            n_total=system.n_total,
            forcing=system.forcing,
        )

    if system.n == 0:
        times.append(float(t_end))
        states.append(np.empty(0))
        step_flags.append(True)
        sizes.append(float(t_end - t0))
        errors.append(0.0)
        return finish()

    stepper = _Stepper(law, system, t0, controller, kernels)
    steps = 0
    while True:
        if _min_gap(stepper.x) < eps:
            reason = GAP_BELOW_EPSILON
            break
        if stepper.t >= t_end:
            break
        if steps >= controller.max_steps:
            raise StepFailure(f"exceeded max_steps={controller.max_steps} at t={stepper.t!r}")
        t_prev, x_prev, v_prev = stepper.t, stepper.x.copy(), stepper.k1.copy()
        h, err = stepper.step(t_end)
        steps += 1
        while g_next < len(grid) and grid[g_next] < stepper.t:
            s = grid[g_next]
            times.append(float(s))
            states.append(_hermite(t_prev, stepper.t, x_prev, stepper.x, v_prev, stepper.k1, s))
            step_flags.append(False)
            sizes.append(0.0)
            errors.append(0.0)
            g_next += 1
        if g_next < len(grid) and grid[g_next] == stepper.t:
            g_next += 1
        times.append(stepper.t)
        states.append(stepper.x.copy())
        step_flags.append(True)
        sizes.append(h)
        errors.append(err * controller.rel_tol)
    return finish()


def reference_integrate(law, system, t0, t_end, fixed_h, kernels=None):
    """Fixed-step classical RK4; an oracle for short horizons away from collisions.

    The last step is shortened so the segment ends exactly at ``t_end``.
    """
    if not t0 < t_end:
        raise ValueError(f"need t0 < t_end, got {t0} and {t_end}")
    if not fixed_h > 0:
        raise ValueError("fixed_h must be positive")
    if system.n > 1 and not system.is_ordered():
        raise OrderingError("initial positions must be strictly increasing")
    kernels = kernels or _backend.kernels
    n = system.n
    span = t_end - t0
    nsteps = int(math.floor(span / fixed_h * (1 + 1e-12)))
    out = np.empty((nsteps + 2, n))
    work = np.empty((5, n))
    b = system.signs.astype(float)
    pack = _pack(law, system)
    x0 = np.array(system.positions, dtype=float)
    bad = kernels.rk4_run(float(t0), float(fixed_h), nsteps, x0, b, *pack, work, out[: nsteps + 1])
    if bad >= 0:
        raise DomainError(f"reference integration lost particle ordering at step {bad}")
    times = t0 + fixed_h * np.arange(nsteps + 1)
    tail = t_end - times[-1]
    if tail > 1e-12 * span:
        last = np.empty((2, n))
        bad = kernels.rk4_run(float(times[-1]), float(tail), 1, out[nsteps].copy(), b, *pack, work, last)
        if bad >= 0:
            raise DomainError("reference integration lost particle ordering on the final step")
        out[nsteps + 1] = last[1]
        times = np.append(times, t_end)
        out = out[: nsteps + 2]
    else:
        times[-1] = t_end
        out = out[: nsteps + 1]
    m = len(times)
    return TrajectorySegment(
        times=times,
        positions=out,
        labels=system.labels.copy(),
        signs=system.signs.copy(),
        step=np.ones(m, dtype=bool),
        step_sizes=np.r_[0.0, np.diff(times)],
        error_estimates=np.zeros(m),
        stop_reason=REACHED_T,
        n_total=system.n_total,
        forcing=system.forcing,
    )
