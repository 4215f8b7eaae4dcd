"""Closed-form oracles, Hölder-exponent fits and trajectory estimate checks.

All checks consume a :class:`~annihilation.collisions.HybridTrajectory` and
evaluate gap velocities from the vector field at the stored states, never
by differencing samples in time.  Each check yields :class:`BoundEntry`
records collected in a :class:`BoundReport`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, InsufficientWindowError
from .model import (
    InteractionLaw,
    ParticleSystem,
    df_pure,
    external_velocity,
    f_derivative,
    f_eval,
    f_pure,
    kernel_g,
    kernel_h,
    pairwise_velocity,
    table1_contribution_sign,
)

__all__ = [
    "HolderFit",
    "BoundEntry",
    "BoundReport",
    "collapse_prefactor",
    "two_body_closed_form",
    "fit_holder_exponent",
    "collision_window",
    "check_holder_exponents",
    "check_upper_bound",
    "check_lower_bounds",
    "gap_ratio_b",
    "gap_ratio_constant",
    "check_gap_ratio_bound",
    "check_differential_inequalities",
    "to_gap_coordinates",
    "from_gap_coordinates",
    "check_M_lipschitz",
    "check_conservation",
    "kernel_property_suite",
    "contribution_sign_suite",
    "CONTRIBUTION_SIGN_ROWS",
    "verify_trajectory",
]

DEFAULT_LOWER_FLOOR = 1e-3
WINDOW_DRIFT = 0.10
INEQUALITY_RTOL = 1e-8


@dataclass(frozen=True)
class HolderFit:
    """Log-log regression of ``q`` against ``tau_hat - t``."""

    exponent: float
    prefactor: float
    t_lo: float
    t_hi: float
    residual: float
    target: float = math.nan
    n_samples: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class BoundEntry:
    """Outcome of one check.  Entries with ``asserted=False`` are informational."""

    name: str
    passed: bool
    value: float = math.nan
    limit: float = math.nan
    margin: float = math.nan
    asserted: bool = True
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": _jsonable(self.value),
            "limit": _jsonable(self.limit),
            "margin": _jsonable(self.margin),
            "asserted": self.asserted,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


@dataclass
class BoundReport:
    entries: list = field(default_factory=list)

    def extend(self, entries):
        self.entries.extend(entries)
        return self

    @property
    def passed(self):
        return all(e.passed for e in self.entries if e.asserted)

    def failures(self):
        return [e for e in self.entries if e.asserted and not e.passed]

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def named(self, prefix):
        return [e for e in self.entries if e.name.startswith(prefix)]

    def to_dict(self):
        return {"passed": self.passed, "entries": [e.to_dict() for e in self.entries]}


# -- closed-form two-body solution ------------------------------------------


def collapse_prefactor(a):
    """``c_a = (2(1+a))**(1/(1+a))``, the prefactor of the two-body gap ``c_a (tau - t)**(1/(1+a))``."""
    return (2.0 * (1.0 + a)) ** (1.0 / (1.0 + a))


def two_body_closed_form(a, r0, x_center, t):
    """Exact opposite-sign pair with pure power-law force and no external force.

    The gap obeys ``dr/dt = -2 r**-a``, hence ``r**(1+a) = r0**(1+a) - 2(1+a) t``.
    Returns ``(tau1, r(t), positions(t))`` with positions ``x_center -/+ r/2``.
    """
    if not (a > 0 and r0 > 0):
        raise DomainError("need a > 0 and r0 > 0")
    tau1 = r0 ** (1.0 + a) / (2.0 * (1.0 + a))
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > tau1):
        raise DomainError(f"t must lie in [0, tau1={tau1!r}]")
    r = (2.0 * (1.0 + a) * (tau1 - t_arr)) ** (1.0 / (1.0 + a))
    positions = np.stack([x_center - 0.5 * r, x_center + 0.5 * r], axis=-1)
    if np.ndim(t) == 0:
        r = float(r)
    return tau1, r, positions


# -- power-law fits -----------------------------------------------------------


def fit_holder_exponent(samples, tau_hat, target=math.nan, min_samples=10, min_decades=1.0):
    """Slope of ``log q`` against ``log(tau_hat - t)`` for samples ``(t, q)``.

    ``residual`` is the coefficient of determination of the regression.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    t, q = samples[:, 0], samples[:, 1]
    if np.any(q <= 0) or not np.all(np.isfinite(q)):
        raise DomainError("fit samples must be positive")
    if np.any(t >= tau_hat):
        raise DomainError("fit samples must precede tau_hat")
    if len(t) < min_samples:
        raise InsufficientWindowError(f"need at least {min_samples} samples, got {len(t)}")
    dt = tau_hat - t
    decades = math.log10(dt.max() / dt.min())
    if decades < min_decades:
        raise InsufficientWindowError(f"window spans {decades:.2f} decades; need {min_decades}")
    u, v = np.log(dt), np.log(q)
    slope, intercept = np.polyfit(u, v, 1)
    fitted = slope * u + intercept
    ss_res = float(np.sum((v - fitted) ** 2))
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return HolderFit(
        exponent=float(slope),
        prefactor=float(math.exp(intercept)),
        t_lo=float(t.min()),
        t_hi=float(t.max()),
        residual=float(min(1.0, max(0.0, r2))),
        target=float(target),
        n_samples=len(t),
    )


def collision_window(segment, event, decades=3.0, offset=10.0):
    """Default fit window ``(t_lo, t_hi)`` before ``event``.

    Starts ``offset`` times the final distance to the collision away from it
    (so the fit is not dominated by the extrapolated ``tau_hat``) and extends
    ``decades`` decades of ``tau_hat - t`` back, clipped to the segment start.
    """
    tau = event.tau_hat
    tiny = 64 * np.finfo(float).eps * max(abs(tau), 1.0)
    lo = offset * max(tau - segment.t_stop, tiny)
    hi = min(lo * 10.0**decades, tau - segment.t_start)
    return tau - hi, tau - lo


def _window_mask(times, window):
    t_lo, t_hi = window
    return (times >= t_lo) & (times <= t_hi)


def _event_data(trajectory, event, window):
    seg = trajectory.event_segment(event).accepted()
    if window is None:
        window = collision_window(seg, event)
    mask = _window_mask(seg.times, window)
    cols = [seg.column(k) for k in event.members]
    return seg, window, mask, cols


def _gap_name(event, k):
    return f"{event.members[k] + 1}-{event.members[k + 1] + 1}"


def check_holder_exponents(trajectory, event, a, window=None, tol=0.05, min_residual=0.999):
    """Fit the collapse exponent of every colliding gap; target ``1/(1+a)``."""
    seg, window, mask, cols = _event_data(trajectory, event, window)
    target = 1.0 / (1.0 + a)
    entries = []
    for k in range(len(cols) - 1):
        q = seg.positions[mask, cols[k + 1]] - seg.positions[mask, cols[k]]
        name = f"holder_exponent[tau={event.tau_hat:.6g},gap={_gap_name(event, k)}]"
        try:
            fit = fit_holder_exponent(np.column_stack([seg.times[mask], q]), event.tau_hat, target)
        except (InsufficientWindowError, DomainError) as exc:
            entries.append(BoundEntry(name, False, details={"error": str(exc)}))
            continue
        ok = abs(fit.exponent - target) <= tol and fit.residual >= min_residual
        entries.append(
            BoundEntry(name, ok, value=fit.exponent, limit=target, margin=tol - abs(fit.exponent - target),
                       details=fit.to_dict())
        )
    return entries


def _ratios(seg, mask, series, tau, a):
    dt = tau - seg.times[mask]
    return series / dt ** (1.0 / (1.0 + a)), dt


def _half_mask(dt):
    # Half of the window nearest the collision, in log scale.
    cut = math.sqrt(dt.min() * dt.max())
    return dt <= cut


def _stability(full, half):
    if not (math.isfinite(full) and math.isfinite(half)) or full == 0:
        return math.inf
    return abs(half - full) / abs(full)


def check_upper_bound(trajectory, event, a, window=None):
    """Fitted ``C`` in ``r_i <= C (tau - t)**(1/(1+a))`` for every colliding gap.

    ``C`` is the maximum ratio over the window; it passes when finite and
    within 10% of its value on the half window nearest the collision.
    """
    seg, window, mask, cols = _event_data(trajectory, event, window)
    entries = []
    for k in range(len(cols) - 1):
        r = seg.positions[mask, cols[k + 1]] - seg.positions[mask, cols[k]]
        name = f"upper_bound[tau={event.tau_hat:.6g},gap={_gap_name(event, k)}]"
        if len(r) < 2:
            entries.append(BoundEntry(name, False, details={"error": "empty window"}))
            continue
        ratio, dt = _ratios(seg, mask, r, event.tau_hat, a)
        c_full = float(ratio.max())
        c_half = float(ratio[_half_mask(dt)].max())
        drift = _stability(c_full, c_half)
        entries.append(
            BoundEntry(name, math.isfinite(c_full) and drift < WINDOW_DRIFT, value=c_full,
                       margin=WINDOW_DRIFT - drift,
                       details={"C_upper": c_full, "C_upper_half_window": c_half, "drift": drift,
                                "window": list(window)})
        )
    return entries


def check_lower_bounds(trajectory, event, a, window=None, floor=DEFAULT_LOWER_FLOOR):
    """Fitted lower constants for the colliding gaps and the two outermost members.

    ``c_lower`` is the minimum of ``r_i/(tau - t)**(1/(1+a))``; ``c_outer``
    the minimum of ``|x_k(t) - y|/(tau - t)**(1/(1+a))`` for the outer
    members, with ``y`` the collision location.  Each passes when at least
    ``floor`` and within 10% of its half-window value.
    """
    seg, window, mask, cols = _event_data(trajectory, event, window)
    entries = []

    def entry(name, series, extra):
        if len(series) < 2:
            return BoundEntry(name, False, details={"error": "empty window"})
        ratio, dt = _ratios(seg, mask, series, event.tau_hat, a)
        c_full = float(ratio.min())
        c_half = float(ratio[_half_mask(dt)].min())
        drift = _stability(c_full, c_half)
        return BoundEntry(name, c_full >= floor and drift < WINDOW_DRIFT, value=c_full, limit=floor,
                          margin=min(c_full - floor, WINDOW_DRIFT - drift),
                          details={extra: c_full, extra + "_half_window": c_half, "drift": drift,
                                   "window": list(window)})

    for k in range(len(cols) - 1):
        r = seg.positions[mask, cols[k + 1]] - seg.positions[mask, cols[k]]
        entries.append(entry(f"lower_bound[tau={event.tau_hat:.6g},gap={_gap_name(event, k)}]", r, "c_lower"))
    for side, col in (("left", cols[0]), ("right", cols[-1])):
        d = np.abs(seg.positions[mask, col] - event.location)
        entries.append(entry(f"outer_bound[tau={event.tau_hat:.6g},{side}]", d, "c_outer"))
    return entries


# -- gap ratio bound ------------------------------------------------------------


def gap_ratio_b(a):
    """``b = min(1, a/2)``."""
    return min(1.0, 0.5 * a)


def gap_ratio_constant(a):
    """``c0 = min((b/16)**(1/a), (b/12)**(1/(a+1)))``."""
    b = gap_ratio_b(a)
    return min((b / 16.0) ** (1.0 / a), (b / 12.0) ** (1.0 / (a + 1.0)))


def _gap_ratio_min(x):
    # min over 0 <= i < j <= p-1, (i, j) != (0, p-1), of r_ji / min(r_{i-1}, r_j)
    p = x.shape[-1]
    gaps = np.diff(x, axis=-1)
    best = np.full(x.shape[:-1], np.inf)
    for i in range(p - 1):
        for j in range(i + 1, p):
            if i == 0 and j == p - 1:
                continue
            left = gaps[..., i - 1] if i >= 1 else np.inf
            right = gaps[..., j] if j <= p - 2 else np.inf
            best = np.minimum(best, (x[..., j] - x[..., i]) / np.minimum(left, right))
    return best


def check_gap_ratio_bound(trajectory, event, a, window=None):
    """Check ``r_ji >= c0 min(r_{i-1}, r_j)`` inside the colliding group.

    Indices are local to the group, whose boundary gaps are infinite.  The
    default window is the last tenth of the segment before the collision.
    """
    seg = trajectory.event_segment(event).accepted()
    if window is None:
        span = event.tau_hat - seg.t_start
        window = (event.tau_hat - 0.1 * span, event.tau_hat)
    mask = _window_mask(seg.times, window)
    cols = [seg.column(k) for k in event.members]
    c0 = gap_ratio_constant(a)
    name = f"gap_ratio_bound[tau={event.tau_hat:.6g}]"
    x = seg.positions[np.ix_(mask, cols)]
    if len(cols) < 3 or not len(x):
        return BoundEntry(name, True, value=math.inf, limit=c0, margin=math.inf,
                          details={"c0": c0, "vacuous": True, "samples": int(mask.sum())})
    worst = float(_gap_ratio_min(x).min())
    return BoundEntry(name, worst >= c0 * (1 - 1e-12), value=worst, limit=c0, margin=worst - c0,
                      details={"c0": c0, "b": gap_ratio_b(a), "samples": int(mask.sum())})


# -- differential inequalities ---------------------------------------------------


def _alternating(signs):
    return bool(np.all(signs[1:] != signs[:-1]))


def remainder_bound(law, segment, forcing_bound=None):
    """Declared bound on ``|F_i|``, the non-pure part of each particle velocity.

    ``F_i`` collects the regular-part interactions (``n-1`` terms bounded by
    ``sup |f_reg|`` over the segment's spread) and the external force or
    forcing.  ``forcing_bound`` overrides the external/forcing contribution.
    """
    x = segment.positions
    n = segment.n
    spread = float(np.max(x[:, -1] - x[:, 0])) if n > 1 else 0.0
    freg = (n - 1) * law.f_reg.sup_abs(spread) if n > 1 else 0.0
    if forcing_bound is not None:
        ext = float(forcing_bound)
    elif segment.forcing is not None:
        ext = float(segment.forcing.bounds(segment.labels.tolist()).max()) if n else 0.0
    else:
        ext = law.g_ext.sup_abs(float(x.min()), float(x.max())) if x.size else 0.0
    return freg + ext


def _le(lhs, rhs, scale, rtol):
    # lhs <= rhs up to rtol * scale; returns normalised margins.
    return (rhs - lhs) / np.maximum(scale, np.finfo(float).tiny), rhs - lhs >= -rtol * scale


def check_differential_inequalities(trajectory, law, forcing_bound=None, rtol=INEQUALITY_RTOL):
    """Check the gap-velocity bounds at every accepted state.

    With ``f = sgn(x)|x|**-a`` and ``C = 2 sup|F_i|`` (see :func:`remainder_bound`):

    * ``dr_i/dt >= -2 f(r_i) - C``;
    * ``b_i = -b_j``: ``dr_ji/dt <= -2 f(r_ji) + 2[f(r_j) + f(r_{i-1})] + C``;
    * ``b_i = b_j``: ``dr_ji/dt <= r_ji f'(r_ji) + f(r_j) + f(r_{i-1}) + C``;
    * ``r_i**a dr_i/dt >= -2`` when ``C = 0``; otherwise ``>= -3`` wherever
      ``C r_i**a <= 1``.

    Gaps beyond the ends are infinite with ``f(inf) = 0``.  Segments whose
    signs do not alternate are skipped and counted in the details.
    """
    a = law.a
    stats = {name: {"checks": 0, "fail": 0, "margin": math.inf} for name in ("gap_speed_lower_bound", "opposite_pair_speed_bound", "same_pair_speed_bound", "collapse_rate_bound")}
    skipped = 0
    c_values = []
    for seg in trajectory.segments:
        acc = seg.accepted()
        n = acc.n
        if n < 2 or len(acc.times) == 0:
            continue
        if not _alternating(acc.signs):
            skipped += 1
            continue
        C = 2.0 * remainder_bound(law, acc, forcing_bound)
        c_values.append(C)
        b = acc.signs
        for k in range(len(acc.times)):
            x = acc.positions[k]
            system = ParticleSystem(x, b, acc.labels, acc.n_total, acc.forcing)
            v = pairwise_velocity(law, x, b) + external_velocity(law, system, acc.times[k])
            r = np.diff(x)
            rdot = np.diff(v)
            fr = f_pure(a, r)
            # gap speed lower bound
            rhs = -2.0 * fr - C
            scale = np.abs(rdot) + np.abs(rhs)
            m, ok = _le(rhs, rdot, scale, rtol)
            _acc(stats["gap_speed_lower_bound"], m, ok)
            # collapse rate
            lhs = r**a * rdot
            if C == 0.0:
                m, ok = _le(-2.0, lhs, np.abs(lhs) + 2.0, rtol)
                _acc(stats["collapse_rate_bound"], m, ok)
            else:
                sel = C * r**a <= 1.0
                if np.any(sel):
                    m, ok = _le(-3.0, lhs[sel], np.abs(lhs[sel]) + 3.0, rtol)
                    _acc(stats["collapse_rate_bound"], m, ok)
            # pair speed upper bounds over all pairs i < j
            ii, jj = np.triu_indices(n, 1)
            rji = x[jj] - x[ii]
            vji = v[jj] - v[ii]
            r_ext = np.concatenate([[np.inf], r, [np.inf]])  # r_ext[k+1] == r_k
            f_right = f_pure(a, r_ext[jj + 1])
            f_left = f_pure(a, r_ext[ii])
            opposite = b[ii] != b[jj]
            if np.any(opposite):
                o = opposite
                rhs = -2.0 * f_pure(a, rji[o]) + 2.0 * (f_right[o] + f_left[o]) + C
                scale = np.abs(vji[o]) + 2.0 * np.abs(f_pure(a, rji[o])) + 2.0 * (f_right[o] + f_left[o]) + C
                m, ok = _le(vji[o], rhs, scale, rtol)
                _acc(stats["opposite_pair_speed_bound"], m, ok)
            same = ~opposite
            if np.any(same):
                s = same
                lead = rji[s] * df_pure(a, rji[s])
                rhs = lead + f_right[s] + f_left[s] + C
                scale = np.abs(vji[s]) + np.abs(lead) + f_right[s] + f_left[s] + C
                m, ok = _le(vji[s], rhs, scale, rtol)
                _acc(stats["same_pair_speed_bound"], m, ok)
    entries = []
    for name, st in stats.items():
        entries.append(
            BoundEntry(name, st["fail"] == 0, value=st["margin"], margin=st["margin"],
                       details={"checks": st["checks"], "violations": st["fail"],
                                "C": max(c_values, default=0.0), "rtol": rtol,
                                "skipped_segments": skipped,
                                "C_definition": "2 * ((n-1) sup|f_reg| over spread + sup|g| or sup|F_i|)"})
        )
    return entries


def _acc(st, margins, ok):
    margins = np.atleast_1d(margins)
    ok = np.atleast_1d(ok)
    st["checks"] += int(ok.size)
    st["fail"] += int(np.count_nonzero(~ok))
    if margins.size:
        st["margin"] = min(st["margin"], float(margins.min()))


# -- (M, r) coordinates ------------------------------------------------------------


def to_gap_coordinates(positions):
    """``(M, r)`` with ``M = sum x_i`` and ``r_i = x_{i+1} - x_i`` (last axis)."""
    x = np.asarray(positions, dtype=float)
    return x.sum(axis=-1), np.diff(x, axis=-1)


def from_gap_coordinates(M, gaps):
    """Inverse of :func:`to_gap_coordinates`; gaps must be positive."""
    r = np.asarray(gaps, dtype=float)
    if np.any(r <= 0):
        raise DomainError("gaps must be positive")
    n = r.shape[-1] + 1
    weights = np.arange(n - 1, 0, -1, dtype=float)
    x1 = (np.asarray(M, dtype=float) - (r * weights).sum(axis=-1)) / n
    zeros = np.zeros(r.shape[:-1] + (1,))
    return np.asarray(x1)[..., None] + np.concatenate([zeros, np.cumsum(r, axis=-1)], axis=-1)


def check_conservation(trajectory, tol=1e-9):
    """``|M(t) - M(t_start)|`` over every segment (meaningful when ``g = 0``)."""
    worst = 0.0
    for seg in trajectory.segments:
        if seg.n == 0:
            continue
        M = seg.positions.sum(axis=1)
        worst = max(worst, float(np.max(np.abs(M - M[0]))))
    return BoundEntry("sum_conservation", worst <= tol, value=worst, limit=tol, margin=tol - worst)


def check_M_lipschitz(trajectory, law, tol=1e-9):
    """Observed Lipschitz constant of ``M = sum x_i`` against its declared bound.

    ``dM/dt = sum_i b_i g(x_i)`` (or ``sum_i F_i``) because the pair forces
    cancel, so the bound is ``sum_i sup|g|`` over the visited range, or the
    sum of the forcing bounds.  Annihilations make ``M`` jump; each segment
    is measured separately.
    """
    observed = 0.0
    bound = 0.0
    for seg in trajectory.segments:
        if seg.n == 0 or len(seg.times) < 2:
            continue
        M = seg.positions.sum(axis=1)
        dt = np.diff(seg.times)
        keep = dt > 0
        if np.any(keep):
            # Changes below the rounding resolution of M carry no rate information.
            resolution = 4 * seg.n * np.finfo(float).eps * np.abs(seg.positions).max(axis=1)
            dM = np.maximum(np.abs(np.diff(M)) - resolution[1:], 0.0)
            observed = max(observed, float(np.max(dM[keep] / dt[keep])))
        if seg.forcing is not None:
            bound = max(bound, float(seg.forcing.bounds(seg.labels.tolist()).sum()))
        else:
            bound = max(bound, seg.n * law.g_ext.sup_abs(float(seg.positions.min()), float(seg.positions.max())))
    ok = observed <= bound * (1 + 1e-6) + tol
    return BoundEntry("M_lipschitz", ok, value=observed, limit=bound, margin=bound - observed)


# -- property suites -----------------------------------------------------------------

# Rows: (b_i, b_kappa, placement, sign when b_i = -b_j, sign when b_i = b_j).
CONTRIBUTION_SIGN_ROWS = (
    (+1, +1, "single_left", -1, -1),
    (+1, +1, "single_right", +1, -1),
    (+1, -1, "single_left", +1, +1),
    (+1, -1, "single_right", -1, +1),
    (+1, -1, "pair_left", -1, -1),
    (+1, -1, "pair_right", -1, +1),
    (+1, +1, "pair_left", +1, +1),
    (+1, +1, "pair_right", +1, -1),
)


def _regular_families():
    from .model import RegularPart

    return (RegularPart(), RegularPart.linear(0.7), RegularPart.cubic(-0.3), RegularPart.sine(0.5, 2.0))


def kernel_property_suite(a, n_samples=10_000, seed=0):
    """Randomised checks of oddness, monotonicity of ``f`` and the kernel properties."""
    rng = np.random.default_rng(seed)
    pure = InteractionLaw(a)
    entries = []

    x = rng.uniform(-10, 10, n_samples)
    x = x[x != 0]
    worst = 0.0
    for freg in _regular_families():
        law = InteractionLaw(a, freg)
        fx, fmx = f_eval(law, x), f_eval(law, -x)
        worst = max(worst, float(np.max(np.abs(fmx + fx) / np.maximum(np.abs(fx), 1e-300))))
    entries.append(BoundEntry("f_odd", worst <= 1e-12, value=worst, limit=1e-12))

    xp = rng.uniform(0, 10, n_samples)
    xp = xp[xp > 0]
    ok = bool(np.all(f_eval(pure, xp) > 0) and np.all(f_derivative(pure, xp, 1) < 0)
              and np.all(f_derivative(pure, xp, 2) > 0))
    entries.append(BoundEntry("f_monotone", ok, details={"samples": len(xp)}))

    rho = float(rng.uniform(0.1, 5.0))
    rp = np.sort(rng.uniform(0, 50, n_samples))
    rp = np.unique(rp[rp > 0])
    rn = np.sort(rng.uniform(-50 - rho, -rho, n_samples))
    rn = np.unique(rn[rn < -rho])
    gp, gn = kernel_g(pure, rp, rho), kernel_g(pure, rn, rho)
    ok = bool(np.all(gp > 0) and np.all(np.diff(gp) < 0) and np.all(gn < 0) and np.all(np.diff(gn) < 0))
    entries.append(BoundEntry("kernel_g_sign_monotone", ok, details={"rho": rho}))
    hp, hn = kernel_h(pure, rp, rho), kernel_h(pure, rn, rho)
    ok = bool(np.all(hp < 0) and np.all(np.diff(hp) > 0) and np.all(hn < 0) and np.all(np.diff(hn) < 0))
    entries.append(BoundEntry("kernel_h_sign_monotone", ok, details={"rho": rho}))

    r = rng.uniform(0, 20, n_samples) + 1e-9
    rhos = rng.uniform(0, 20, n_samples) + 1e-9
    h = kernel_h(pure, r, rhos)
    mid = f_derivative(pure, rhos + r, 1) * rhos
    ok = bool(np.all(h < mid) and np.all(mid < 0))
    entries.append(BoundEntry("h_convexity_bound", ok, value=float(np.max(h - mid)), details={"samples": n_samples}))
    return entries


def contribution_sign_suite(a, n_geometries=10_000, seed=0):
    """Evaluate every table row, and its global sign swap, on random admissible geometries."""
    rng = np.random.default_rng(seed)
    law = InteractionLaw(a)
    entries = []
    for row, (b_i, b_k, placement, sign_opp, sign_same) in enumerate(CONTRIBUTION_SIGN_ROWS, start=1):
        rho = rng.uniform(0.01, 10.0, n_geometries)
        d_near = rng.uniform(0.01, 10.0, n_geometries)
        d_far = d_near + rng.uniform(0.01, 10.0, n_geometries)
        bad = 0
        for swap in (1, -1):
            for b_j, expected in ((-b_i, sign_opp), (b_i, sign_same)):
                got = table1_contribution_sign(swap * b_i, swap * b_j, swap * b_k, placement, law,
                                               rho, d_near, d_far)
                bad += int(np.count_nonzero(got != expected))
        entries.append(BoundEntry(f"contribution_sign_row_{row}", bad == 0, value=bad,
                                  details={"placement": placement, "geometries": n_geometries}))
    return entries


# -- driver --------------------------------------------------------------------------


def verify_trajectory(trajectory, law, forcing_bound=None, suites=True, seed=0, tol=0.05):
    """Run every applicable check on a simulated trajectory."""
    report = BoundReport()
    a = law.a
    for event in trajectory.events:
        report.extend(check_holder_exponents(trajectory, event, a, tol=tol))
        report.extend(check_upper_bound(trajectory, event, a))
        report.extend(check_lower_bounds(trajectory, event, a))
        report.entries.append(check_gap_ratio_bound(trajectory, event, a))
        report.entries.append(_min_gap_fit(trajectory, event, law, tol))
        report.entries.append(
            BoundEntry(f"alternating_signs[tau={event.tau_hat:.6g}]",
                       all(s != t for s, t in zip(event.member_signs, event.member_signs[1:])),
                       details={"member_signs": list(event.member_signs)})
        )
    report.extend(check_differential_inequalities(trajectory, law, forcing_bound))
    conservation = check_conservation(trajectory)
    conservation.asserted = law.g_ext.is_zero and not any(s.forcing is not None for s in trajectory.segments)
    report.entries.append(conservation)
    report.entries.append(check_M_lipschitz(trajectory, law))
    if suites:
        report.extend(kernel_property_suite(a, seed=seed))
        report.extend(contribution_sign_suite(a, seed=seed))
    return report


def _min_gap_fit(trajectory, event, law, tol=0.05):
    # Hölder fit of the smallest gap; asserted only for a pure interaction.
    seg = trajectory.event_segment(event).accepted()
    window = collision_window(seg, event)
    mask = _window_mask(seg.times, window)
    name = f"min_gap_holder[tau={event.tau_hat:.6g}]"
    target = 1.0 / (1.0 + law.a)
    try:
        q = np.min(np.diff(seg.positions[mask], axis=1), axis=1)
        fit = fit_holder_exponent(np.column_stack([seg.times[mask], q]), event.tau_hat, target)
    except (InsufficientWindowError, DomainError, ValueError) as exc:
        return BoundEntry(name, False, asserted=law.is_pure, details={"error": str(exc)})
    ok = abs(fit.exponent - target) <= tol and fit.residual >= 0.999
    return BoundEntry(name, ok, value=fit.exponent, limit=target, asserted=law.is_pure, details=fit.to_dict())
