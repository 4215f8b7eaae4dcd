"""Collision detection, power-law extrapolation and the annihilation rule.

:func:`run_hybrid` alternates smooth integration with collision handling:
integrate until a gap enters the collision layer, group the particles that
are about to meet, extrapolate the collision time from the power law
``span**(1+a) ~ tau - t``, remove alternating pairs, and restart.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlternatingSignError, IllConditionedFit
from .integrator import GAP_BELOW_EPSILON, REACHED_T, integrate_segment

log = logging.getLogger(__name__)

__all__ = [
    "CollisionEvent",
    "HybridTrajectory",
    "detect_clusters",
    "estimate_collision_time",
    "annihilate",
    "run_hybrid",
]


@dataclass(frozen=True)
class CollisionEvent:
    """One collision: labels are original 0-based particle labels, in spatial order."""

    tau_hat: float
    location: float
    members: tuple
    member_signs: tuple
    survivor: int | None
    tau_error: float = 0.0
    detection_time: float = math.nan
    segment_index: int = -1

    def __post_init__(self):
        signs = self.member_signs
        if any(s == t for s, t in zip(signs, signs[1:])):
            raise AlternatingSignError("collision members must have alternating signs", signs, self.members)
        if (self.survivor is not None) != (len(self.members) % 2 == 1):
            raise ValueError("a survivor exists exactly when the member count is odd")
        if self.survivor is not None:
            majority = 1 if sum(signs) > 0 else -1
            if signs[self.members.index(self.survivor)] != majority:
                raise ValueError("the survivor must carry the majority sign")

    @property
    def removed(self):
        return tuple(k for k in self.members if k != self.survivor)

    def to_record(self):
        """JSON-ready record with 1-based labels, matching the CSV columns."""
        return {
            "tau": self.tau_hat,
            "location": self.location,
            "members": [k + 1 for k in self.members],
            "member_signs": list(self.member_signs),
            "survivor": None if self.survivor is None else self.survivor + 1,
            "tau_error": self.tau_error,
        }

    @classmethod
    def from_record(cls, record):
        survivor = record.get("survivor")
        return cls(
            tau_hat=float(record["tau"]),
            location=float(record["location"]),
            members=tuple(int(k) - 1 for k in record["members"]),
            member_signs=tuple(int(s) for s in record["member_signs"]),
            survivor=None if survivor is None else int(survivor) - 1,
            tau_error=float(record.get("tau_error", 0.0)),
        )


@dataclass
class HybridTrajectory:
    """Piecewise-smooth solution on ``[0, T]``."""

    segments: list
    events: list
    final_state: object
    T: float
    law: object = None

    @property
    def n_total(self):
        return self.final_state.n_total

    @property
    def removed_count(self):
        return sum(len(e.removed) for e in self.events)

    def event_segment(self, event):
        """Segment that ended in ``event``."""
        if event.segment_index >= 0:
            return self.segments[event.segment_index]
        for seg in self.segments:
            if seg.stop_reason == GAP_BELOW_EPSILON and seg.t_stop <= event.tau_hat and set(event.members) <= set(seg.labels.tolist()):
                if seg.t_end == event.tau_hat or math.isclose(seg.t_end, event.tau_hat, rel_tol=1e-12):
                    return seg
        raise KeyError("no segment ends in this event")


def detect_clusters(positions, epsilon_cluster):
    """Maximal runs of consecutive particles whose neighbour gaps are all below ``epsilon_cluster``.

    Returns lists of 0-based indices into ``positions``; singletons are not reported.
    """
    x = np.asarray(getattr(positions, "positions", positions), dtype=float)
    close = np.diff(x) < epsilon_cluster
    groups = []
    current = None
    for k, flag in enumerate(close):
        if flag:
            if current is None:
                current = [k]
            current.append(k + 1)
        elif current is not None:
            groups.append(current)
            current = None
    if current is not None:
        groups.append(current)
    return groups


def _root(t, r, a):
    # Fit r**(1+a) = alpha + beta*(t - t_last); the root is t_last - alpha/beta.
    t0 = t[-1]
    s = t - t0
    y = r ** (1.0 + a)
    design = np.column_stack([np.ones_like(s), s])
    (alpha, beta), *_ = np.linalg.lstsq(design, y, rcond=None)
    if not beta < 0:
        raise IllConditionedFit(f"fitted slope of gap**(1+a) is {beta:g}; expected negative")
    return t0 - alpha / beta, alpha, beta, y - design @ np.array([alpha, beta])


def estimate_collision_time(gap_samples, a, return_error=False):
    """Extrapolate the collision time from samples ``(t, r)`` of a collapsing distance.

    Uses the collapse law ``r ~ c (tau - t)**(1/(1+a))``: ``r**(1+a)`` is
    fitted by a straight line in ``t`` and ``tau`` is its root.  With
    ``return_error`` the result is ``(tau, error)`` where ``error`` combines
    the change of the root when only the later half of the samples is used
    with the root's least-squares standard error.
    """
    samples = np.asarray(gap_samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2 or len(samples) < 3:
        raise IllConditionedFit("need at least 3 (t, r) samples")
    t, r = samples[:, 0], samples[:, 1]
    if np.any(np.diff(t) <= 0):
        raise IllConditionedFit("sample times must be strictly increasing")
    if np.any(np.diff(r) >= 0) or np.any(r <= 0):
        raise IllConditionedFit("distances must be positive and strictly decreasing")
    tau, alpha, beta, resid = _root(t, r, a)
    if not tau >= t[-1]:
        tau = t[-1]
    if not return_error:
        return float(tau)
    half = len(t) // 2
    parts = []
    if len(t) - half >= 3:
        tau_late, *_ = _root(t[half:], r[half:], a)
        parts.append(abs(tau_late - tau))
    if len(t) > 2:
        sigma = math.sqrt(float(resid @ resid) / (len(t) - 2))
        parts.append(sigma / abs(beta))
    floor = 8 * np.finfo(float).eps * max(abs(tau), 1.0)
    return float(tau), float(sum(parts) + floor)


def annihilate(group_signs, group_labels):
    """Apply the annihilation rule to one collision group.

    Even groups vanish.  An odd group leaves a single survivor carrying the
    majority sign; of the majority members the one nearest the middle of the
    group is kept (the left one on ties).  Returns ``(removed, survivor)``.
    """
    signs = [int(s) for s in group_signs]
    labels = list(group_labels)
    if len(signs) != len(labels):
        raise ValueError("signs and labels must have equal length")
    if len(signs) < 2:
        raise ValueError("a collision group has at least two members")
    for k in range(len(signs) - 1):
        if signs[k] == signs[k + 1]:
            raise AlternatingSignError(
                f"collision group has equal neighbouring signs {signs} (labels {labels})",
                signs, labels,
            )
    if len(signs) % 2 == 0:
        return labels, None
    mid = (len(signs) - 1) / 2
    majority = signs[0]
    candidates = [k for k in range(len(signs)) if signs[k] == majority]
    keep = min(candidates, key=lambda k: (abs(k - mid), k))
    return [lab for k, lab in enumerate(labels) if k != keep], labels[keep]


def _fit_window(times, span, a, decades=2.0):
    # Keep the tail where span**(1+a) is within ``decades`` of its final value,
    # trimmed to the strictly decreasing part.
    y = span ** (1.0 + a)
    lo = y[-1]
    start = len(y) - 1
    while start > 0 and y[start - 1] <= lo * 10**decades and span[start - 1] > span[start]:
        start -= 1
    if len(y) - start < 6:
        start = len(y) - 1
        while start > 0 and len(y) - start < 6 and span[start - 1] > span[start]:
            start -= 1
    return np.column_stack([times[start:], span[start:]])


def _handle_clusters(seg, groups, a):
    acc = seg.accepted()
    events = []
    for group in groups:
        first, last = group[0], group[-1]
        span = acc.positions[:, last] - acc.positions[:, first]
        x_end = seg.positions[-1]
        samples = _fit_window(acc.times, span, a)
        if len(samples) >= 3:
            try:
                tau, err = estimate_collision_time(samples, a, return_error=True)
            except IllConditionedFit:
                tau, err = seg.t_stop, 0.0
        else:
            tau, err = seg.t_stop, 0.0
        labels = [int(seg.labels[k]) for k in group]
        signs = [int(seg.signs[k]) for k in group]
        removed, survivor = annihilate(signs, labels)
        location = 0.5 * (x_end[first] + x_end[last])
        events.append((tau, err, location, labels, signs, removed, survivor))
    return events


def run_hybrid(law, initial, T, controller, grid=None, max_refinements=4, kernels=None):
    """Solve the hybrid system on ``[0, T]``: ODE segments separated by annihilations.

    The particles outside a collision group are held still between its
    detection and the restart at ``tau_hat``, which delays later collisions
    by at most that interval; ``tau_error`` of each event therefore includes
    the total time skipped so far.

    A cluster with non-alternating signs is never accepted: integration is
    resumed with a ten times thinner collision layer, up to
    ``max_refinements`` times, after which :class:`AlternatingSignError` is raised.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    system = initial
    t = 0.0
    segments = []
    events = []
    ctrl = controller
    refinements = 0
    skipped = 0.0  # total unsimulated time between detections and restarts
    while True:
        seg = integrate_segment(law, system, t, T, ctrl, grid=grid, kernels=kernels)
        if seg.stop_reason == REACHED_T:
            seg.t_end = T
            segments.append(seg)
            system = seg.system_at(-1)
            break
        groups = detect_clusters(seg.positions[-1], ctrl.cluster_epsilon(law.a))
        try:
            found = _handle_clusters(seg, groups, law.a)
        except AlternatingSignError as exc:
            if refinements >= max_refinements:
                log.error("alternating-sign violation persists: %s; state %r at t=%r",
                          exc, seg.positions[-1].tolist(), seg.t_stop)
                raise AlternatingSignError(
                    f"{exc} at t={seg.t_stop!r} after {refinements} refinements; "
                    f"positions={seg.positions[-1].tolist()}",
                    exc.signs, exc.labels,
                ) from exc
            refinements += 1
            ctrl = ctrl.with_epsilon(ctrl.epsilon(law.a) / 10.0)
            log.info("same-sign cluster at t=%r; refining collision layer to %g", seg.t_stop, ctrl.epsilon(law.a))
            # Keep the partial segment and resume from its last state.
            seg.t_end = seg.t_stop
            segments.append(seg)
            system = seg.system_at(-1)
            t = seg.t_stop
            if not t < T:
                break
            continue
        refinements = 0
        ctrl = controller
        restart = max(tau for tau, *_ in found)
        if restart > T:
            seg.t_end = T
            segments.append(seg)
            system = seg.system_at(-1)
            break
        seg.t_end = restart
        index = len(segments)
        segments.append(seg)
        removed_all = []
        for tau, err, location, labels, signs, removed, survivor in sorted(found, key=lambda e: e[0]):
            events.append(
                CollisionEvent(
                    tau_hat=tau, location=location, members=tuple(labels), member_signs=tuple(signs),
                    survivor=survivor, tau_error=err + skipped, detection_time=seg.t_stop, segment_index=index,
                )
            )
            removed_all.extend(removed)
        state = seg.system_at(-1)
        survivors = {ev.survivor: ev.location for ev in events[-len(found):] if ev.survivor is not None}
        system = state.without(removed_all)
        if survivors:
            x = system.positions.copy()
            for label, location in survivors.items():
                x[system.labels.tolist().index(label)] = location
            system = system.with_positions(x)
        skipped += restart - seg.t_stop
        t = restart
        if not t < T:
            segments.append(_empty_tail(system, T))
            break
    return HybridTrajectory(segments=segments, events=events, final_state=system, T=T, law=law)


def _empty_tail(system, T):
    from .integrator import TrajectorySegment

    return TrajectorySegment(
        times=np.array([T]),
        positions=np.array([system.positions]),
        labels=system.labels.copy(),
        signs=system.signs.copy(),
        step=np.array([True]),
        step_sizes=np.zeros(1),
        error_estimates=np.zeros(1),
        stop_reason=REACHED_T,
        n_total=system.n_total,
        forcing=system.forcing,
        t_end=T,
    )
