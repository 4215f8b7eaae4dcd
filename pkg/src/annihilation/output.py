"""Reading and writing run artefacts: trajectory.csv, events.json, JSON reports."""
from __future__ import annotations

import csv
import json
import math

import numpy as np

from .collisions import CollisionEvent, HybridTrajectory
from .integrator import REACHED_T, TrajectorySegment

__all__ = [
    "fmt",
    "trajectory_rows",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_events_json",
    "read_events_json",
    "write_json",
    "trajectory_from_files",
]


def fmt(value):
    """17 significant digits, enough to round-trip a double."""
    return f"{float(value):.17g}"


def trajectory_rows(trajectory, initial_positions):
    """Yield ``(t, x, alive)`` over all samples, one column per original particle.

    Annihilated particles keep their last position with ``alive = 0``.
    """
    n = trajectory.n_total
    last = np.array(initial_positions, dtype=float).copy()
    for seg in trajectory.segments:
        alive = np.zeros(n, dtype=int)
        alive[seg.labels] = 1
        for k in range(len(seg.times)):
            last[seg.labels] = seg.positions[k]
            yield float(seg.times[k]), last.copy(), alive


def write_trajectory_csv(path, trajectory, initial_positions):
    n = trajectory.n_total
    header = ["t"] + [f"x_{k + 1}" for k in range(n)] + [f"alive_{k + 1}" for k in range(n)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t, x, alive in trajectory_rows(trajectory, initial_positions):
            writer.writerow([fmt(t)] + [fmt(v) for v in x] + [str(int(v)) for v in alive])


def read_trajectory_csv(path):
    """Return ``(times, positions, alive)`` arrays; raises ``ValueError`` on malformed files."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "t" or len(header) % 2 != 1:
            raise ValueError(f"{path}: header must be t,x_1..x_n,alive_1..alive_n")
        n = (len(header) - 1) // 2
        expected = ["t"] + [f"x_{k + 1}" for k in range(n)] + [f"alive_{k + 1}" for k in range(n)]
        if header != expected:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 1 + 2 * n:
                raise ValueError(f"{path}:{lineno}: expected {1 + 2 * n} columns, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    data = np.array(rows, dtype=float).reshape(-1, 1 + 2 * n)
    return data[:, 0], data[:, 1 : 1 + n], data[:, 1 + n :].astype(int)


def _event_json(event):
    record = event.to_record()
    record["location"] = float(record["location"])
    return record


def write_events_json(path, events):
    write_json(path, [_event_json(e) for e in events])


def read_events_json(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a list of events")
    return [CollisionEvent.from_record(r) for r in data]


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=False)
        fh.write("\n")


def trajectory_from_files(times, positions, alive, events):
    """Rebuild a :class:`HybridTrajectory` from stored samples, for fit-only checks.

    Rows are grouped into segments by their alive pattern; every row is
    treated as an accepted state.  Signs outside the event groups are not
    stored and are set to zero.
    """
    if len(times) == 0:
        raise ValueError("trajectory has no samples")
    if np.any(np.diff(times) < 0):
        raise ValueError("sample times must be nondecreasing")
    n = positions.shape[1]
    signs = np.zeros(n)
    for ev in events:
        for label, s in zip(ev.members, ev.member_signs):
            signs[label] = s
    segments = []
    start = 0
    for k in range(1, len(times) + 1):
        if k == len(times) or np.any(alive[k] != alive[start]):
            labels = np.flatnonzero(alive[start])
            m = k - start
            segments.append(
                TrajectorySegment(
                    times=times[start:k].copy(),
                    positions=positions[start:k][:, labels].copy(),
                    labels=labels,
                    signs=signs[labels].copy(),
                    step=np.ones(m, dtype=bool),
                    step_sizes=np.zeros(m),
                    error_estimates=np.zeros(m),
                    stop_reason=REACHED_T,
                    n_total=n,
                )
            )
            start = k
    placed = []
    for ev in events:
        best = -1
        for idx, seg in enumerate(segments):
            if set(ev.members) <= set(seg.labels.tolist()) and seg.t_start < ev.tau_hat:
                best = idx
        if best < 0:
            raise ValueError(f"no stored samples precede the event at tau={ev.tau_hat!r}")
        placed.append(
            CollisionEvent(ev.tau_hat, ev.location, ev.members, ev.member_signs, ev.survivor,
                           ev.tau_error, segment_index=best)
        )
    return HybridTrajectory(segments=segments, events=placed, final_state=_FinalState(n), T=float(times[-1]))


class _FinalState:
    # Minimal stand-in: HybridTrajectory only needs ``n_total`` from it here.
    def __init__(self, n_total):
        self.n_total = n_total
