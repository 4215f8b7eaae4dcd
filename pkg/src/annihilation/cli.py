"""Command-line entry points: simulate, oracle, verify, sweep.

Exit codes: 0 success, 1 configuration error, 2 simulation failure,
3 verification ran but an asserted check failed.
"""
from __future__ import annotations

import argparse
import concurrent.futures as cf
import csv
import dataclasses
import itertools
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis
from ._backend import BACKEND
from .collisions import run_hybrid
from .config import RandomScenario, dump_config, load_config, parse_config
from .errors import AnnihilationError, ConfigError, StepFailure
from .output import (
    fmt,
    read_events_json,
    read_trajectory_csv,
    trajectory_from_files,
    write_events_json,
    write_json,
    write_trajectory_csv,
)

log = logging.getLogger("annihilation")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SIMULATION = 2
EXIT_CHECKS = 3

SWEEP_COLUMNS = ("a", "n", "seed", "gap_index", "exponent", "residual")


def _error(message):
    print(f"error: {message}", file=sys.stderr)


def _resolve_out(cfg, out_dir):
    out = out_dir or cfg.out_dir or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _simulate(cfg, out):
    """Run ``cfg`` and write trajectory.csv, events.json and summary.json into ``out``."""
    system = cfg.system()
    start = time.perf_counter()
    trajectory = run_hybrid(cfg.law, system, cfg.T, cfg.controller, grid=cfg.grid())
    wall = time.perf_counter() - start
    write_trajectory_csv(out / "trajectory.csv", trajectory, system.positions)
    write_events_json(out / "events.json", trajectory.events)
    final = trajectory.final_state
    write_json(out / "summary.json", {
        "n_initial": system.n,
        "final_state": {
            "t": cfg.T,
            "labels": [int(k) + 1 for k in final.labels],
            "positions": [float(v) for v in final.positions],
            "signs": [int(s) for s in final.signs],
        },
        "event_count": len(trajectory.events),
        "removed": trajectory.removed_count,
        "segments": len(trajectory.segments),
        "wall_time": wall,
        "backend": BACKEND,
        "config": cfg.to_dict(),
    })
    return trajectory


def _failure_dump(out, exc, cfg):
    _error(f"simulation failed: {type(exc).__name__}: {exc}")
    if out is not None:
        write_json(out / "failure.json", {"error": type(exc).__name__, "message": str(exc), "config": cfg.to_dict()})


def _load(config_path, a=None, seed=None):
    cfg = load_config(config_path)
    return cfg.with_overrides(a=a, seed=seed)


def cmd_simulate(config_path, out_dir=None, a=None, seed=None):
    try:
        cfg = _load(config_path, a, seed)
    except ConfigError as exc:
        _error(str(exc))
        return EXIT_CONFIG
    out = _resolve_out(cfg, out_dir)
    try:
        trajectory = _simulate(cfg, out)
    except (AnnihilationError, StepFailure, ArithmeticError) as exc:
        _failure_dump(out, exc, cfg)
        return EXIT_SIMULATION
    print(f"{len(trajectory.events)} collision events; output in {out}")
    return EXIT_OK


def cmd_oracle(a, r0, samples=11, stream=None):
    stream = stream or sys.stdout
    if not (a > 0 and r0 > 0):
        _error(f"need a > 0 and r0 > 0, got a={a} r0={r0}")
        return EXIT_CONFIG
    tau1 = r0 ** (1 + a) / (2 * (1 + a))
    t = np.linspace(0.0, tau1, samples)
    tau1, r, x = analysis.two_body_closed_form(a, r0, 0.0, t)
    print(f"# tau1={fmt(tau1)}", file=stream)
    print(f"# c_a={fmt(analysis.collapse_prefactor(a))}", file=stream)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["t", "x_1", "x_2", "r"])
    for k in range(len(t)):
        writer.writerow([fmt(t[k]), fmt(x[k, 0]), fmt(x[k, 1]), fmt(r[k])])
    return EXIT_OK


def _print_report(report):
    failures = report.failures()
    for entry in failures:
        print(f"FAIL {entry.name}: value={entry.value} limit={entry.limit} {entry.details.get('error', '')}".rstrip(),
              file=sys.stderr)
    asserted = [e for e in report.entries if e.asserted]
    print(f"{len(asserted) - len(failures)}/{len(asserted)} asserted checks passed")


def cmd_verify(config_path, out_dir=None, a=None, seed=None, tol=0.05):
    try:
        cfg = _load(config_path, a, seed)
    except ConfigError as exc:
        _error(str(exc))
        return EXIT_CONFIG
    out = _resolve_out(cfg, out_dir)
    try:
        trajectory = _simulate(cfg, out)
    except (AnnihilationError, StepFailure, ArithmeticError) as exc:
        _failure_dump(out, exc, cfg)
        return EXIT_SIMULATION
    forcing_bound = None
    report = analysis.verify_trajectory(trajectory, cfg.law, forcing_bound, seed=0, tol=tol)
    write_json(out / "report.json", report.to_dict())
    _print_report(report)
    return EXIT_OK if report.passed else EXIT_CHECKS


def verify_files(directory, a, tol=0.05):
    """Fit-only checks on stored trajectory.csv and events.json."""
    directory = Path(directory)
    report = analysis.BoundReport()
    try:
        times, positions, alive = read_trajectory_csv(directory / "trajectory.csv")
        events = read_events_json(directory / "events.json")
        trajectory = trajectory_from_files(times, positions, alive, events)
    except (OSError, ValueError) as exc:
        report.entries.append(analysis.BoundEntry("input_files", False, details={"error": str(exc)}))
        return report
    for event in trajectory.events:
        report.extend(analysis.check_holder_exponents(trajectory, event, a, tol=tol))
        report.extend(analysis.check_upper_bound(trajectory, event, a))
        report.extend(analysis.check_lower_bounds(trajectory, event, a))
        report.entries.append(analysis.check_gap_ratio_bound(trajectory, event, a))
    return report


def cmd_verify_files(directory, a, out_dir=None, tol=0.05):
    if not a > 0:
        _error("fit-only mode needs --a > 0")
        return EXIT_CONFIG
    report = verify_files(directory, a, tol)
    out = Path(out_dir or directory)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", report.to_dict())
    _print_report(report)
    return EXIT_OK if report.passed else EXIT_CHECKS


# -- sweep ------------------------------------------------------------------------


def parse_grid(spec):
    """Parse ``"a=0.5,1,2;n=2,4;seeds=5"`` into ``{'a': [...], 'n': [...], 'seed': [...]}``.

    ``seeds=K`` means seeds ``0..K-1``; ``seed=1,5`` lists them explicitly.
    An empty spec is the empty grid.
    """
    grid = {}
    spec = (spec or "").strip()
    if not spec:
        return {"a": [], "n": [], "seed": []}
    for part in spec.split(";"):
        if not part.strip():
            continue
        if "=" not in part:
            raise ConfigError("--grid", f"expected key=values, got {part!r}")
        key, values = (s.strip() for s in part.split("=", 1))
        items = [v.strip() for v in values.split(",") if v.strip()]
        try:
            if key == "a":
                grid["a"] = [float(v) for v in items]
            elif key == "n":
                grid["n"] = [int(v) for v in items]
            elif key == "seeds":
                if len(items) != 1:
                    raise ValueError("seeds takes a single count")
                grid["seed"] = list(range(int(items[0])))
            elif key == "seed":
                grid["seed"] = [int(v) for v in items]
            else:
                raise ConfigError("--grid", f"unknown key {key!r}; use a, n, seeds or seed")
        except ValueError as exc:
            raise ConfigError("--grid", f"bad values for {key!r}: {exc}") from exc
    if any(a <= 0 for a in grid.get("a", [])):
        raise ConfigError("--grid", "a values must be positive")
    if any(n < 1 for n in grid.get("n", [])):
        raise ConfigError("--grid", "n values must be at least 1")
    return grid


DEFAULT_TEMPLATE = {"law": {"a": 1.0}, "random": {"n": 2, "seed": 0}, "T": 100.0}


def _cell_config(template, a, n, seed):
    base_random = template.random or RandomScenario(n)
    return dataclasses.replace(
        template,
        law=dataclasses.replace(template.law, a=float(a)),
        random=dataclasses.replace(base_random, n=int(n), seed=int(seed)),
        positions=(),
        signs=(),
    )


def _run_cell(cfg, cell_dir):
    # Runs in a worker process; returns plain rows for the parent to aggregate.
    cell_dir.mkdir(parents=True, exist_ok=True)
    (cell_dir / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
    trajectory = _simulate(cfg, cell_dir)
    rows = []
    gap_index = 0
    for event in trajectory.events:
        for entry in analysis.check_holder_exponents(trajectory, event, cfg.law.a):
            gap_index += 1
            rows.append((gap_index, entry.value, entry.details.get("residual", float("nan"))))
    return rows


def _cell_name(a, n, seed):
    return f"a={a:g}_n={n}_seed={seed}"


def cmd_sweep(config_template, param_grid, out_dir, jobs=None):
    try:
        template = load_config(config_template) if config_template else parse_config(DEFAULT_TEMPLATE)
        grid = parse_grid(param_grid)
    except ConfigError as exc:
        _error(str(exc))
        return EXIT_CONFIG
    if template.mode == "reduced":
        _error("sweep templates must use mode: full (random scenarios have no forcing)")
        return EXIT_CONFIG
    out = Path(out_dir or "sweep")
    out.mkdir(parents=True, exist_ok=True)
    a_values = grid.get("a") or ([] if not param_grid else [template.law.a])
    n_values = grid.get("n") or ([] if not param_grid else [template.n])
    seeds = grid.get("seed") or ([] if not param_grid else [template.random.seed if template.random else 0])
    cells = list(itertools.product(a_values, n_values, seeds))
    results = {}
    failures = {}
    workers = max(1, min(jobs or os.cpu_count() or 1, len(cells) or 1))
    if workers == 1:
        for cell in cells:
            try:
                results[cell] = _run_cell(_cell_config(template, *cell), out / _cell_name(*cell))
            except Exception as exc:  # a failing cell must not stop the sweep
                failures[cell] = f"{type(exc).__name__}: {exc}"
    else:
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_run_cell, _cell_config(template, *cell), out / _cell_name(*cell)): cell
                for cell in cells
            }
            for fut in cf.as_completed(futures):
                cell = futures[fut]
                try:
                    results[cell] = fut.result()
                except Exception as exc:
                    failures[cell] = f"{type(exc).__name__}: {exc}"
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for cell in cells:
            a, n, seed = cell
            for gap_index, exponent, residual in results.get(cell, []):
                writer.writerow([f"{a:g}", n, seed, gap_index, fmt(exponent), fmt(residual)])
    write_json(out / "cells.json", [
        {"a": a, "n": n, "seed": seed, "status": "failed" if (a, n, seed) in failures else "ok",
         "error": failures.get((a, n, seed))}
        for a, n, seed in cells
    ])
    for cell, message in failures.items():
        _error(f"cell {_cell_name(*cell)}: {message}")
    print(f"{len(cells) - len(failures)}/{len(cells)} cells completed; results in {out / 'sweep.csv'}")
    return EXIT_OK if not failures else EXIT_SIMULATION


# -- argument parsing ----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="annihilation", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a configuration and write trajectory files")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--a", type=float, help="override law.a")
    p.add_argument("--seed", type=int, help="override random.seed")

    p = sub.add_parser("oracle", help="print the closed-form two-body solution")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=11)

    p = sub.add_parser("verify", help="simulate and run all checks, or check stored files")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config")
    src.add_argument("--fit-only", metavar="DIR", help="check trajectory.csv and events.json in DIR")
    p.add_argument("--out")
    p.add_argument("--a", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, default=0.05, help="allowed exponent deviation")

    p = sub.add_parser("sweep", help="run a parameter grid of random scenarios")
    p.add_argument("--config", help="template config (default: pure law, T=100)")
    p.add_argument("--grid", default="", help='e.g. "a=0.5,1,2;n=2,4;seeds=5"')
    p.add_argument("--out", default="sweep")
    p.add_argument("--jobs", type=int)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out, args.a, args.seed)
    if args.command == "oracle":
        return cmd_oracle(args.a, args.r0, args.samples)
    if args.command == "verify":
        if args.fit_only:
            if args.a is None:
                _error("--fit-only needs --a")
                return EXIT_CONFIG
            return cmd_verify_files(args.fit_only, args.a, args.out, args.tol)
        return cmd_verify(args.config, args.out, args.a, args.seed, args.tol)
    return cmd_sweep(args.config, args.grid, args.out, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
