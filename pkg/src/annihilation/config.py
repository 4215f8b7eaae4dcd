"""Run configuration: YAML schema, validation and random scenarios.

Example document::

    law:
      a: 1.0
      f_reg: {kind: zero}
      g_ext: {kind: constant, value: 0.5}
    mode: full                # or "reduced" (needs a forcing entry per particle)
    initial:
      positions: [0.0, 1.0]
      signs: [-1, 1]
    T: 1.0
    controller: {rel_tol: 1.0e-10}
    samples: {dt: 0.01}       # optional dense-output grid
    output: {dir: out}

``initial`` may be replaced by ``random: {n: 4, seed: 0}``, which draws
ordered positions with gaps uniform in ``[gap_low, gap_high]`` and
alternating signs starting with ``-1``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError
from .integrator import StepController
from .model import ExternalForce, Forcing, ForcingTerm, InteractionLaw, ParticleSystem, RegularPart

__all__ = ["RandomScenario", "RunConfig", "load_config", "parse_config", "dump_config", "random_positions"]

MODES = ("full", "reduced")
_TOP_KEYS = {"law", "mode", "initial", "random", "forcing", "T", "controller", "samples", "output"}
_CONTROLLER_FIELDS = {f.name: f for f in dataclasses.fields(StepController)}


@dataclass(frozen=True)
class RandomScenario:
    n: int
    seed: int = 0
    gap_low: float = 0.2
    gap_high: float = 1.0
    start: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("random.n", "must be at least 1")
        if not 0 < self.gap_low <= self.gap_high:
            raise ConfigError("random.gap_low", "need 0 < gap_low <= gap_high")

    def to_dict(self):
        return dataclasses.asdict(self)


def random_positions(n, seed, gap_low=0.2, gap_high=1.0, start=0.0):
    """Ordered positions with uniform gaps, and alternating signs ``-1, +1, ...``."""
    rng = np.random.default_rng(seed)
    gaps = rng.uniform(gap_low, gap_high, n - 1)
    x = start + np.concatenate([[0.0], np.cumsum(gaps)])
    signs = -((-1.0) ** np.arange(n))
    return x, signs


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one simulation."""

    law: InteractionLaw
    T: float
    positions: tuple = ()
    signs: tuple = ()
    mode: str = "full"
    forcing: tuple = ()
    controller: StepController = field(default_factory=StepController)
    random: RandomScenario | None = None
    sample_dt: float | None = None
    out_dir: str | None = None

    @property
    def n(self):
        return self.random.n if self.random is not None else len(self.positions)

    def initial_arrays(self):
        if self.random is not None:
            r = self.random
            return random_positions(r.n, r.seed, r.gap_low, r.gap_high, r.start)
        return np.array(self.positions, dtype=float), np.array(self.signs, dtype=float)

    def system(self):
        x, b = self.initial_arrays()
        forcing = Forcing(self.forcing) if self.mode == "reduced" else None
        try:
            return ParticleSystem(x, b, forcing=forcing)
        except ValueError as exc:
            raise ConfigError("initial", str(exc)) from exc

    def grid(self):
        if self.sample_dt is None:
            return None
        count = int(math.floor(self.T / self.sample_dt + 1e-9))
        return self.sample_dt * np.arange(1, count + 1)

    def with_overrides(self, a=None, seed=None):
        cfg = self
        if a is not None:
            cfg = dataclasses.replace(cfg, law=dataclasses.replace(cfg.law, a=float(a)))
        if seed is not None:
            if cfg.random is None:
                raise ConfigError("random", "--seed needs a random scenario in the config")
            cfg = dataclasses.replace(cfg, random=dataclasses.replace(cfg.random, seed=int(seed)))
        return cfg

    def to_dict(self):
        data = {"law": self.law.to_dict(), "mode": self.mode}
        if self.random is not None:
            data["random"] = self.random.to_dict()
        else:
            data["initial"] = {"positions": list(self.positions), "signs": list(self.signs)}
        if self.mode == "reduced":
            data["forcing"] = [term.to_dict() for term in self.forcing]
        data["T"] = self.T
        data["controller"] = dataclasses.asdict(self.controller)
        if self.sample_dt is not None:
            data["samples"] = {"dt": self.sample_dt}
        if self.out_dir is not None:
            data["output"] = {"dir": self.out_dir}
        return data


def _require(data, key, where):
    if key not in data:
        raise ConfigError(f"{where}{key}", "missing required field")
    return data[key]


def _number(value, name, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value) or (positive and value <= 0):
        raise ConfigError(name, f"must be {'positive and ' if positive else ''}finite, got {value!r}")
    return value


def _descriptor(cls, value, name):
    if value is None:
        return cls()
    if isinstance(value, str):
        value = {"kind": value}
    if not isinstance(value, dict):
        raise ConfigError(name, f"expected a mapping with a 'kind' key, got {value!r}")
    try:
        return cls.from_dict(value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(name, str(exc)) from exc


def parse_config(data):
    """Validate a decoded YAML mapping and build a :class:`RunConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")

    law_data = _require(data, "law", "")
    if not isinstance(law_data, dict):
        raise ConfigError("law", "expected a mapping")
    a = _number(_require(law_data, "a", "law."), "law.a", positive=True)
    law = InteractionLaw(
        a,
        _descriptor(RegularPart, law_data.get("f_reg"), "law.f_reg"),
        _descriptor(ExternalForce, law_data.get("g_ext"), "law.g_ext"),
    )

    mode = data.get("mode", "full")
    if mode not in MODES:
        raise ConfigError("mode", f"expected one of {MODES}, got {mode!r}")

    T = _number(_require(data, "T", ""), "T", positive=True)

    random = None
    positions = signs = ()
    if "random" in data:
        if "initial" in data:
            raise ConfigError("random", "give either 'initial' or 'random', not both")
        r = data["random"]
        if not isinstance(r, dict):
            raise ConfigError("random", "expected a mapping")
        extra = sorted(set(r) - {"n", "seed", "gap_low", "gap_high", "start"})
        if extra:
            raise ConfigError(f"random.{extra[0]}", "unknown field")
        n = _require(r, "n", "random.")
        seed = r.get("seed", 0)
        for key, val in (("n", n), ("seed", seed)):
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"random.{key}", f"expected an integer, got {val!r}")
        random = RandomScenario(
            n, seed,
            _number(r.get("gap_low", 0.2), "random.gap_low", positive=True),
            _number(r.get("gap_high", 1.0), "random.gap_high", positive=True),
            _number(r.get("start", 0.0), "random.start"),
        )
        count = n
    else:
        init = _require(data, "initial", "")
        if not isinstance(init, dict):
            raise ConfigError("initial", "expected a mapping")
        pos = _require(init, "positions", "initial.")
        sg = _require(init, "signs", "initial.")
        if not isinstance(pos, list) or not pos:
            raise ConfigError("initial.positions", "expected a non-empty list")
        if not isinstance(sg, list):
            raise ConfigError("initial.signs", "expected a list")
        positions = tuple(_number(v, f"initial.positions[{k}]") for k, v in enumerate(pos))
        if len(sg) != len(positions):
            raise ConfigError("initial.signs", f"has {len(sg)} entries but initial.positions has {len(positions)}")
        for k, s in enumerate(sg):
            if s not in (-1, 1) or isinstance(s, bool):
                raise ConfigError(f"initial.signs[{k}]", f"must be -1 or +1, got {s!r}")
        signs = tuple(int(s) for s in sg)
        if any(b <= a_ for a_, b in zip(positions, positions[1:])):
            raise ConfigError("initial.positions", "must be strictly increasing")
        count = len(positions)

    forcing = ()
    if mode == "reduced":
        terms = _require(data, "forcing", "")
        if not isinstance(terms, list) or len(terms) != count:
            raise ConfigError("forcing", f"expected a list with one entry per particle ({count})")
        forcing = tuple(_descriptor(ForcingTerm, t, f"forcing[{k}]") for k, t in enumerate(terms))
        if not law.g_ext.is_zero:
            raise ConfigError("law.g_ext", "reduced mode replaces g by the forcing; set g_ext to zero")
    elif "forcing" in data:
        raise ConfigError("forcing", "only allowed with mode: reduced")

    ctrl_data = data.get("controller") or {}
    if not isinstance(ctrl_data, dict):
        raise ConfigError("controller", "expected a mapping")
    kwargs = {}
    for key, value in ctrl_data.items():
        if key not in _CONTROLLER_FIELDS:
            raise ConfigError(f"controller.{key}", "unknown field")
        if value is None and key == "collision_gap_epsilon":
            kwargs[key] = None
        elif key == "max_steps":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError("controller.max_steps", f"expected an integer, got {value!r}")
            kwargs[key] = value
        else:
            kwargs[key] = _number(value, f"controller.{key}", positive=True)
    try:
        controller = StepController(**kwargs)
    except ValueError as exc:
        raise ConfigError("controller", str(exc)) from exc

    sample_dt = None
    if data.get("samples") is not None:
        s = data["samples"]
        if not isinstance(s, dict) or set(s) != {"dt"}:
            raise ConfigError("samples", "expected {dt: <positive number>}")
        sample_dt = _number(s["dt"], "samples.dt", positive=True)

    out_dir = None
    if data.get("output") is not None:
        o = data["output"]
        if not isinstance(o, dict) or not isinstance(o.get("dir"), str):
            raise ConfigError("output.dir", "expected a string")
        out_dir = o["dir"]

    cfg = RunConfig(law, T, positions, signs, mode, forcing, controller, random, sample_dt, out_dir)
    cfg.system()  # surfaces model-level validation (e.g. reduced-mode sign pattern)
    return cfg


def load_config(path):
    """Read and validate a YAML config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML in {path}: {exc}") from exc
    return parse_config(data)


def dump_config(cfg):
    """YAML text that :func:`parse_config` maps back to ``cfg``."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
