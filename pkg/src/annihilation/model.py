"""Interaction law, particle state and right-hand sides of the particle ODE.

The interaction force is ``f(x) = sgn(x)/|x|**a + f_reg(x)`` with ``f_reg``
drawn from a small family of odd smooth functions.  Particles move by

    dx_i/dt = sum_{j != i} b_i b_j f(x_i - x_j) + b_i g(x_i)

or, in reduced mode, with ``b_i g(x_i)`` replaced by a per-particle forcing
``F_i(t)`` and signs fixed to ``b_i = (-1)**i`` (1-based ``i``).

Indices are 0-based throughout the Python API.  The gap ``r[k]`` is
``x[k+1] - x[k]``; gaps outside ``0..n-2`` are treated as infinite, with
``f(inf) = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "RegularPart",
    "ExternalForce",
    "ForcingTerm",
    "Forcing",
    "InteractionLaw",
    "ParticleSystem",
    "GapView",
    "f_eval",
    "f_derivative",
    "kernel_g",
    "kernel_h",
    "velocity_field",
    "pairwise_velocity",
    "external_velocity",
    "gap_velocity",
    "pair_velocity",
    "table1_contribution_sign",
    "PLACEMENTS",
]


# Kernel codes shared with the compiled core; keep in sync with _kernels.pyx.
FREG_CODES = {"zero": 0, "linear": 1, "cubic": 2, "sine": 3}
GEXT_CODES = {"zero": 0, "constant": 1, "affine": 2, "sine": 3}
FORCING_CODES = {"zero": 0, "constant": 1, "sine": 2}

_FREG_PARAMS = {
    "zero": (),
    "linear": ("slope",),
    "cubic": ("coeff",),
    "sine": ("amplitude", "frequency"),
}
_GEXT_PARAMS = {
    "zero": (),
    "constant": ("value",),
    "affine": ("slope", "intercept"),
    "sine": ("amplitude", "frequency", "phase"),
}
_FORCING_PARAMS = {
    "zero": (),
    "constant": ("value",),
    "sine": ("amplitude", "frequency", "phase"),
}


# parameters that may be omitted in config files
_OPTIONAL_PARAMS = {"phase": 0.0, "intercept": 0.0}


def _check_descriptor(kind, params, table, what):
    if kind not in table:
        raise ValueError(f"unknown {what} kind {kind!r}; expected one of {sorted(table)}")
    if len(params) != len(table[kind]):
        raise ValueError(
            f"{what} kind {kind!r} takes parameters {table[kind]}, got {len(params)} values"
        )
    for p in params:
        if not math.isfinite(p):
            raise ValueError(f"{what} parameters must be finite, got {params}")


def _descriptor_from_dict(cls, data, table, what):
    data = dict(data)
    kind = data.pop("kind", "zero")
    if kind not in table:
        raise ValueError(f"unknown {what} kind {kind!r}; expected one of {sorted(table)}")
    names = table[kind]
    for key, value in _OPTIONAL_PARAMS.items():
        if key in names:
            data.setdefault(key, value)
    missing = [n for n in names if n not in data]
    extra = [k for k in data if k not in names]
    if missing or extra:
        raise ValueError(
            f"{what} kind {kind!r} expects keys {list(names)} (missing {missing}, unexpected {extra})"
        )
    return cls(kind, tuple(float(data[n]) for n in names))


@dataclass(frozen=True)
class RegularPart:
    """Odd smooth regular part of the interaction force.

    ``zero``: 0; ``linear``: ``slope*x``; ``cubic``: ``coeff*x**3``;
    ``sine``: ``amplitude*sin(frequency*x)``.
    """

    kind: str = "zero"
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        _check_descriptor(self.kind, self.params, _FREG_PARAMS, "f_reg")

    @classmethod
    def linear(cls, slope):
        return cls("linear", (slope,))

    @classmethod
    def cubic(cls, coeff):
        return cls("cubic", (coeff,))

    @classmethod
    def sine(cls, amplitude, frequency):
        return cls("sine", (amplitude, frequency))

    @classmethod
    def from_dict(cls, data):
        return _descriptor_from_dict(cls, data, _FREG_PARAMS, "f_reg")

    def to_dict(self):
        return {"kind": self.kind, **dict(zip(_FREG_PARAMS[self.kind], self.params))}

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return self.params[0] * x
        if self.kind == "cubic":
            return self.params[0] * x**3
        if self.kind == "sine":
            amp, freq = self.params
            return amp * np.sin(freq * x)
        return np.zeros_like(x)

    def derivative(self, x, order=1):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return np.full_like(x, self.params[0]) if order == 1 else np.zeros_like(x)
        if self.kind == "cubic":
            c = self.params[0]
            return 3 * c * x**2 if order == 1 else 6 * c * x
        if self.kind == "sine":
            amp, freq = self.params
            if order == 1:
                return amp * freq * np.cos(freq * x)
            return -amp * freq**2 * np.sin(freq * x)
        return np.zeros_like(x)

    def sup_abs(self, distance):
        """Upper bound of ``|f_reg(d)|`` over ``|d| <= distance``."""
        if self.kind == "linear":
            return abs(self.params[0]) * distance
        if self.kind == "cubic":
            return abs(self.params[0]) * distance**3
        if self.kind == "sine":
            amp, freq = self.params
            return abs(amp) * min(1.0, abs(freq) * distance)
        return 0.0

    def code(self):
        p = np.zeros(2)
        p[: len(self.params)] = self.params
        return FREG_CODES[self.kind], p


@dataclass(frozen=True)
class ExternalForce:
    """Lipschitz external force ``g``.

    ``zero``; ``constant``: ``value``; ``affine``: ``slope*x + intercept``;
    ``sine``: ``amplitude*sin(frequency*x + phase)``.
    """

    kind: str = "zero"
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        _check_descriptor(self.kind, self.params, _GEXT_PARAMS, "g_ext")

    @classmethod
    def constant(cls, value):
        return cls("constant", (value,))

    @classmethod
    def affine(cls, slope, intercept=0.0):
        return cls("affine", (slope, intercept))

    @classmethod
    def sine(cls, amplitude, frequency, phase=0.0):
        return cls("sine", (amplitude, frequency, phase))

    @classmethod
    def from_dict(cls, data):
        return _descriptor_from_dict(cls, data, _GEXT_PARAMS, "g_ext")

    def to_dict(self):
        return {"kind": self.kind, **dict(zip(_GEXT_PARAMS[self.kind], self.params))}

    @property
    def is_zero(self):
        return self.kind == "zero"

    @property
    def lipschitz(self):
        if self.kind == "affine":
            return abs(self.params[0])
        if self.kind == "sine":
            return abs(self.params[0] * self.params[1])
        return 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.params[0])
        if self.kind == "affine":
            return self.params[0] * x + self.params[1]
        if self.kind == "sine":
            amp, freq, phase = self.params
            return amp * np.sin(freq * x + phase)
        return np.zeros_like(x)

    def sup_abs(self, lo, hi):
        """Exact ``sup |g|`` over ``[lo, hi]`` for constant/affine, a bound for sine."""
        if self.kind == "constant":
            return abs(self.params[0])
        if self.kind == "affine":
            return float(max(abs(self(lo)), abs(self(hi))))
        if self.kind == "sine":
            return abs(self.params[0])
        return 0.0

    def code(self):
        p = np.zeros(3)
        p[: len(self.params)] = self.params
        return GEXT_CODES[self.kind], p


@dataclass(frozen=True)
class ForcingTerm:
    """Time-dependent forcing of one particle: zero, constant or sine in ``t``."""

    kind: str = "zero"
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        _check_descriptor(self.kind, self.params, _FORCING_PARAMS, "forcing")

    @classmethod
    def constant(cls, value):
        return cls("constant", (value,))

    @classmethod
    def sine(cls, amplitude, frequency, phase=0.0):
        return cls("sine", (amplitude, frequency, phase))

    @classmethod
    def from_dict(cls, data):
        return _descriptor_from_dict(cls, data, _FORCING_PARAMS, "forcing")

    def to_dict(self):
        return {"kind": self.kind, **dict(zip(_FORCING_PARAMS[self.kind], self.params))}

    def __call__(self, t):
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "sine":
            amp, freq, phase = self.params
            return amp * math.sin(freq * t + phase)
        return 0.0

    @property
    def bound(self):
        return abs(self.params[0]) if self.params else 0.0


@dataclass(frozen=True)
class Forcing:
    """Per-particle forcing ``F_i(t)``, indexed by original particle label."""

    terms: tuple = ()

    def __post_init__(self):
        terms = tuple(t if isinstance(t, ForcingTerm) else ForcingTerm.from_dict(t) for t in self.terms)
        object.__setattr__(self, "terms", terms)

    def __len__(self):
        return len(self.terms)

    def __call__(self, t, labels=None):
        labels = range(len(self.terms)) if labels is None else labels
        return np.array([self.terms[k](t) for k in labels])

    @property
    def bound(self):
        """Uniform bound ``max_i sup_t |F_i(t)|``."""
        return max((term.bound for term in self.terms), default=0.0)

    def bounds(self, labels=None):
        labels = range(len(self.terms)) if labels is None else labels
        return np.array([self.terms[k].bound for k in labels])

    def code(self, labels):
        kinds = np.zeros(len(labels), dtype=np.int64)
        params = np.zeros((len(labels), 3))
        for row, k in enumerate(labels):
            term = self.terms[k]
            kinds[row] = FORCING_CODES[term.kind]
            params[row, : len(term.params)] = term.params
        return kinds, params


@dataclass(frozen=True)
class InteractionLaw:
    """Singular interaction ``f = sgn(x)/|x|**a + f_reg`` plus external force ``g``."""

    a: float
    f_reg: RegularPart = field(default_factory=RegularPart)
    g_ext: ExternalForce = field(default_factory=ExternalForce)

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError(f"singularity exponent a must be positive, got {self.a}")

    @property
    def is_pure(self):
        """True when ``f_reg`` is identically zero."""
        return self.f_reg.kind == "zero"

    @property
    def holder_exponent(self):
        return 1.0 / (1.0 + self.a)

    def f(self, x):
        return f_eval(self, x)

    def df(self, x, order=1):
        return f_derivative(self, x, order)

    def to_dict(self):
        return {"a": self.a, "f_reg": self.f_reg.to_dict(), "g_ext": self.g_ext.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(
            float(data["a"]),
            RegularPart.from_dict(data.get("f_reg", {"kind": "zero"})),
            ExternalForce.from_dict(data.get("g_ext", {"kind": "zero"})),
        )


def _nonzero(x):
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise DomainError("interaction force is singular at x = 0")
    return x


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def f_pure(a, x):
    """``sgn(x)/|x|**a`` without domain checks; ``f_pure(a, inf) == 0``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** (-a)


def df_pure(a, x, order=1):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    if order == 1:
        return -a * ax ** (-a - 1)
    return np.sign(x) * a * (a + 1) * ax ** (-a - 2)


def f_eval(law, x):
    """Interaction force ``f(x)``; accepts scalars or arrays."""
    xs = _nonzero(x)
    return _out(f_pure(law.a, xs) + law.f_reg(xs), x)


def f_derivative(law, x, order=1):
    """Exact first or second derivative of ``f``."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    xs = _nonzero(x)
    return _out(df_pure(law.a, xs, order) + law.f_reg.derivative(xs, order), x)


def _kernel_args(r, rho):
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("kernel parameter rho must be positive")
    if np.any(r == 0) or np.any(r + rho == 0):
        raise DomainError("kernel argument r must avoid {-rho, 0}")
    return r, rho


def kernel_g(law, r, rho):
    """``g(r; rho) = f(rho + r) + f(r)``, the effect of one outside particle on a gap."""
    rs, rhos = _kernel_args(r, rho)
    return _out(f_eval(law, rhos + rs) + f_eval(law, rs), np.broadcast(r, rho))


def kernel_h(law, r, rho):
    """``h(r; rho) = f(rho + r) - f(r)``."""
    rs, rhos = _kernel_args(r, rho)
    return _out(f_eval(law, rhos + rs) - f_eval(law, rs), np.broadcast(r, rho))


@dataclass(frozen=True, eq=False)
class ParticleSystem:
    """Alive particles of the hybrid system.

    ``positions`` and ``signs`` list the alive particles in spatial order;
    ``labels`` are their original (0-based) labels out of ``n_total``.
    Passing ``forcing`` switches to reduced mode, in which ``b_i g(x_i)`` is
    replaced by ``F_i(t)`` and the signs must alternate starting with ``-1``.
    """

    positions: np.ndarray
    signs: np.ndarray
    labels: np.ndarray = None
    n_total: int = None
    forcing: Forcing = None

    def __post_init__(self):
        x = np.array(self.positions, dtype=float).reshape(-1)
        b = np.array(self.signs).reshape(-1)
        if len(b) != len(x):
            raise ValueError(f"signs has length {len(b)} but positions has length {len(x)}")
        if not np.all(np.isin(b, (-1, 1))):
            raise ValueError(f"signs must be +1 or -1, got {b.tolist()}")
        if not np.all(np.isfinite(x)):
            raise ValueError("positions must be finite")
        labels = np.arange(len(x)) if self.labels is None else np.array(self.labels, dtype=np.int64).reshape(-1)
        if len(labels) != len(x):
            raise ValueError("labels must match positions in length")
        n_total = len(x) if self.n_total is None else int(self.n_total)
        if len(labels) and (labels.min() < 0 or labels.max() >= n_total or len(set(labels.tolist())) != len(labels)):
            raise ValueError("labels must be distinct and lie in range(n_total)")
        if self.forcing is not None:
            if len(self.forcing) < n_total:
                raise ValueError(f"forcing defines {len(self.forcing)} terms for {n_total} particles")
            expected = -((-1) ** np.arange(len(x)))
            if not np.array_equal(b, expected):
                raise ValueError("reduced mode requires alternating signs b_i = (-1)^i starting with -1")
        x.setflags(write=False)
        b = b.astype(np.int64)
        b.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "signs", b)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "n_total", n_total)

    @property
    def n(self):
        return len(self.positions)

    @property
    def reduced(self):
        return self.forcing is not None

    @property
    def alive(self):
        mask = np.zeros(self.n_total, dtype=bool)
        mask[self.labels] = True
        return mask

    @property
    def gaps(self):
        return np.diff(self.positions)

    def min_gap(self):
        return float(np.min(self.gaps)) if self.n > 1 else math.inf

    def is_ordered(self):
        return bool(np.all(np.diff(self.positions) > 0))

    def with_positions(self, positions):
        return ParticleSystem(positions, self.signs, self.labels, self.n_total, self.forcing)

    def without(self, removed, survivor=None, survivor_position=None):
        """Drop the labels in ``removed``; optionally move ``survivor`` to a new position."""
        removed = set(int(k) for k in removed)
        keep = [k for k in range(self.n) if int(self.labels[k]) not in removed]
        x = self.positions[keep].copy()
        labels = self.labels[keep]
        if survivor is not None and survivor_position is not None:
            x[labels.tolist().index(survivor)] = survivor_position
        if self.forcing is not None and len(keep) and self.signs[keep][0] != -1:
            raise ValueError("annihilation broke the reduced-mode sign convention")
        return ParticleSystem(x, self.signs[keep], labels, self.n_total, self.forcing)


class GapView:
    """Neighbour gaps ``r[k] = x[k+1] - x[k]`` with infinite gaps beyond the ends."""

    def __init__(self, positions):
        self.positions = np.asarray(positions, dtype=float)
        self.r = np.diff(self.positions)

    @property
    def n(self):
        return len(self.positions)

    def gap(self, k):
        """``r[k]`` for ``0 <= k <= n-2``, ``inf`` otherwise (the two boundary gaps)."""
        if 0 <= k < len(self.r):
            return float(self.r[k])
        if k in (-1, len(self.r)):
            return math.inf
        raise IndexError(k)

    def r_of(self, j, i):
        """Signed distance ``x[j] - x[i]``."""
        return float(self.positions[j] - self.positions[i])


def pairwise_velocity(law, positions, signs, pure=False):
    """``sum_{j != i} b_i b_j f(x_i - x_j)`` for each particle (vectorised)."""
    x = np.asarray(positions, dtype=float)
    b = np.asarray(signs, dtype=float)
    n = len(x)
    if n < 2:
        return np.zeros(n)
    d = x[:, None] - x[None, :]
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] == 0):
        raise DomainError("two alive particles share a position")
    safe = np.where(off, d, 1.0)
    force = f_pure(law.a, safe)
    if not pure:
        force = force + law.f_reg(safe)
    force = np.where(off, force, 0.0)
    return b * (force @ b)


def external_velocity(law, system, t):
    """``b_i g(x_i)`` in full mode, ``F_i(t)`` in reduced mode."""
    if system.reduced:
        return system.forcing(t, system.labels)
    return system.signs * law.g_ext(system.positions)


def velocity_field(law, system, t=0.0):
    """Right-hand side ``dx_i/dt`` for every alive particle."""
    return pairwise_velocity(law, system.positions, system.signs) + external_velocity(law, system, t)


def gap_velocity(law, system, t, i):
    """``d r_i / dt`` assembled from the kernels ``g`` and ``h``.

    The pair ``(x_i, x_{i+1})`` contributes ``2 b_i b_{i+1} f(r_i)``; each
    outside particle ``k`` contributes ``-b_i b_k g(x_i - x_k; r_i)`` when the
    pair has opposite signs and ``b_i b_k h(x_i - x_k; r_i)`` otherwise.  This
    is computed independently of :func:`velocity_field` so the two can be
    cross-checked.
    """
    n = system.n
    if not 0 <= i < n - 1:
        raise IndexError(f"gap index {i} out of range for {n} particles")
    x = system.positions
    b = system.signs
    if np.any(np.diff(x) == 0):
        raise DomainError("two alive particles share a position")
    ri = x[i + 1] - x[i]
    bi, bj = int(b[i]), int(b[i + 1])
    ext = external_velocity(law, system, t)
    total = 2.0 * bi * bj * f_eval(law, ri) + (ext[i + 1] - ext[i])
    others = np.array([k for k in range(n) if k not in (i, i + 1)], dtype=int)
    if len(others):
        rik = x[i] - x[others]
        if bi == -bj:
            total += float(np.sum(-bi * b[others] * kernel_g(law, rik, ri)))
        else:
            total += float(np.sum(bi * b[others] * kernel_h(law, rik, ri)))
    return float(total)


def pair_velocity(velocities, j, i):
    """``d r_{ji} / dt`` from a velocity vector."""
    return float(velocities[j] - velocities[i])


PLACEMENTS = ("single_left", "single_right", "pair_left", "pair_right")


def table1_contribution_sign(b_i, b_j, b_kappa, placement, law, rho, d_near, d_far=None):
    """Sign of the contribution of an outside particle (or neighbouring pair) to ``d r_{ji}/dt``.

    The summand ``b_j b_k f(x_j - x_k) - b_i b_k f(x_i - x_k)`` is evaluated
    directly for the configuration ``x_i = 0``, ``x_j = rho``.  ``d_near`` is
    the distance from the nearer of ``x_i, x_j`` to the nearer outside
    particle.  For pairs, ``d_far > d_near`` locates the second particle, whose
    sign is ``-b_kappa``; ``b_kappa`` is always the sign of the left member.
    Distances may be arrays; the result is ``np.sign`` of the contribution.
    """
    if placement not in PLACEMENTS:
        raise DomainError(f"invalid placement {placement!r}; expected one of {PLACEMENTS}")
    for s in (b_i, b_j, b_kappa):
        if s not in (-1, 1):
            raise DomainError("signs must be +1 or -1")
    rho = np.asarray(rho, dtype=float)
    d_near = np.asarray(d_near, dtype=float)
    if np.any(rho <= 0) or np.any(d_near <= 0):
        raise DomainError("distances must be positive")
    xi, xj = 0.0, rho
    if placement.startswith("single"):
        outside = [(xi - d_near if placement == "single_left" else xj + d_near, b_kappa)]
    else:
        if d_far is None:
            raise DomainError("pair placement needs d_far")
        d_far = np.asarray(d_far, dtype=float)
        if np.any(d_far <= d_near):
            raise DomainError("pair placement needs d_far > d_near")
        if placement == "pair_left":
            outside = [(xi - d_far, b_kappa), (xi - d_near, -b_kappa)]
        else:
            outside = [(xj + d_near, b_kappa), (xj + d_far, -b_kappa)]
    total = 0.0
    for xk, bk in outside:
        total = total + b_j * bk * f_eval(law, xj - xk) - b_i * bk * f_eval(law, xi - xk)
    return np.sign(total)
