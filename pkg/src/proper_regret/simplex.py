"""Probability-simplex primitives.

Points of the simplex are :class:`ProbVec` instances; the hot loops elsewhere
in the package work on plain ``(..., N)`` float arrays and only wrap results
into :class:`ProbVec` at the API boundary.
"""
from __future__ import annotations

import enum
import itertools
import math
import os
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import BudgetError, DomainError, InfeasiblePairError, InputError

__all__ = [
    "INF",
    "PNorm",
    "ProbVec",
    "SimplexPair",
    "as_pnorm",
    "as_array",
    "budget_cap",
    "holder_conjugate",
    "p_norm",
    "pair_at_distance",
    "chord_pairs",
    "sample_simplex",
    "sample_simplex_array",
    "simplex_grid",
    "simplex_grid_array",
]

SUM_TOL = 1e-9
NEG_TOL = 1e-12
DEFAULT_BUDGET_CAP = 5_000_000


class Inf(enum.Enum):
    """Marker for the sup-norm index, kept out of float arithmetic."""

    INF = "inf"

    def __repr__(self) -> str:
        return "INF"

    def __str__(self) -> str:
        return "inf"


INF = Inf.INF


@dataclass(frozen=True)
class PNorm:
    """Index ``p`` of an l_p norm, ``1 <= p <= inf``."""

    value: Union[float, Inf]

    def __post_init__(self):
        if self.value is INF:
            return
        v = float(self.value)
        if not math.isfinite(v):
            raise InputError("use PNorm(INF) for the sup-norm, not a float infinity")
        if v < 1.0:
            raise InputError(f"p-norm index must be >= 1, got {v}")
        object.__setattr__(self, "value", v)

    @property
    def is_inf(self) -> bool:
        return self.value is INF

    @property
    def inverse(self) -> float:
        """``1/p`` with ``1/inf = 0``."""
        return 0.0 if self.is_inf else 1.0 / self.value

    @property
    def diameter(self) -> float:
        """Diameter ``2**(1/p)`` of the simplex in this norm."""
        return 2.0 ** self.inverse

    def conjugate(self) -> "PNorm":
        return holder_conjugate(self)

    def __str__(self) -> str:
        return "inf" if self.is_inf else format(self.value, "g")


def as_pnorm(p) -> PNorm:
    """Coerce ``1``, ``2.5``, ``"inf"``, ``math.inf`` or a :class:`PNorm`."""
    if isinstance(p, PNorm):
        return p
    if p is INF:
        return PNorm(INF)
    if isinstance(p, str):
        s = p.strip().lower()
        if s in ("inf", "infinity", "max"):
            return PNorm(INF)
        try:
            p = float(s)
        except ValueError:
            raise InputError(f"cannot parse p-norm index {p!r}") from None
    if isinstance(p, (int, float, np.floating, np.integer)) and math.isinf(p) and p > 0:
        return PNorm(INF)
    return PNorm(float(p))


def holder_conjugate(p) -> PNorm:
    """Return ``p*`` with ``1/p + 1/p* = 1`` (``1 <-> inf``)."""
    p = as_pnorm(p)
    if p.is_inf:
        return PNorm(1.0)
    if p.value == 1.0:
        return PNorm(INF)
    return PNorm(p.value / (p.value - 1.0))


def p_norm(v, p) -> Union[float, np.ndarray]:
    """l_p norm along the last axis of ``v``.

    Returns a float for 1-D input and an array for batched input.
    """
    p = as_pnorm(p)
    a = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InputError("p_norm requires finite components")
    a = np.abs(a)
    if p.is_inf:
        out = a.max(axis=-1)
    elif p.value == 1.0:
        out = a.sum(axis=-1)
    elif p.value == 2.0:
        out = np.sqrt((a * a).sum(axis=-1))
    else:
        # rescale by the max entry to avoid under/overflow for large p
        m = a.max(axis=-1, keepdims=True)
        safe = np.where(m > 0, m, 1.0)
        out = safe[..., 0] * ((a / safe) ** p.value).sum(axis=-1) ** (1.0 / p.value)
    return float(out) if np.ndim(out) == 0 else out


class ProbVec:
    """An immutable point of the probability simplex with cached support.

    Inputs whose sum is within ``1e-9`` of one are accepted; the residual is
    moved onto the largest component.  Components in ``[-1e-12, 0)`` are
    treated as float drift and set to zero.
    """

    __slots__ = ("_q", "_support")

    def __init__(self, components, *, atol: float = SUM_TOL):
        if isinstance(components, ProbVec):
            self._q = components._q
            self._support = components._support
            return
        q = np.array(components, dtype=float)
        if q.ndim != 1:
            raise InputError(f"ProbVec expects a 1-D vector, got shape {q.shape}")
        if q.size < 2:
            raise InputError("ProbVec needs N >= 2 components")
        if not np.all(np.isfinite(q)):
            raise InputError("ProbVec components must be finite")
        if q.min() < -NEG_TOL:
            raise InputError(f"negative component {q.min():.3g}")
        q[q < 0] = 0.0
        s = q.sum()
        if abs(s - 1.0) > atol:
            raise InputError(f"components sum to {s!r}, not 1")
        q[int(np.argmax(q))] += 1.0 - s
        q.flags.writeable = False
        self._q = q
        self._support = frozenset(int(i) for i in np.flatnonzero(q > 0))

    @property
    def components(self) -> np.ndarray:
        return self._q

    @property
    def support(self) -> frozenset:
        return self._support

    @property
    def N(self) -> int:
        return self._q.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._q
        return self._q.astype(dtype)

    def __len__(self) -> int:
        return self._q.size

    def __getitem__(self, i):
        return self._q[i]

    def __iter__(self):
        return iter(self._q.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbVec):
            return NotImplemented
        return np.array_equal(self._q, other._q)

    def __hash__(self) -> int:
        return hash(tuple(self._q.tolist()))

    def __repr__(self) -> str:
        return "ProbVec(" + ", ".join(format(x, ".6g") for x in self._q) + ")"

    def tolist(self) -> list:
        return self._q.tolist()


def as_array(q) -> np.ndarray:
    """Components of a :class:`ProbVec` or array-like, validated, as an array."""
    if isinstance(q, ProbVec):
        return q.components
    return ProbVec(q).components


@dataclass(frozen=True)
class SimplexPair:
    """Two simplex points together with their p-norm distance."""

    q: ProbVec
    q_check: ProbVec
    distance: float
    p: PNorm

    def __post_init__(self):
        d = p_norm(self.q.components - self.q_check.components, self.p)
        if abs(d - self.distance) > 1e-12:
            raise InputError(f"declared distance {self.distance} != recomputed {d}")
        if self.distance < 0 or self.distance > self.p.diameter + 1e-12:
            raise InputError("pair distance outside [0, 2**(1/p)]")

    @classmethod
    def from_points(cls, q, q_check, p) -> "SimplexPair":
        q, q_check, p = ProbVec(q), ProbVec(q_check), as_pnorm(p)
        return cls(q, q_check, p_norm(q.components - q_check.components, p), p)

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.q.components + self.q_check.components)

    def to_dict(self) -> dict:
        return {"q": self.q.tolist(), "q_check": self.q_check.tolist(), "distance": self.distance}


def chord_pairs(base: np.ndarray, direction: np.ndarray, r: float, p) -> tuple:
    """Batched chord construction behind :func:`pair_at_distance`.

    For every row, the chord of p-length ``r`` on the line ``base + t*direction``
    is centred at ``base`` when it fits and otherwise slid along the feasible
    segment.  Returns ``(q, q_check, feasible)``; infeasible rows hold ``nan``.
    """
    p = as_pnorm(p)
    base = np.atleast_2d(np.asarray(base, dtype=float))
    d = np.atleast_2d(np.asarray(direction, dtype=float))
    dn = np.atleast_1d(p_norm(d, p))
    if r == 0.0:
        return base.copy(), base.copy(), np.ones(base.shape[0], dtype=bool)
    nonzero = dn > 0
    half = np.where(nonzero, 0.5 * r / np.where(nonzero, dn, 1.0), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        return _chord(base, d, half, nonzero)


def _chord(base, d, half, nonzero):
    ratio = -base / d
    t_lo = np.where(d > 0, ratio, -np.inf).max(axis=-1)
    t_hi = np.where(d < 0, ratio, np.inf).min(axis=-1)
    slack = 1e-15 * (1.0 + np.abs(half))
    feasible = nonzero & (t_hi - t_lo >= 2.0 * half - slack)
    lo = np.minimum(t_lo + half, t_hi - half)
    centre = np.clip(0.0, lo, np.maximum(lo, t_hi - half))
    centre = np.where(feasible, centre, np.nan)
    q = base + (centre + half)[:, None] * d
    qc = base + (centre - half)[:, None] * d
    q = np.where(q < 0, 0.0, q)
    qc = np.where(qc < 0, 0.0, qc)
    return q, qc, feasible


def pair_at_distance(base, direction, r: float, p) -> SimplexPair:
    """Pair of simplex points at exact p-distance ``r`` along ``direction``.

    The chord is centred at ``base`` if both endpoints fit in the simplex;
    otherwise it slides along the line through ``base`` until it does.

    Raises
    ------
    InfeasiblePairError
        If the full feasible segment through ``base`` is shorter than ``r``.
    """
    p = as_pnorm(p)
    b = as_array(base)
    d = np.asarray(direction, dtype=float)
    if d.shape != b.shape or not np.all(np.isfinite(d)):
        raise InputError("direction must be a finite vector of the same length as base")
    if abs(d.sum()) > 1e-12 * max(1.0, np.abs(d).sum()):
        raise InputError("direction must sum to zero (tangent to the simplex)")
    if r < 0 or r > p.diameter + 1e-12:
        raise DomainError(f"r={r} outside [0, {p.diameter}]")
    r = min(float(r), p.diameter)
    q, qc, ok = chord_pairs(b, d, r, p)
    if not ok[0]:
        raise InfeasiblePairError(f"no chord of length {r} through base along direction")
    q, qc = ProbVec(q[0]), ProbVec(qc[0])
    dist = p_norm(q.components - qc.components, p)
    return SimplexPair(q, qc, dist, p)


def budget_cap() -> int:
    """Grid-size cap from ``PROPER_REGRET_BUDGET_CAP`` (default 5e6)."""
    raw = os.environ.get("PROPER_REGRET_BUDGET_CAP")
    if raw is None:
        return DEFAULT_BUDGET_CAP
    try:
        return int(float(raw))
    except ValueError:
        raise InputError(f"bad PROPER_REGRET_BUDGET_CAP={raw!r}") from None


def simplex_grid_array(N: int, resolution: int, cap: int | None = None) -> np.ndarray:
    """All lattice points ``k/resolution`` of the simplex, lexicographically sorted."""
    if N < 2 or resolution < 1:
        raise InputError("simplex_grid needs N >= 2 and resolution >= 1")
    cap = budget_cap() if cap is None else cap
    count = math.comb(resolution + N - 1, N - 1)
    if count > cap:
        raise BudgetError(f"grid of {count} points exceeds cap {cap}")
    # stars and bars: bar positions among resolution + N - 1 slots
    bars = np.array(list(itertools.combinations(range(resolution + N - 1), N - 1)), dtype=np.int64)
    bars = bars.reshape(count, N - 1)
    edges = np.concatenate(
        [np.full((count, 1), -1), bars, np.full((count, 1), resolution + N - 1)], axis=1
    )
    counts = np.diff(edges, axis=1) - 1
    order = np.lexsort(counts.T[::-1])
    return counts[order] / resolution


def simplex_grid(N: int, resolution: int, cap: int | None = None) -> list:
    """Lattice grid of the simplex as a list of :class:`ProbVec`."""
    return [ProbVec(row) for row in simplex_grid_array(N, resolution, cap)]


def sample_simplex_array(N: int, count: int, seed: int) -> np.ndarray:
    """``count`` flat-Dirichlet samples, shape ``(count, N)``."""
    if N < 2 or count < 1:
        raise InputError("sample_simplex needs N >= 2 and count >= 1")
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(N), size=count)


def sample_simplex(N: int, count: int, seed: int) -> list:
    """Uniform samples on the simplex, fully determined by ``seed``."""
    return [ProbVec(row) for row in sample_simplex_array(N, count, seed)]


def iter_rows(points: Iterable) -> np.ndarray:
    """Stack ProbVecs or array rows into an ``(M, N)`` array."""
    return np.array([np.asarray(x, dtype=float) for x in points])
