"""Convex generators ``f = -(Bayes risk)`` on the simplex and their subgradient selectors.

All families evaluate on batched ``(..., N)`` arrays.  Subgradients live in
``[-inf, inf)``: a component is ``-inf`` exactly when ``f`` has no finite
subgradient at a boundary point, and then only off the support.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import xlogy

from .errors import InputError
from .simplex import as_array, simplex_grid_array

__all__ = [
    "FAMILIES",
    "ALIASES",
    "GeneratorSpec",
    "SubgradientCheck",
    "make_generator",
    "eval_f",
    "subgradient",
    "subgradient_check",
    "subgradient_check_grid",
    "affine_shift",
    "extended_dot",
]

FAMILIES = ("shannon", "sq-alpha-norm", "alpha-norm", "tsallis", "max-power", "custom")
ALIASES = {"log": ("shannon", None), "brier": ("sq-alpha-norm", 2.0)}

CHECK_TOL = 1e-9
_TIE_TOL = 1e-14


@dataclass(frozen=True)
class GeneratorSpec:
    """A convex generator family with parameter ``alpha`` on the N-simplex.

    Use :meth:`custom` to register a user-supplied ``(f, grad)`` pair; the two
    callables receive arrays of shape ``(..., N)``.
    """

    family: str
    alpha: Optional[float] = None
    N: int = 2
    f: Optional[Callable] = field(default=None, compare=False, repr=False)
    grad: Optional[Callable] = field(default=None, compare=False, repr=False)
    custom_strict: bool = field(default=False, compare=False, repr=False)
    label: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown generator family {self.family!r}")
        if int(self.N) != self.N or self.N < 2:
            raise InputError("generator dimension N must be an integer >= 2")
        object.__setattr__(self, "N", int(self.N))
        if self.family == "shannon":
            if self.alpha is not None:
                raise InputError("the Shannon generator takes no alpha")
        elif self.family == "custom":
            if self.f is None or self.grad is None:
                raise InputError("custom generators need both f and grad")
        else:
            if self.alpha is None:
                raise InputError(f"{self.family} needs alpha > 1")
            a = float(self.alpha)
            if not np.isfinite(a) or a <= 1.0:
                raise InputError(f"{self.family} needs alpha > 1, got {self.alpha}")
            object.__setattr__(self, "alpha", a)

    @classmethod
    def custom(cls, f, grad, N: int, *, strict: bool = False, name: str = "custom",
               validate: bool = True, resolution: int = 20) -> "GeneratorSpec":
        """Register a user generator; by default its selector is checked on a grid first."""
        spec = cls("custom", None, N, f=f, grad=grad, custom_strict=strict, label=name)
        if validate:
            res = subgradient_check_grid(spec, resolution)
            if not res.ok:
                raise InputError(
                    f"custom generator {name!r} failed the subgradient check: {res.to_dict()}"
                )
        return spec

    @property
    def name(self) -> str:
        if self.family == "custom":
            return self.label or "custom"
        if self.alpha is None:
            return self.family
        return f"{self.family}(alpha={self.alpha:g})"

    @property
    def strict(self) -> bool:
        """Whether ``f`` is strictly convex on the simplex (strictly proper loss)."""
        if self.family == "custom":
            return self.custom_strict
        if self.family == "max-power":
            # |q_1 - 1/2|**alpha on the 2-simplex; no claim for N >= 3
            return self.N == 2
        return True

    @property
    def differentiable(self) -> bool:
        return self.family in ("shannon", "sq-alpha-norm", "alpha-norm", "tsallis")

    # -- batched evaluation -------------------------------------------------

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        fam, a = self.family, self.alpha
        if fam == "shannon":
            return xlogy(x, x).sum(axis=-1)
        if fam == "sq-alpha-norm":
            return _alpha_norm(x, a) ** 2
        if fam == "alpha-norm":
            return _alpha_norm(x, a)
        if fam == "tsallis":
            return (np.abs(x) ** a).sum(axis=-1)
        if fam == "max-power":
            return (np.abs(x - 1.0 / x.shape[-1]) ** a).max(axis=-1)
        return np.asarray(self.f(x), dtype=float)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        fam, a = self.family, self.alpha
        if fam == "shannon":
            with np.errstate(divide="ignore"):
                return 1.0 + np.log(x)
        if fam == "sq-alpha-norm":
            n = _alpha_norm(x, a)[..., None]
            return 2.0 * n ** (2.0 - a) * x ** (a - 1.0)
        if fam == "alpha-norm":
            n = _alpha_norm(x, a)[..., None]
            return (x / n) ** (a - 1.0)
        if fam == "tsallis":
            return a * x ** (a - 1.0)
        if fam == "max-power":
            return _max_power_selector(x, a)
        return np.asarray(self.grad(x), dtype=float)


def _alpha_norm(x: np.ndarray, a: float) -> np.ndarray:
    return (np.abs(x) ** a).sum(axis=-1) ** (1.0 / a)


def _max_power_selector(x: np.ndarray, a: float) -> np.ndarray:
    # gradient of the lowest-index active piece |x_n - 1/N|**alpha
    dev = x - 1.0 / x.shape[-1]
    mag = np.abs(dev)
    top = mag.max(axis=-1, keepdims=True)
    active = mag >= top - _TIE_TOL * np.maximum(top, 1.0)
    first = np.argmax(active, axis=-1)
    g = np.zeros_like(x)
    m = np.take_along_axis(dev, first[..., None], axis=-1)
    slope = a * np.abs(m) ** (a - 1.0) * np.sign(m)
    np.put_along_axis(g, first[..., None], slope, axis=-1)
    return g


def make_generator(family: str, alpha: float | None = None, N: int = 2) -> GeneratorSpec:
    """Build a generator from its CLI name (aliases ``log`` and ``brier`` included)."""
    key = family.strip().lower()
    if key in ALIASES:
        key, fixed = ALIASES[key]
        if fixed is not None:
            if alpha is not None and float(alpha) != fixed:
                raise InputError(f"{family} fixes alpha={fixed:g}")
            alpha = fixed
        elif alpha is not None:
            raise InputError(f"{family} takes no alpha")
    if key == "custom":
        raise InputError("custom generators are built with GeneratorSpec.custom")
    return GeneratorSpec(key, alpha, N)


def affine_shift(spec: GeneratorSpec, u, lam: float, *, validate: bool = False) -> GeneratorSpec:
    """``f + <u, .> + lam`` as a custom generator with the matching selector."""
    u = np.asarray(u, dtype=float)
    if u.shape != (spec.N,):
        raise InputError("shift vector must have length N")
    lam = float(lam)
    return GeneratorSpec.custom(
        lambda x: spec.value(x) + np.asarray(x) @ u + lam,
        lambda x: spec.gradient(x) + u,
        spec.N,
        strict=spec.strict,
        name=f"{spec.name}+affine",
        validate=validate,
    )


def _check_dim(spec: GeneratorSpec, q: np.ndarray) -> None:
    if q.shape[-1] != spec.N:
        raise InputError(f"point has dimension {q.shape[-1]}, generator expects N={spec.N}")


def eval_f(spec: GeneratorSpec, q) -> float:
    """Value of the generator at a simplex point."""
    x = as_array(q)
    _check_dim(spec, x)
    return float(spec.value(x))


def subgradient(spec: GeneratorSpec, q) -> np.ndarray:
    """The family's deterministic subgradient selector at ``q`` (may contain ``-inf``)."""
    x = as_array(q)
    _check_dim(spec, x)
    v = np.array(spec.gradient(x), dtype=float)
    return v


def extended_dot(v, w) -> np.ndarray:
    """``<v, w>`` along the last axis with the convention ``0 * (+-inf) = 0``."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    with np.errstate(invalid="ignore"):
        prod = np.where(w == 0.0, 0.0, v * w)
    return prod.sum(axis=-1)


@dataclass
class SubgradientCheck:
    ok: bool
    worst_violation: float
    q0: Optional[list] = None
    worst_probe: Optional[list] = None

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "worst_violation": self.worst_violation,
            "q0": self.q0,
            "worst_probe": self.worst_probe,
        }


def subgradient_check(spec: GeneratorSpec, q0, probes, v=None, tol: float = CHECK_TOL) -> SubgradientCheck:
    """Check ``f(q) >= f(q0) + <v, q - q0>`` for every probe.

    ``v`` defaults to the family selector at ``q0``.  The result is falsy on
    failure and carries the worst violating probe.
    """
    x0 = as_array(q0)
    _check_dim(spec, x0)
    P = np.atleast_2d(np.asarray([np.asarray(p, dtype=float) for p in probes]))
    v = subgradient(spec, x0) if v is None else np.asarray(v, dtype=float)
    viol = _violations(spec, x0[None, :], v[None, :], P)[0]
    k = int(np.argmax(viol))
    worst = float(viol[k])
    return SubgradientCheck(worst <= tol, worst, x0.tolist(), P[k].tolist())


def _violations(spec, X0: np.ndarray, V: np.ndarray, P: np.ndarray) -> np.ndarray:
    # violation[i, j] = f(x0_i) + <v_i, p_j - x0_i> - f(p_j)
    f0 = spec.value(X0)
    fp = spec.value(P)
    diff = P[None, :, :] - X0[:, None, :]
    lin = extended_dot(V[:, None, :], diff)
    with np.errstate(invalid="ignore"):
        out = f0[:, None] + lin - fp[None, :]
    return np.where(np.isnan(out), -np.inf, out)


def subgradient_check_grid(spec: GeneratorSpec, resolution: int, tol: float = CHECK_TOL,
                           chunk: int = 256) -> SubgradientCheck:
    """Run :func:`subgradient_check` at every lattice point against the whole lattice."""
    G = simplex_grid_array(spec.N, resolution)
    V = spec.gradient(G)
    worst, arg = -np.inf, (0, 0)
    for start in range(0, G.shape[0], chunk):
        sl = slice(start, start + chunk)
        viol = _violations(spec, G[sl], V[sl], G)
        k = np.unravel_index(int(np.argmax(viol)), viol.shape)
        if viol[k] > worst:
            worst, arg = float(viol[k]), (start + k[0], k[1])
    return SubgradientCheck(worst <= tol, worst, G[arg[0]].tolist(), G[arg[1]].tolist())
