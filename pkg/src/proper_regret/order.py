"""Order analysis of moduli: Simonenko order, local modulus ``K`` and ``kappa``.

``sigma(r) = r * D^- omega(r) / omega(r)`` is the local power exponent of the
modulus and ``K(r) = 8 omega(r) / r**2`` its local strong-convexity constant;
``kappa`` is the infimum of ``K``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateError, DomainError, InputError
from .generators import GeneratorSpec
from .modulus import (
    CLOSED,
    BRUTE,
    ModulusCurve,
    ModulusPoint,
    SearchBudget,
    closed_form_available,
    modulus_brute_force,
    modulus_closed_form,
    modulus_closed_form_derivative,
)
from .reports import Report, dumps, jsonable
from .simplex import PNorm, as_pnorm
from .special import cosine_integral

__all__ = [
    "DEFAULT_REL_EPS",
    "ModulusFunction",
    "CounterexampleOmega",
    "OrderConfig",
    "OrderProfile",
    "modulus_function",
    "dini_left_derivative",
    "simonenko_order",
    "local_modulus",
    "order_profile",
    "power_sandwich_check",
    "order_barrier_check",
    "counterexample_profile",
    "counterexample_check",
]

# backward steps as multiples of r; the last five quotients feed the limsup proxy
DEFAULT_REL_EPS = (1e-3, 3e-4, 1e-4, 3e-5, 1e-5)
OMEGA_FLOOR = 1e-14
BARRIER = 2.0
BARRIER_TOL = 0.05
C1_THRESHOLD = 1e-2
C2_RANGE = 1e-2
WINDOW = 10


@dataclass(frozen=True)
class ModulusFunction:
    """A modulus as a callable, with an optional analytic derivative fast path."""

    fn: Callable
    derivative: Optional[Callable] = None
    domain: tuple = (0.0, math.inf)
    name: str = "omega"

    def __call__(self, r):
        return self.fn(r)


class CounterexampleOmega(ModulusFunction):
    """``omega(r) = r sin(1/r) - Ci(1/r) + r`` with ``omega(0) = 0``.

    Non-decreasing with ``omega'(r) = 1 + sin(1/r)``; linear to leading order
    near zero while its order oscillates up to 2.
    """

    def __init__(self):
        super().__init__(self._value, self._derivative, (0.0, math.inf), "counterexample")

    @staticmethod
    def _value(r):
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr < 0):
            raise DomainError("counterexample omega needs r >= 0")
        safe = np.where(r_arr > 0, r_arr, 1.0)
        z = 1.0 / safe
        val = safe * np.sin(z) - cosine_integral(z) + safe
        out = np.where(r_arr > 0, val, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    @staticmethod
    def _derivative(r):
        r_arr = np.asarray(r, dtype=float)
        out = 1.0 + np.sin(1.0 / r_arr)
        return float(out) if np.ndim(out) == 0 else out


def _as_function(obj) -> ModulusFunction:
    if isinstance(obj, ModulusFunction):
        return obj
    if isinstance(obj, ModulusCurve):
        interp = obj.interpolant()

        def fn(r):
            out = interp(np.asarray(r, dtype=float))
            return float(out) if np.ndim(out) == 0 else out

        return ModulusFunction(fn, None, (0.0, float(obj.r[-1])), obj.label)
    if callable(obj):
        return ModulusFunction(obj)
    raise InputError(f"cannot use {type(obj).__name__} as a modulus")


def modulus_function(spec: GeneratorSpec, p, method: str = "auto",
                     budget: SearchBudget | None = None) -> ModulusFunction:
    """Modulus of ``spec`` as a function of ``r``.

    The closed form (with its analytic derivative) is used when available and
    allowed; otherwise every evaluation runs the brute-force search.
    """
    p = as_pnorm(p)
    if method not in ("auto", "closed", "brute"):
        raise InputError(f"unknown method {method!r}")
    if method == "closed" or (method == "auto" and closed_form_available(spec, p)):
        return ModulusFunction(
            lambda r: modulus_closed_form(spec, p, r),
            lambda r: modulus_closed_form_derivative(spec, p, r),
            (0.0, p.diameter),
            spec.name,
        )
    budget = budget or SearchBudget()

    def fn(r):
        r_arr = np.asarray(r, dtype=float)
        out = np.array([modulus_brute_force(spec, p, x, budget).omega for x in r_arr.ravel()])
        out = out.reshape(r_arr.shape)
        return float(out) if np.ndim(out) == 0 else out

    return ModulusFunction(fn, None, (0.0, p.diameter), spec.name)


def _eps_for(r: float, eps_schedule: Optional[Sequence[float]]) -> np.ndarray:
    if eps_schedule is None:
        return r * np.asarray(DEFAULT_REL_EPS)
    eps = np.asarray(eps_schedule, dtype=float)
    if eps.ndim != 1 or eps.size == 0 or np.any(eps <= 0):
        raise InputError("eps_schedule must be a non-empty list of positive steps")
    if np.any(np.diff(eps) >= 0):
        raise InputError("eps_schedule must be strictly decreasing")
    return eps


def dini_left_derivative(omega, r: float, eps_schedule: Optional[Sequence[float]] = None,
                         analytic: bool = True) -> float:
    """Upper left Dini derivative ``limsup (omega(r) - omega(r - eps)) / eps``.

    Uses the registered analytic derivative when there is one (and
    ``analytic`` is true); otherwise the maximum of the backward difference
    quotients over the last five steps of ``eps_schedule``.  By default the
    steps are ``DEFAULT_REL_EPS`` scaled by ``r``.

    Raises
    ------
    DomainError
        If ``r - eps`` leaves the domain of ``omega``.
    """
    func = _as_function(omega)
    r = float(r)
    if analytic and func.derivative is not None:
        return float(func.derivative(r))
    eps = _eps_for(r, eps_schedule)
    if r - eps.max() < func.domain[0] or r > func.domain[1] * (1 + 1e-12):
        raise DomainError(f"backward step from r={r} leaves the domain {func.domain}")
    tail = eps[-5:]
    w = np.asarray(func(np.concatenate([[r], r - tail])), dtype=float)
    return float(np.max((w[0] - w[1:]) / tail))


def simonenko_order(omega, r: float, eps_schedule: Optional[Sequence[float]] = None,
                    analytic: bool = True) -> float:
    """Simonenko order ``r * D^- omega(r) / omega(r)``.

    Raises
    ------
    DegenerateError
        If ``omega(r) <= 1e-14`` (the order is undefined for a flat modulus).
    """
    func = _as_function(omega)
    w = float(func(float(r)))
    if w <= OMEGA_FLOOR:
        raise DegenerateError(f"omega({r}) = {w:.3g} is too small for the order")
    return float(r) * dini_left_derivative(func, r, eps_schedule, analytic) / w


def local_modulus(omega_value, r):
    """``K(r) = 8 omega(r) / r**2``."""
    return 8.0 * np.asarray(omega_value, dtype=float) / np.asarray(r, dtype=float) ** 2


@dataclass(frozen=True)
class OrderConfig:
    method: str = "auto"
    eps_schedule: Optional[tuple] = None
    analytic: bool = True
    budget: SearchBudget = field(default_factory=SearchBudget)
    window: int = WINDOW


@dataclass
class OrderProfile:
    """Order profile of a modulus on an r-grid."""

    name: str
    p: Optional[PNorm]
    r: np.ndarray
    omega: np.ndarray
    sigma: np.ndarray
    K: np.ndarray
    method: str
    dini_epsilons: Optional[tuple]
    window: int = WINDOW
    curve: Optional[ModulusCurve] = None
    function: Optional[ModulusFunction] = field(default=None, repr=False)

    @property
    def kappa_estimate(self) -> float:
        return float(np.min(self.K))

    def _near_zero(self) -> np.ndarray:
        return np.argsort(self.r, kind="stable")[: self.window]

    @property
    def degenerate(self) -> np.ndarray:
        """Grid r values where omega is too small for the order (sigma is nan)."""
        return self.r[np.isnan(self.sigma)]

    def _window_sigma(self) -> np.ndarray:
        w = self.sigma[self._near_zero()]
        return w[~np.isnan(w)]

    @property
    def limsup_sigma_estimate(self) -> float:
        w = self._window_sigma()
        return float(np.max(w)) if w.size else float("nan")

    @property
    def liminf_sigma_estimate(self) -> float:
        w = self._window_sigma()
        return float(np.min(w)) if w.size else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "omega", "sigma", "K"])
        for row in zip(self.r, self.omega, self.sigma, self.K):
            w.writerow([format(float(x), ".17g") for x in row])
        return buf.getvalue()

    def summary(self) -> dict:
        rep = order_barrier_check(self)
        return jsonable({
            "name": self.name,
            "p": str(self.p) if self.p is not None else None,
            "method": self.method,
            "kappa": self.kappa_estimate,
            "limsup_sigma": self.limsup_sigma_estimate,
            "liminf_sigma": self.liminf_sigma_estimate,
            "C1": rep.details["C1"],
            "C2": rep.details["C2"],
            "pass": rep.passed,
            "r_min": float(np.min(self.r)),
            "window": self.window,
            "dini_epsilons": list(self.dini_epsilons) if self.dini_epsilons else "relative",
        })

    def to_json(self) -> str:
        return dumps(self.summary())


def _order_or_nan(func, r, cfg) -> float:
    try:
        return simonenko_order(func, r, cfg.eps_schedule, cfg.analytic)
    except DegenerateError:
        return float("nan")


def _profile_from_function(func: ModulusFunction, r_grid, p, method, cfg: OrderConfig,
                           spec: Optional[GeneratorSpec] = None) -> OrderProfile:
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise InputError("order profile needs a non-empty 1-D r grid")
    if np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise InputError("order profile r grid must be positive and strictly increasing")
    omega = np.asarray(func(r), dtype=float).reshape(r.shape)
    sigma = np.array([_order_or_nan(func, x, cfg) for x in r])
    K = local_modulus(omega, r)
    kind = CLOSED if method == "closed" else BRUTE
    curve = ModulusCurve(spec, p if p is not None else as_pnorm(1),
                         [ModulusPoint(float(a), float(b), kind) for a, b in zip(r, omega)],
                         name=func.name)
    eps = tuple(cfg.eps_schedule) if cfg.eps_schedule is not None else None
    return OrderProfile(func.name, p, r, omega, sigma, K, method, eps, cfg.window, curve, func)


def order_profile(spec: GeneratorSpec, p, r_grid, config: OrderConfig | None = None) -> OrderProfile:
    """sigma, K and the kappa / limsup estimates of ``spec``'s modulus on ``r_grid``.

    ``kappa_estimate`` is the minimum of K over the grid and the limsup / liminf
    estimates of sigma are taken over the ``config.window`` smallest r values.
    """
    cfg = config or OrderConfig()
    p = as_pnorm(p)
    if not spec.strict:
        raise InputError(f"order analysis needs a strictly convex generator, {spec.name} is not")
    if np.any(np.asarray(r_grid, dtype=float) > p.diameter * (1 + 1e-12)):
        raise DomainError(f"r grid exceeds the diameter {p.diameter}")
    func = modulus_function(spec, p, cfg.method, cfg.budget)
    method = "closed" if func.derivative is not None else "brute"
    return _profile_from_function(func, r_grid, p, method, cfg, spec)


def power_sandwich_check(profile: OrderProfile, r0: float, rtol: float = 1e-6) -> Report:
    """Check the power sandwich between ``s = min sigma`` and ``S = max sigma`` on ``(0, r0]``.

    On every grid ``r <= r0``::

        omega(r0) (r/r0)**S <= omega(r) <= omega(r0) (r/r0)**s

    and ``omega(r) r**-s`` is non-decreasing while ``omega(r) r**-S`` is
    non-increasing.  Comparisons use relative tolerance ``rtol``.  The report
    is inconclusive (``passed=None``) when ``S`` is not finite.
    """
    r0 = float(r0)
    sel = profile.r <= r0 * (1 + 1e-12)
    if not np.any(sel) or not np.any(np.isclose(profile.r, r0, rtol=1e-12, atol=0)):
        raise DomainError(f"r0={r0} must be a grid point of the profile")
    r, w, sig = profile.r[sel], profile.omega[sel], profile.sigma[sel]
    s, S = float(np.min(sig)), float(np.max(sig))
    w0 = float(w[-1])
    details = {"r0": r0, "s": s, "S": S, "points": int(sel.sum())}
    if not math.isfinite(S):
        return Report("power-sandwich", profile.name, None, 0, str(profile.p), None, None, None,
                      dict(details, note="S is not finite"))
    lower = w0 * (r / r0) ** S
    upper = w0 * (r / r0) ** s
    tol = rtol * np.maximum(w, 1e-300)
    low_gap = w - lower
    up_gap = upper - w
    inc = w * r ** -s
    dec = w * r ** -S
    inc_ok = bool(np.all(np.diff(inc) >= -rtol * inc[1:]))
    dec_ok = bool(np.all(np.diff(dec) <= rtol * dec[:-1]))
    margin = float(min(np.min(low_gap / np.maximum(w, 1e-300)), np.min(up_gap / np.maximum(w, 1e-300))))
    passed = bool(np.all(low_gap >= -tol) and np.all(up_gap >= -tol) and inc_ok and dec_ok)
    k = int(np.argmin(np.minimum(low_gap, up_gap)))
    details.update(lower_ok=bool(np.all(low_gap >= -tol)), upper_ok=bool(np.all(up_gap >= -tol)),
                   increasing_ok=inc_ok, decreasing_ok=dec_ok)
    return Report("power-sandwich", profile.name, None, 0, str(profile.p), passed,
                  {"r": float(r[k]), "omega": float(w[k]), "lower": float(lower[k]),
                   "upper": float(upper[k])}, margin, details)


def order_barrier_check(profile: OrderProfile, threshold: float = BARRIER - BARRIER_TOL) -> Report:
    """Compare the near-zero order estimates with the barrier ``2``.

    (C1) is declared when ``kappa_estimate >= 1e-2`` and (C2) when K varies by
    less than ``1e-2`` over the window of smallest r.  With both, the liminf
    estimate must reach ``threshold``; with one, the limsup estimate must.
    With neither, or a grid that does not reach ``1e-3``, the report is
    inconclusive (``passed=None``).
    """
    idx = profile._near_zero()
    Kw = profile.K[idx]
    c1 = bool(profile.kappa_estimate >= C1_THRESHOLD)
    c2 = bool(np.ptp(Kw) < C2_RANGE)
    limsup, liminf = profile.limsup_sigma_estimate, profile.liminf_sigma_estimate
    r_min = float(np.min(profile.r))
    details = {"C1": c1, "C2": c2, "limsup_sigma": limsup, "liminf_sigma": liminf,
               "kappa": profile.kappa_estimate, "K_range": float(np.ptp(Kw)),
               "r_min": r_min, "threshold": threshold, "window": profile.window}
    if r_min > 1e-3 * (1 + 1e-9):
        passed, used = None, None
        details["note"] = "grid does not reach 1e-3"
    elif math.isnan(limsup):
        passed, used = None, None
        details["note"] = "omega too small for the order on the whole window"
    elif c1 and c2:
        used = "liminf"
        passed = bool(liminf >= threshold)
    elif c1 or c2:
        used = "limsup"
        passed = bool(limsup >= threshold)
    else:
        passed, used = None, None
        details["note"] = "neither condition detected"
    details["estimate"] = used
    value = liminf if used == "liminf" else limsup
    margin = None if used is None else float(value - threshold)
    return Report("order-barrier", profile.name, None, 0,
                  str(profile.p) if profile.p is not None else None, passed, None, margin, details)


def counterexample_profile(r_grid, config: OrderConfig | None = None) -> OrderProfile:
    """Order profile of :class:`CounterexampleOmega` on ``r_grid`` (``1e-4 <= r <= 1``)."""
    r = np.asarray(r_grid, dtype=float)
    if r.size == 0 or r.min() < 1e-4 or r.max() > 1.0:
        raise DomainError("counterexample grid must lie in [1e-4, 1]")
    return _profile_from_function(CounterexampleOmega(), r, None, "closed", config or OrderConfig())


def counterexample_check(profile: OrderProfile, r_max: float = 0.1,
                         threshold: float = BARRIER - BARRIER_TOL) -> Report:
    """Monotonicity, near-zero order and linear growth of the counterexample."""
    func = profile.function or CounterexampleOmega()
    deriv = np.asarray(func.derivative(profile.r))
    small = profile.r <= r_max
    max_sigma = float(np.max(profile.sigma[small])) if np.any(small) else float("nan")
    ratio = profile.omega / profile.r
    monotone = bool(np.all(deriv >= 0) and np.all(np.diff(profile.omega) >= 0))
    passed = bool(monotone and max_sigma >= threshold)
    return Report("counterexample", "counterexample", None, 0, None, passed, None,
                  max_sigma - threshold,
                  {"min_derivative": float(deriv.min()), "monotone": monotone,
                   "max_sigma_small_r": max_sigma, "r_max": r_max,
                   "max_omega_over_r": float(ratio.max()), "threshold": threshold})
