"""Moduli of convexity on ``(simplex, ||.||_p)``.

``omega(r)`` is the smallest midpoint Jensen gap over simplex pairs at p-distance
at least ``r``; the infimum is attained at distance exactly ``r``.  Distances
here are always p-norm distances on ``[0, 2**(1/p)]``.  The two-point closed
forms for ``(N, p) = (2, 1)`` are printed in the literature as functions of
``|q_1 - q_check_1|``, i.e. of half the 1-norm distance; :func:`table_expression`
evaluates them in that raw parameter and :func:`modulus_closed_form` rescales.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import xlogy

from .errors import DomainError, InputError, NonInvertibleError, UnsupportedError
from .generators import GeneratorSpec
from .proper_loss import jensen_gap_batch
from .reports import dumps, jsonable
from .simplex import PNorm, SimplexPair, as_pnorm, chord_pairs

__all__ = [
    "SearchBudget",
    "BruteForceResult",
    "ModulusPoint",
    "ModulusCurve",
    "golden_section",
    "modulus_brute_force",
    "closed_form_available",
    "table_expression",
    "modulus_closed_form",
    "modulus_closed_form_derivative",
    "modulus_curve",
    "inverse_modulus",
]

CLOSED = "closed_form"
BRUTE = "brute_force"
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchBudget:
    """Knobs of the brute-force modulus search.

    ``scan_points`` and ``tol`` drive the exact two-class scan; the remaining
    fields drive the multi-start pattern search used for ``N >= 3``.
    """

    scan_points: int = 2001
    tol: float = 1e-10
    restarts: int = 64
    seed: int = 0
    step_max: float = 1e-1
    step_min: float = 1e-7
    step_factor: float = 0.5
    max_sweeps: int = 100


@dataclass(frozen=True)
class BruteForceResult:
    omega: float
    minimizer: SimplexPair
    heuristic: bool


@dataclass(frozen=True)
class ModulusPoint:
    r: float
    omega: float
    method: str
    heuristic: bool = False
    minimizer: Optional[SimplexPair] = None


def golden_section(fun: Callable[[float], float], a: float, b: float, tol: float = 1e-10):
    """Golden-section search for a minimum of ``fun`` on ``[a, b]``.

    Returns ``(x, fun(x))`` with ``x`` located to within ``tol``.
    """
    a, b = min(a, b), max(a, b)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fun(d)
    return (c, fc) if fc <= fd else (d, fd)


# ---------------------------------------------------------------------------
# brute force


def _check_r(r: float, p: PNorm) -> float:
    r = float(r)
    if not math.isfinite(r) or r < 0 or r > p.diameter * (1 + 1e-12):
        raise DomainError(f"r={r} outside [0, {p.diameter}]")
    return min(r, p.diameter)


def _two_class_pairs(m, d):
    m = np.asarray(m, dtype=float)
    lo = np.maximum(m - 0.5 * d, 0.0)
    hi = np.minimum(m + 0.5 * d, 1.0)
    q = np.stack([hi, np.maximum(1.0 - hi, 0.0)], axis=-1)
    qc = np.stack([lo, np.maximum(1.0 - lo, 0.0)], axis=-1)
    return q, qc


def _brute_two_class(spec: GeneratorSpec, p: PNorm, r: float, budget: SearchBudget) -> BruteForceResult:
    # a pair at distance r is fixed by its midpoint m (first coordinate)
    d = r / p.diameter
    lo, hi = 0.5 * d, 1.0 - 0.5 * d
    if hi <= lo:
        grid = np.array([0.5])
    else:
        grid = np.linspace(lo, hi, budget.scan_points)
    J = jensen_gap_batch(spec, *_two_class_pairs(grid, d))
    i = int(np.argmin(J))
    best_m, best_J = float(grid[i]), float(J[i])
    if grid.size > 2:
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]

        def fun(m):
            return float(jensen_gap_batch(spec, *_two_class_pairs(m, d)))

        m_g, J_g = golden_section(fun, a, b, budget.tol)
        if J_g < best_J:
            best_m, best_J = m_g, J_g
    q, qc = _two_class_pairs(best_m, d)
    pair = SimplexPair.from_points(q, qc, p)
    return BruteForceResult(max(best_J, 0.0), pair, False)


def _pair_objective(spec, p, r, A, B):
    q, qc, ok = chord_pairs(0.5 * (A + B), A - B, r, p)
    with np.errstate(invalid="ignore"):
        J = jensen_gap_batch(spec, np.nan_to_num(q), np.nan_to_num(qc))
    return np.where(ok, J, np.inf), q, qc


def _initial_pairs(N: int, r: float, p: PNorm, budget: SearchBudget, r_index: int):
    A = np.empty((budget.restarts, N))
    B = np.empty((budget.restarts, N))
    eye = np.eye(N)
    for k in range(budget.restarts):
        rng = np.random.default_rng([budget.seed, r_index, k])
        a, b = rng.dirichlet(np.ones(N)), rng.dirichlet(np.ones(N))
        i, j = rng.choice(N, size=2, replace=False)
        # blend toward two distinct vertices until a chord of length r fits
        for lam in (1.0, 0.5, 0.25, 0.125, 0.0):
            A[k] = (1 - lam) * eye[i] + lam * a
            B[k] = (1 - lam) * eye[j] + lam * b
            if chord_pairs(0.5 * (A[k] + B[k]), A[k] - B[k], r, p)[2][0]:
                break
    return A, B


def _brute_pattern_search(spec: GeneratorSpec, p: PNorm, r: float, budget: SearchBudget,
                          r_index: int) -> BruteForceResult:
    N = spec.N
    A, B = _initial_pairs(N, r, p, budget, r_index)
    F, _, _ = _pair_objective(spec, p, r, A, B)
    moves = [(w, i, j) for w in range(3) for i in range(N) for j in range(N) if i != j]
    s = budget.step_max
    while s >= budget.step_min:
        for _ in range(budget.max_sweeps):
            moved = False
            for w, i, j in moves:
                if w == 0:
                    t = np.minimum(s, A[:, j])
                elif w == 1:
                    t = np.minimum(s, B[:, j])
                else:
                    t = np.minimum(s, np.minimum(A[:, j], B[:, j]))
                if not np.any(t > 0):
                    continue
                An, Bn = A.copy(), B.copy()
                if w != 1:
                    An[:, i] += t
                    An[:, j] -= t
                if w != 0:
                    Bn[:, i] += t
                    Bn[:, j] -= t
                Fn, _, _ = _pair_objective(spec, p, r, An, Bn)
                better = Fn < F
                if np.any(better):
                    A[better], B[better], F[better] = An[better], Bn[better], Fn[better]
                    moved = True
            if not moved:
                break
        s *= budget.step_factor
    F, Q, QC = _pair_objective(spec, p, r, A, B)
    fmin = float(np.min(F))
    best = None
    for k in np.flatnonzero(F <= fmin + 1e-12 * max(1.0, abs(fmin))):
        a, c = tuple(Q[k].tolist()), tuple(QC[k].tolist())
        cand = (a, c) if a >= c else (c, a)
        if best is None or cand < best:
            best = cand
    pair = SimplexPair.from_points(best[0], best[1], p)
    return BruteForceResult(max(fmin, 0.0), pair, True)


def modulus_brute_force(spec: GeneratorSpec, p, r: float, budget: SearchBudget | None = None,
                        r_index: int = 0) -> BruteForceResult:
    """Minimise the midpoint Jensen gap over pairs at exact p-distance ``r``.

    For ``N = 2`` the pair is determined by its midpoint, and a dense scan
    refined by golden-section search gives the exact modulus.  For ``N >= 3``
    a seeded multi-start pattern search over endpoint pairs is used and the
    result is flagged ``heuristic``; restart ``k`` at grid index ``r_index`` is
    seeded by ``(budget.seed, r_index, k)``.
    """
    p = as_pnorm(p)
    budget = budget or SearchBudget()
    r = _check_r(r, p)
    if r == 0.0:
        centre = np.full(spec.N, 1.0 / spec.N)
        return BruteForceResult(0.0, SimplexPair.from_points(centre, centre, p), spec.N > 2)
    if spec.N == 2:
        return _brute_two_class(spec, p, r, budget)
    return _brute_pattern_search(spec, p, r, budget, r_index)


# ---------------------------------------------------------------------------
# closed forms


def _norm_term(x, A, Bv, a, k):
    # value and x-derivative of ||A + Bv x||_a ** k for 2-vectors A, Bv
    x = np.asarray(x, dtype=float)
    u = [A[0] + Bv[0] * x, A[1] + Bv[1] * x]
    P = np.abs(u[0]) ** a + np.abs(u[1]) ** a
    dP = a * sum(np.abs(ui) ** (a - 1) * np.sign(ui) * bi for ui, bi in zip(u, Bv))
    val = P ** (k / a)
    with np.errstate(divide="ignore", invalid="ignore"):
        der = np.where(dP == 0, 0.0, (k / a) * P ** (k / a - 1.0) * dP)
    return val, der


def _table_terms(spec: GeneratorSpec):
    """Closed-form moduli as ``(terms, const)`` with terms ``(coef, A, B, k)``."""
    a = spec.alpha
    fam = spec.family
    if fam == "sq-alpha-norm":
        if a < 2:
            return [(0.25, (1, 1), (1, -1), 2)], -(4.0 ** (1 / a - 1))
        return [(0.5, (0, 1), (1, -1), 2), (-0.25, (0, 2), (1, -1), 2)], 0.5
    if fam == "alpha-norm":
        if a < 2:
            raise UnsupportedError("alpha-norm with 1 < alpha < 2: no closed form in general")
        return [(0.5, (0, 1), (1, -1), 1), (-0.5, (0, 2), (1, -1), 1)], 0.5
    if fam == "tsallis":
        if 2 <= a <= 3:
            return [(0.5, (0, 1), (1, -1), a), (-(2.0 ** -a), (0, 2), (1, -1), a)], 0.5
        return [(2.0 ** -a, (1, 1), (1, -1), a)], -(2.0 ** (1 - a))
    if fam == "max-power":
        if a < 2:
            return [(0.5, (-0.5, 0), (1, 0), a), (-(2.0 ** -a), (-1, 0), (1, 0), a)], 2.0 ** (-1 - a)
        return [(1.0, (0, 0), (0.5, 0), a)], 0.0
    raise UnsupportedError(f"no closed-form modulus for {spec.name}")


def _shannon_two_point(x):
    x = np.asarray(x, dtype=float)
    u, v = 0.5 * (1 + x), 0.5 * (1 - x)
    val = xlogy(u, u) + xlogy(v, v) + math.log(2.0)
    with np.errstate(divide="ignore"):
        der = 0.5 * np.log((1 + x) / np.where(x < 1, 1 - x, 0.0))
    return val, der


def table_expression(spec: GeneratorSpec, x, derivative: bool = False):
    """Two-point closed form in its printed parameter ``x = |q_1 - q_check_1|``."""
    if spec.family == "shannon":
        val, der = _shannon_two_point(x)
    else:
        terms, const = _table_terms(spec)
        val, der = const, 0.0
        for coef, A, Bv, k in terms:
            tv, td = _norm_term(x, A, Bv, spec.alpha, k)
            val = val + coef * tv
            der = der + coef * td
    out = der if derivative else val
    return float(out) if np.ndim(out) == 0 else out


def _closed_scale(spec: GeneratorSpec, p: PNorm) -> float:
    """Factor turning a p-distance ``r`` into the printed parameter ``x``."""
    if spec.family == "custom":
        raise UnsupportedError("custom generators have no closed-form modulus")
    if spec.N == 2 and not p.is_inf and p.value == 1.0:
        _table_terms(spec) if spec.family != "shannon" else None
        return 0.5
    if spec.family == "shannon" and not p.is_inf and p.value == 2.0:
        return 2.0 ** -0.5
    raise UnsupportedError(f"no closed-form modulus for {spec.name} with N={spec.N}, p={p}")


def closed_form_available(spec: GeneratorSpec, p) -> bool:
    try:
        _closed_scale(spec, as_pnorm(p))
    except UnsupportedError:
        return False
    return True


def modulus_closed_form(spec: GeneratorSpec, p, r):
    """Closed-form modulus at p-distance ``r``.

    Supported: every two-point family at ``(N, p) = (2, 1)`` (except the
    alpha-norm with ``alpha < 2``) and the Shannon generator for any ``N`` at
    ``p = 2``.

    Raises
    ------
    UnsupportedError
        For any other combination; fall back to :func:`modulus_brute_force`.
    """
    p = as_pnorm(p)
    scale = _closed_scale(spec, p)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(r_arr > p.diameter * (1 + 1e-12)):
        raise DomainError(f"r outside [0, {p.diameter}]")
    x = np.minimum(r_arr * scale, 1.0)
    return table_expression(spec, x)


def modulus_closed_form_derivative(spec: GeneratorSpec, p, r):
    """Analytic ``d omega / d r`` of the closed form (``inf`` at the Shannon endpoint)."""
    p = as_pnorm(p)
    scale = _closed_scale(spec, p)
    x = np.minimum(np.asarray(r, dtype=float) * scale, 1.0)
    out = scale * np.asarray(table_expression(spec, x, derivative=True))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# curves


@dataclass
class ModulusCurve:
    """Sampled modulus ``(r, omega)`` with per-point provenance."""

    spec: Optional[GeneratorSpec]
    p: PNorm
    points: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    name: Optional[str] = None

    def __post_init__(self):
        self.p = as_pnorm(self.p)
        r = self.r
        if r.size and (np.any(np.diff(r) <= 0) or r[0] < 0 or r[-1] > self.p.diameter * (1 + 1e-12)):
            raise InputError("curve r values must be strictly increasing in [0, 2**(1/p)]")
        if r.size and r[0] == 0 and abs(self.points[0].omega) > 1e-15:
            raise InputError("omega(0) must be 0")
        self.diagnostics = self.diagnostics or self._monotonicity_diagnostics()

    def __len__(self):
        return len(self.points)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return self.spec.name if self.spec is not None else "modulus"

    @property
    def r(self) -> np.ndarray:
        return np.array([pt.r for pt in self.points], dtype=float)

    @property
    def omega(self) -> np.ndarray:
        return np.array([pt.omega for pt in self.points], dtype=float)

    def _monotonicity_diagnostics(self) -> list:
        out = []
        w = self.omega
        for i in range(1, w.size):
            step = w[i] - w[i - 1]
            if step < -1e-12:
                out.append({"kind": "decrease", "r": self.points[i].r, "step": float(step)})
            elif step <= 0 and self.spec is not None and self.spec.strict:
                out.append({"kind": "flat", "r": self.points[i].r, "step": float(step)})
        return out

    def is_monotone(self) -> bool:
        return not any(d["kind"] == "decrease" for d in self.diagnostics)

    def is_strictly_increasing(self) -> bool:
        w = self.omega
        return bool(w.size >= 1 and np.all(np.diff(w) > 0))

    def _knots(self):
        r, w = self.r, self.omega
        if r.size == 0:
            raise InputError("empty curve")
        if r[0] > 0:
            r, w = np.concatenate([[0.0], r]), np.concatenate([[0.0], w])
        return r, w

    def interpolant(self) -> PchipInterpolator:
        r, w = self._knots()
        return PchipInterpolator(r, w, extrapolate=False)

    def __call__(self, r):
        """Monotone piecewise-cubic interpolation of omega."""
        r_arr = np.asarray(r, dtype=float)
        out = self.interpolant()(np.clip(r_arr, 0.0, self.r[-1]))
        return float(out) if np.ndim(out) == 0 else out

    def to_csv(self, agreement: Optional[Sequence[float]] = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["r", "omega", "method", "heuristic"]
        if agreement is not None:
            header.append("agreement")
        w.writerow(header)
        for i, pt in enumerate(self.points):
            row = [_fmt(pt.r), _fmt(pt.omega), pt.method, "true" if pt.heuristic else "false"]
            if agreement is not None:
                row.append(_fmt(agreement[i]))
            w.writerow(row)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return jsonable({
            "family": self.spec.family if self.spec else self.label,
            "alpha": self.spec.alpha if self.spec else None,
            "N": self.spec.N if self.spec else None,
            "p": str(self.p),
            "points": [
                {
                    "r": pt.r,
                    "omega": pt.omega,
                    "method": pt.method,
                    "heuristic": pt.heuristic,
                    "minimizer": pt.minimizer.to_dict() if pt.minimizer else None,
                }
                for pt in self.points
            ],
            "diagnostics": self.diagnostics,
        })

    def to_json(self) -> str:
        return dumps(self.to_dict())


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def modulus_curve(spec: GeneratorSpec, p, r_grid, method: str = "auto",
                  budget: SearchBudget | None = None, workers: int = 1) -> ModulusCurve:
    """Evaluate the modulus on ``r_grid``.

    ``method`` is ``"closed"``, ``"brute"`` or ``"auto"`` (closed form when
    available).  Brute-force points run independently, so ``workers > 1``
    parallelises them without changing the result.  Monotonicity violations
    are recorded in ``curve.diagnostics``, never repaired.
    """
    p = as_pnorm(p)
    r_grid = [float(r) for r in r_grid]
    if method not in ("closed", "brute", "auto"):
        raise InputError(f"unknown method {method!r}")
    use_closed = method == "closed" or (method == "auto" and closed_form_available(spec, p))
    if use_closed:
        omegas = modulus_closed_form(spec, p, np.array(r_grid)) if r_grid else []
        points = [ModulusPoint(r, float(w), CLOSED) for r, w in zip(r_grid, np.atleast_1d(omegas))]
        return ModulusCurve(spec, p, points)
    budget = budget or SearchBudget()

    def one(item):
        idx, r = item
        res = modulus_brute_force(spec, p, r, budget, r_index=idx)
        return ModulusPoint(r, res.omega, BRUTE, res.heuristic, res.minimizer)

    items = list(enumerate(r_grid))
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            points = list(ex.map(one, items))
    else:
        points = [one(it) for it in items]
    return ModulusCurve(spec, p, points)


def inverse_modulus(curve: ModulusCurve, rho, tol: float = 1e-10):
    """Largest distance allowed by ``omega(||q - q_hat||) <= rho``.

    Returns the ``r`` with ``omega(r) = rho`` on the monotone interpolant, or the
    diameter ``2**(1/p)`` when ``rho`` exceeds ``omega`` at the diameter.
    ``rho`` may be a scalar or an array.

    Raises
    ------
    NonInvertibleError
        If the curve is not strictly increasing (non-strict generator).
    """
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(np.isnan(rho_arr)) or np.any(rho_arr < 0):
        raise DomainError("rho must be >= 0")
    r, w = curve._knots()
    if not np.all(np.diff(w) > 0):
        raise NonInvertibleError(
            f"modulus of {curve.label} is not strictly increasing; the bound is vacuous"
        )
    reaches = r[-1] >= curve.p.diameter * (1 - 1e-12)
    above = rho_arr > w[-1]
    if np.any(above) and not reaches:
        raise DomainError("rho exceeds the curve range and the curve stops short of the diameter")
    f = curve.interpolant()
    target = np.where(above, w[-1], rho_arr)
    k = np.clip(np.searchsorted(w, target), 1, w.size - 1)
    lo, hi = r[k - 1].astype(float), r[k].astype(float)
    while np.any(hi - lo > tol):
        mid = 0.5 * (lo + hi)
        low = f(mid) < target
        lo = np.where(low, mid, lo)
        hi = np.where(low, hi, mid)
    out = np.where(above, curve.p.diameter, np.where(rho_arr == 0, 0.0, 0.5 * (lo + hi)))
    return float(out) if np.ndim(out) == 0 else out
