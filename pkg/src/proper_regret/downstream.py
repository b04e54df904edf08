"""Plug-in forecasters for downstream tasks and their regret bounds.

Three tasks are covered: multiclass classification under the 0-1 loss, the
same under a known label-noise matrix, and bipartite ranking for ``N = 2``.
Each task regret is bounded by a p-norm estimation error, which the modulus
of the surrogate loss converts into a surrogate-regret bound.  Labels are
0-based and ties in ``argmax`` go to the lowest index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateError, InputError, NonInvertibleError
from .generators import GeneratorSpec
from .modulus import ModulusCurve, inverse_modulus
from .proper_loss import regret_batch
from .reports import Report, dumps, jsonable
from .simplex import as_array, as_pnorm, holder_conjugate, p_norm, sample_simplex_array

__all__ = [
    "TASKS",
    "NoiseMatrix",
    "DownstreamReport",
    "plugin_label",
    "zero_one_regret",
    "zero_one_bound_check",
    "noise_correct",
    "noise_constant",
    "noisy_label_bound_check",
    "ranking_regret",
    "ranking_bound_check",
    "end_to_end_bound",
    "random_noise_matrices",
    "downstream_sweep",
]

TASKS = ("zero-one", "noisy", "ranking")
_TASK_ALIASES = {"1": "zero-one", "01": "zero-one", "zero-one": "zero-one", "classification": "zero-one",
                 "2": "noisy", "noisy": "noisy", "3": "ranking", "ranking": "ranking"}
BOUND_TOL = 1e-12
CHAIN_TOL = 1e-9
MAX_COND = 1e12


def _task(name: str) -> str:
    key = str(name).strip().lower()
    if key not in _TASK_ALIASES:
        raise InputError(f"unknown task {name!r}; expected one of {TASKS}")
    return _TASK_ALIASES[key]


class NoiseMatrix:
    """Row-stochastic label-noise matrix ``C`` with ``C[i, j] = P(noisy j | clean i)``."""

    def __init__(self, C):
        C = np.array(C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] < 2:
            raise InputError("noise matrix must be square with N >= 2")
        if not np.all(np.isfinite(C)) or C.min() < 0 or C.max() > 1:
            raise InputError("noise matrix entries must lie in [0, 1]")
        if np.any(np.abs(C.sum(axis=1) - 1.0) > 1e-12):
            raise InputError("noise matrix rows must sum to 1")
        cond = float(np.linalg.cond(C))
        if not np.isfinite(cond) or cond > MAX_COND:
            raise DegenerateError(f"noise matrix is singular (condition number {cond:.3g})")
        C.flags.writeable = False
        self.C = C
        self.condition_number = cond
        self.inverse = np.linalg.inv(C)
        self.inverse_transpose = np.linalg.inv(C.T)

    @property
    def N(self) -> int:
        return self.C.shape[0]

    def __repr__(self) -> str:
        return f"NoiseMatrix(N={self.N}, cond={self.condition_number:.3g})"


def plugin_label(q_hat) -> int:
    """``argmax`` of the estimate, lowest index on ties."""
    return int(np.argmax(as_array(q_hat)))


def zero_one_regret(q, q_hat) -> float:
    """0-1 regret ``max_y q_y - q_{y_hat}`` of the plug-in label, in ``[0, 1]``."""
    x = as_array(q)
    return float(x.max() - x[plugin_label(q_hat)])


def zero_one_bound_check(q, q_hat, p) -> Report:
    """Check ``Reg_01(q, q_hat) <= 2**(1 - 1/p) ||q - q_hat||_p``."""
    p = as_pnorm(p)
    x, xh = as_array(q), as_array(q_hat)
    lhs = zero_one_regret(x, xh)
    rhs = 2.0 ** (1.0 - p.inverse) * p_norm(x - xh, p)
    return _bound_report("zero-one", p, lhs, rhs, BOUND_TOL, x, xh)


def noise_correct(q_hat_noisy, C: NoiseMatrix) -> np.ndarray:
    """``(C^T)^{-1} q_hat``; may leave the simplex and is only used through argmax."""
    return C.inverse_transpose @ as_array(q_hat_noisy)


def noise_constant(C: NoiseMatrix, label: int, p) -> float:
    """``max_y ||C^{-1}(e_y - e_label)||_{p*}``, the per-instance Task-2 constant."""
    dual = holder_conjugate(p)
    cols = C.inverse - C.inverse[:, [label]]
    return float(np.max(p_norm(cols.T, dual)))


def noisy_label_bound_check(q, q_hat_noisy, C: NoiseMatrix, p) -> Report:
    """Check ``Reg_01(q, y_check) <= ||C^T q - q_hat||_p max_y ||C^{-1}(e_y - e_check)||_{p*}``.

    ``y_check`` is the argmax of :func:`noise_correct`.
    """
    p = as_pnorm(p)
    x, xh = as_array(q), as_array(q_hat_noisy)
    label = int(np.argmax(noise_correct(xh, C)))
    lhs = float(x.max() - x[label])
    q_tilde = C.C.T @ x
    rhs = p_norm(q_tilde - xh, p) * noise_constant(C, label, p)
    return _bound_report("noisy", p, lhs, rhs, BOUND_TOL, x, xh)


def ranking_regret(q: float, q_prime: float, q_hat: float, q_hat_prime: float) -> float:
    """Pairwise ranking regret ``|q - q'| (1{misordered} + 1{tie}/2)`` for binary scores."""
    for v in (q, q_prime, q_hat, q_hat_prime):
        if not 0.0 <= v <= 1.0:
            raise InputError("ranking scores must lie in [0, 1]")
    gap = abs(q - q_prime)
    wrong = (q_hat - q_hat_prime) * (q - q_prime) < 0
    tie = q_hat == q_hat_prime
    return gap * (float(wrong) + 0.5 * float(tie))


def ranking_bound_check(q, q_prime, q_hat, q_hat_prime) -> Report:
    """Check ``Reg_rank <= |q - q_hat| + |q' - q_hat'|``."""
    lhs = ranking_regret(q, q_prime, q_hat, q_hat_prime)
    rhs = abs(q - q_hat) + abs(q_prime - q_hat_prime)
    return _bound_report("ranking", None, lhs, rhs, BOUND_TOL, [q, q_prime], [q_hat, q_hat_prime])


def _bound_report(task, p, lhs, rhs, tol, q, q_hat, family=None, **extra) -> Report:
    return Report(
        kind=f"downstream-{task}",
        family=family,
        alpha=None,
        N=len(q),
        p=str(p) if p is not None else None,
        passed=bool(lhs <= rhs + tol),
        worst_witness={"q": np.asarray(q, dtype=float).tolist(),
                       "q_hat": np.asarray(q_hat, dtype=float).tolist(), "value": lhs},
        margin=float(rhs - lhs),
        details=dict({"task": task, "regret": lhs, "bound": rhs}, **extra),
    )


def end_to_end_bound(spec: GeneratorSpec, curve: ModulusCurve, q, q_hat, p, task: str,
                     q_prime=None, q_hat_prime=None, noise: Optional[NoiseMatrix] = None) -> Report:
    """Bound a task regret by the surrogate regret through the inverse modulus.

    ``p``-distances are bounded by ``omega^{-1}(R / 2)`` and then fed into the
    task's norm bound.  For ``task="noisy"``, ``q_hat`` estimates the noisy
    class probability ``C^T q``.  For ``task="ranking"`` all four arguments are
    points of the 2-simplex.  A non-strict surrogate yields a report with
    ``passed=None`` and ``verdict="vacuous"``.
    """
    p = as_pnorm(p)
    task = _task(task)
    x, xh = as_array(q), as_array(q_hat)
    if task == "noisy":
        if noise is None:
            raise InputError("the noisy task needs a noise matrix")
        target = noise.C.T @ x
    else:
        target = x
    R = float(regret_batch(spec, target, xh))
    pairs = [(target, xh, R)]
    if task == "ranking":
        if spec.N != 2 or q_prime is None or q_hat_prime is None:
            raise InputError("the ranking task needs N = 2 and a second instance")
        y, yh = as_array(q_prime), as_array(q_hat_prime)
        pairs.append((y, yh, float(regret_batch(spec, y, yh))))
    try:
        dists = [float(inverse_modulus(curve, 0.5 * Ri)) if np.isfinite(Ri) else p.diameter
                 for _, _, Ri in pairs]
    except NonInvertibleError as exc:
        return Report(f"end-to-end-{task}", spec.name, spec.alpha, spec.N, str(p), None, None, None,
                      {"task": task, "surrogate_regret": R, "verdict": "vacuous", "reason": str(exc)})
    if task == "zero-one":
        regret = zero_one_regret(x, xh)
        bound = 2.0 ** (1.0 - p.inverse) * dists[0]
    elif task == "noisy":
        label = int(np.argmax(noise_correct(xh, noise)))
        regret = float(x.max() - x[label])
        bound = dists[0] * noise_constant(noise, label, p)
    else:
        regret = ranking_regret(x[0], y[0], xh[0], yh[0])
        bound = (dists[0] + dists[1]) / p.diameter
    return _bound_report(task, p, regret, bound, CHAIN_TOL, x, xh, family=spec.name,
                         surrogate_regret=[Ri for _, _, Ri in pairs], distance_bound=dists,
                         verdict="ok")


@dataclass
class DownstreamReport:
    """Outcome of a downstream sweep."""

    task: str
    p: str
    family: Optional[str]
    samples: int
    violations: int
    worst_margin: float
    example_witness: Optional[dict]
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        out = {"task": self.task, "p": self.p, "family": self.family, "samples": self.samples,
               "violations": self.violations, "worst_margin": self.worst_margin,
               "example_witness": self.example_witness, "pass": self.passed}
        out.update(self.details)
        return jsonable(out)

    def to_json(self) -> str:
        return dumps(self.to_dict())


def random_noise_matrices(N: int, count: int, rng: np.random.Generator,
                          min_diag: float = 0.6) -> np.ndarray:
    """Row-stochastic matrices with diagonal ``>= min_diag``, shape ``(count, N, N)``."""
    rest = rng.dirichlet(np.ones(N), size=(count, N))
    return min_diag * np.eye(N) + (1.0 - min_diag) * rest


def _batch_zero_one(Q, Qh):
    lab = np.argmax(Qh, axis=1)
    return Q.max(axis=1) - Q[np.arange(Q.shape[0]), lab]


def _batch_noisy(Q, Qh, Cs, p):
    dual = holder_conjugate(p)
    M = Q.shape[0]
    Cinv = np.linalg.inv(Cs)
    qcheck = np.einsum("mji,mj->mi", Cinv, Qh)  # (C^T)^{-1} q_hat = C^{-T} q_hat
    lab = np.argmax(qcheck, axis=1)
    regret = Q.max(axis=1) - Q[np.arange(M), lab]
    qt = np.einsum("mij,mi->mj", Cs, Q)
    cols = Cinv - Cinv[np.arange(M), :, lab][:, :, None]
    const = np.atleast_2d(p_norm(np.swapaxes(cols, 1, 2), dual)).max(axis=-1)
    return regret, const, qt, Cinv


def downstream_sweep(task: str, p, samples: int, seed: int, N: int = 3,
                     spec: Optional[GeneratorSpec] = None, curve: Optional[ModulusCurve] = None,
                     ) -> DownstreamReport:
    """Seeded sweep of a task bound.

    Without ``spec`` the task regret is checked against its p-norm bound; with
    ``spec`` and its modulus ``curve`` the full chain through the surrogate
    regret is checked.  Ranking always uses ``N = 2``.
    """
    p = as_pnorm(p)
    task = _task(task)
    if samples < 1:
        raise InputError("samples must be >= 1")
    if spec is not None:
        if curve is None:
            raise InputError("the surrogate chain needs the modulus curve of spec")
        N = spec.N
    if task == "ranking":
        N = 2
    rng = np.random.default_rng(seed)
    details: dict = {}
    Q = sample_simplex_array(N, samples, int(rng.integers(2**63)))
    Qh = sample_simplex_array(N, samples, int(rng.integers(2**63)))
    if task == "ranking":
        Q2 = sample_simplex_array(N, samples, int(rng.integers(2**63)))
        Qh2 = sample_simplex_array(N, samples, int(rng.integers(2**63)))
        # exercise the tie term on a tenth of the samples
        tie = rng.random(samples) < 0.1
        Qh2[tie] = Qh[tie]
        s, t, sh, th = Q[:, 0], Q2[:, 0], Qh[:, 0], Qh2[:, 0]
        regret = np.abs(s - t) * (((sh - th) * (s - t) < 0) + 0.5 * (sh == th))
        if spec is None:
            bound = np.abs(s - sh) + np.abs(t - th)
        else:
            R1, R2 = regret_batch(spec, Q, Qh), regret_batch(spec, Q2, Qh2)
            d1 = _inverse_or_diameter(curve, R1, p)
            d2 = _inverse_or_diameter(curve, R2, p)
            bound = (d1 + d2) / p.diameter
        wit = lambda k: {"q": [Q[k].tolist(), Q2[k].tolist()], "q_hat": [Qh[k].tolist(), Qh2[k].tolist()]}
    elif task == "zero-one":
        regret = _batch_zero_one(Q, Qh)
        if spec is None:
            bound = 2.0 ** (1.0 - p.inverse) * np.atleast_1d(p_norm(Q - Qh, p))
        else:
            bound = 2.0 ** (1.0 - p.inverse) * _inverse_or_diameter(curve, regret_batch(spec, Q, Qh), p)
        wit = lambda k: {"q": Q[k].tolist(), "q_hat": Qh[k].tolist()}
    else:
        Cs = random_noise_matrices(N, samples, rng)
        # noisy estimates scattered around the true noisy posterior C^T q
        Qt = np.einsum("mij,mi->mj", Cs, Q)
        mix = rng.random((samples, 1))
        Qh = mix * Qt + (1 - mix) * Qh
        regret, const, Qt, Cinv = _batch_noisy(Q, Qh, Cs, p)
        if spec is None:
            dist = np.atleast_1d(p_norm(Qt - Qh, p))
        else:
            dist = _inverse_or_diameter(curve, regret_batch(spec, Qt, Qh), p)
        bound = dist * const
        conds = np.linalg.cond(Cs)
        ok = conds < 1e3
        back = np.einsum("mji,mj->mi", Cinv, Qt)
        rt = np.abs(back - Q).max(axis=1)
        details.update(roundtrip_checked=int(ok.sum()),
                       roundtrip_max_error=float(rt[ok].max()) if np.any(ok) else 0.0,
                       max_condition_number=float(conds.max()))
        wit = lambda k: {"q": Q[k].tolist(), "q_hat": Qh[k].tolist(), "C": Cs[k].tolist()}
    tol = BOUND_TOL if spec is None else CHAIN_TOL
    margin = bound - regret
    bad = margin < -tol
    k = int(np.argmin(margin))
    example = dict(wit(k), regret=float(regret[k]), bound=float(bound[k]))
    violations = int(bad.sum())
    if details.get("roundtrip_max_error", 0.0) > 1e-10:
        details["roundtrip_failed"] = True
        violations += 1
    return DownstreamReport(task, str(p), spec.name if spec else None, samples,
                            violations, float(margin[k]), example, details)


def _inverse_or_diameter(curve: ModulusCurve, R: np.ndarray, p) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    finite = np.isfinite(R)
    out = np.full(R.shape, as_pnorm(p).diameter)
    if np.any(finite):
        out[finite] = inverse_modulus(curve, 0.5 * R[finite])
    return out
