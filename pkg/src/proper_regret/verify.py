"""Seeded verification sweeps that combine losses, regrets and moduli."""
from __future__ import annotations

import numpy as np

from .generators import GeneratorSpec, affine_shift, extended_dot
from .modulus import ModulusCurve, SearchBudget, modulus_curve
from .proper_loss import loss_values, regret_batch, jensen_gap_batch
from .reports import Report, witness
from .simplex import as_pnorm, p_norm, sample_simplex_array

__all__ = [
    "default_curve",
    "regret_bound_sweep",
    "savage_identity_sweep",
    "affine_invariance_sweep",
]

REGRET_TOL = 1e-9
SAVAGE_TOL = 1e-9
AFFINE_TOL = 1e-10


def default_curve(spec: GeneratorSpec, p, points: int = 201, method: str = "brute",
                  budget: SearchBudget | None = None, workers: int = 1) -> ModulusCurve:
    """Modulus curve on an even grid of ``[0, 2**(1/p)]``."""
    p = as_pnorm(p)
    return modulus_curve(spec, p, np.linspace(0.0, p.diameter, points), method, budget, workers)


def regret_bound_sweep(spec: GeneratorSpec, p, samples: int, seed: int,
                       curve: ModulusCurve | None = None) -> Report:
    """Check ``omega(||q - q_hat||_p) <= R(q, q_hat) / 2`` on random pairs.

    ``omega`` is the monotone interpolant of ``curve`` (by default the
    brute-force curve on 201 points).  Pairs with ``R = inf`` pass trivially.
    """
    p = as_pnorm(p)
    curve = curve or default_curve(spec, p)
    Q = sample_simplex_array(spec.N, samples, seed)
    Qh = sample_simplex_array(spec.N, samples, seed + 1)
    # include the equality case q = q_hat
    Qh[0] = Q[0]
    R = regret_batch(spec, Q, Qh)
    d = np.minimum(np.atleast_1d(p_norm(Q - Qh, p)), curve.r[-1])
    lhs = np.asarray(curve(d), dtype=float)
    margin = np.where(np.isfinite(R), 0.5 * R - lhs, np.inf)
    k = int(np.argmin(margin))
    viol = int(np.sum(margin < -REGRET_TOL))
    return Report("regret-bound", spec.name, spec.alpha, spec.N, str(p), viol == 0,
                  witness(Q[k], Qh[k], lhs[k]), float(margin[k]),
                  {"samples": samples, "seed": seed, "violations": viol,
                   "equality_case_margin": float(margin[0]),
                   "min_margin_distinct": float(margin[1:].min()) if samples > 1 else None,
                   "curve_points": len(curve)})


def savage_identity_sweep(spec: GeneratorSpec, samples: int, seed: int) -> Report:
    """Check the Savage risk identity and ``L(q, q_hat) - L(q, q) = R(q, q_hat)``.

    Both sides of ``sum_y q_y l_y(q_hat) = -f(q_hat) - <v_hat, q - q_hat>`` are
    compared to ``1e-9`` relative, with some estimates placed on the boundary.
    """
    Q = sample_simplex_array(spec.N, samples, seed)
    Qh = sample_simplex_array(spec.N, samples, seed + 1)
    # boundary estimates, with q sharing their support so every risk is finite
    nb = max(samples // 10, 1)
    Qh[:nb, 0] = 0.0
    Qh[:nb] /= Qh[:nb].sum(axis=1, keepdims=True)
    Q[:nb, 0] = 0.0
    Q[:nb] /= Q[:nb].sum(axis=1, keepdims=True)
    risk = extended_dot(loss_values(spec, Qh), Q)
    vh = spec.gradient(Qh)
    rhs = -spec.value(Qh) - extended_dot(vh, Q - Qh)
    bayes = extended_dot(loss_values(spec, Q), Q)
    R = regret_batch(spec, Q, Qh)
    scale = 1.0 + np.abs(risk)
    e1 = np.abs(risk - rhs) / scale
    e2 = np.abs((risk - bayes) - R) / scale
    e3 = np.abs(bayes + spec.value(Q)) / (1.0 + np.abs(bayes))
    err = np.maximum(np.maximum(e1, e2), e3)
    err = np.where(np.isnan(err), np.inf, err)
    k = int(np.argmax(err))
    viol = int(np.sum(err > SAVAGE_TOL))
    return Report("savage", spec.name, spec.alpha, spec.N, None, viol == 0,
                  witness(Q[k], Qh[k], err[k]), float(SAVAGE_TOL - err[k]),
                  {"samples": samples, "seed": seed, "violations": viol,
                   "max_identity_error": float(e1.max()), "max_regret_error": float(e2.max()),
                   "max_bayes_error": float(e3.max())})


def affine_invariance_sweep(spec: GeneratorSpec, samples: int, seed: int) -> Report:
    """Jensen gaps and regrets of ``f`` and ``f + <u, .> + lam`` agree to ``1e-10``.

    ``u`` and ``lam`` are drawn from the seed.
    """
    rng = np.random.default_rng(seed)
    u = rng.normal(size=spec.N)
    lam = float(rng.normal())
    g = affine_shift(spec, u, lam)
    Q = sample_simplex_array(spec.N, samples, seed + 1)
    Qc = sample_simplex_array(spec.N, samples, seed + 2)
    dj = np.abs(jensen_gap_batch(spec, Q, Qc) - jensen_gap_batch(g, Q, Qc))
    dr = np.abs(regret_batch(spec, Q, Qc) - regret_batch(g, Q, Qc))
    err = np.maximum(dj, dr)
    k = int(np.argmax(err))
    viol = int(np.sum(err > AFFINE_TOL))
    return Report("affine", spec.name, spec.alpha, spec.N, None, viol == 0,
                  witness(Q[k], Qc[k], err[k]), float(AFFINE_TOL - err[k]),
                  {"samples": samples, "seed": seed, "violations": viol, "u": u, "lam": lam,
                   "max_jensen_difference": float(dj.max()), "max_regret_difference": float(dr.max())})
