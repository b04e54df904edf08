"""Proper losses built from convex generators, their risks and regrets.

A generator ``f`` with selector ``v`` defines the loss
``l_y(q_hat) = -f(q_hat) - v_y(q_hat) + <v(q_hat), q_hat>``; the surrogate
regret of that loss is the Bregman divergence of ``f``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .generators import GeneratorSpec, extended_dot
from .reports import Report, witness
from .simplex import as_array, sample_simplex_array, simplex_grid_array

__all__ = [
    "LossEval",
    "savage_loss",
    "loss_values",
    "conditional_risk",
    "savage_risk",
    "bayes_risk",
    "surrogate_regret",
    "regret_batch",
    "jensen_gap",
    "jensen_gap_batch",
    "properness_certificate",
    "strong_properness_test",
]

PROPER_TOL = 1e-9
_CLAMP = 1e-12


@dataclass(frozen=True)
class LossEval:
    """Per-label loss values at an estimate; ``+inf`` only off its support."""

    values: np.ndarray
    support: frozenset

    def __post_init__(self):
        bad = [y for y in np.flatnonzero(np.isposinf(self.values)) if int(y) in self.support]
        if bad:
            raise InputError(f"loss is +inf on supported labels {bad}: not regular")

    def __getitem__(self, y):
        return self.values[y]

    def __len__(self):
        return self.values.size


def loss_values(spec: GeneratorSpec, Qhat) -> np.ndarray:
    """Batched Savage loss, shape ``(..., N)``."""
    Qhat = np.asarray(Qhat, dtype=float)
    v = spec.gradient(Qhat)
    inner = extended_dot(v, Qhat)
    with np.errstate(invalid="ignore"):
        out = (-spec.value(Qhat) + inner)[..., None] - v
    return out


def savage_loss(spec: GeneratorSpec, q_hat) -> LossEval:
    """Loss vector of the proper loss generated by ``spec`` at the estimate ``q_hat``."""
    x = as_array(q_hat)
    vals = loss_values(spec, x)
    vals.flags.writeable = False
    return LossEval(vals, frozenset(int(i) for i in np.flatnonzero(x > 0)))


def conditional_risk(spec: GeneratorSpec, q, q_hat) -> float:
    """``sum_y q_y l_y(q_hat)`` with ``0 * inf = 0``."""
    x, xh = as_array(q), as_array(q_hat)
    return float(extended_dot(loss_values(spec, xh), x))


def savage_risk(spec: GeneratorSpec, q, q_hat) -> float:
    """Right-hand side ``-f(q_hat) - <v_hat, q - q_hat>`` of the Savage identity."""
    x, xh = as_array(q), as_array(q_hat)
    return float(-spec.value(xh) - extended_dot(spec.gradient(xh), x - xh))


def bayes_risk(spec: GeneratorSpec, q) -> float:
    """Conditional Bayes risk, the negated generator."""
    return -float(spec.value(as_array(q)))


def regret_batch(spec: GeneratorSpec, Q, Qhat) -> np.ndarray:
    """Bregman divergences ``f(q) - f(q_hat) - <v_hat, q - q_hat>`` row by row."""
    Q = np.asarray(Q, dtype=float)
    Qhat = np.asarray(Qhat, dtype=float)
    if spec.family in ("sq-alpha-norm", "tsallis") and spec.alpha == 2.0:
        # f = ||q||_2^2: the divergence is exactly ||q - q_hat||^2, free of cancellation
        return ((Q - Qhat) ** 2).sum(axis=-1)
    lin = extended_dot(spec.gradient(Qhat), Q - Qhat)
    with np.errstate(invalid="ignore"):
        R = spec.value(Q) - spec.value(Qhat) - lin
    return np.where((R < 0) & (R > -_CLAMP), 0.0, R)


def surrogate_regret(spec: GeneratorSpec, q, q_hat) -> float:
    """Surrogate regret ``L(q, q_hat) - Bayes(q)`` in ``[0, inf]``."""
    return float(regret_batch(spec, as_array(q), as_array(q_hat)))


def jensen_gap_batch(spec: GeneratorSpec, Q, Qc) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    Qc = np.asarray(Qc, dtype=float)
    J = 0.5 * (spec.value(Q) + spec.value(Qc)) - spec.value(0.5 * (Q + Qc))
    return np.where((J < 0) & (J > -_CLAMP), 0.0, J)


def jensen_gap(spec: GeneratorSpec, q, q_check) -> float:
    """Midpoint Jensen gap ``(f(q) + f(q_check))/2 - f((q + q_check)/2)``."""
    return float(jensen_gap_batch(spec, as_array(q), as_array(q_check)))


def _risk_matrix(spec: GeneratorSpec, Q: np.ndarray, Qhat: np.ndarray) -> np.ndarray:
    # risk[i, j] = L(Q_i, Qhat_j)
    loss = loss_values(spec, Qhat)
    return extended_dot(loss[None, :, :], Q[:, None, :])


def properness_certificate(spec: GeneratorSpec, resolution: int) -> Report:
    """Certify properness on the lattice of the given resolution.

    For every grid point ``q`` the conditional risk ``L(q, .)`` over the grid
    must be minimised at ``q_hat = q`` (to ``1e-9``).  The gap to the second
    best grid estimate is reported per point (``details['margins']``); it is
    positive everywhere for a strictly proper loss but is not thresholded.
    """
    if resolution < 10:
        raise InputError("properness_certificate needs resolution >= 10")
    G = simplex_grid_array(spec.N, resolution)
    M = G.shape[0]
    L = _risk_matrix(spec, G, G)
    own = np.diag(L).copy()
    with np.errstate(invalid="ignore"):
        excess = L - own[:, None]
    excess = np.where(np.isnan(excess), -np.inf, excess)
    worst_j = np.argmin(excess, axis=1)
    worst_val = excess[np.arange(M), worst_j]
    i = int(np.argmin(worst_val))
    violation = -float(worst_val[i])
    off = excess.copy()
    off[np.arange(M), np.arange(M)] = np.inf
    margins = off.min(axis=1)
    passed = bool(violation <= PROPER_TOL)
    return Report(
        kind="properness",
        family=spec.name,
        alpha=spec.alpha,
        N=spec.N,
        p=None,
        passed=passed,
        worst_witness=witness(G[i], G[worst_j[i]], -violation),
        margin=float(margins.min()),
        details={
            "resolution": resolution,
            "grid_points": M,
            "strict": bool(np.all(margins > 0)) and passed,
            "margins": margins,
        },
    )


def strong_properness_test(spec: GeneratorSpec, kappa: float, samples: int, seed: int) -> Report:
    """Empirical check of ``R(q, q_hat) >= (kappa/2) ||q - q_hat||_2^2``.

    Pairs with infinite regret or zero distance are skipped.  Also counts
    violations of the derived bound ``||q - q_hat||_2 <= sqrt(2 R / kappa)``.
    """
    if samples < 1:
        raise InputError("samples must be >= 1")
    if kappa <= 0:
        raise InputError("kappa must be positive")
    Q = sample_simplex_array(spec.N, samples, seed)
    Qh = sample_simplex_array(spec.N, samples, seed + 1)
    R = regret_batch(spec, Q, Qh)
    # squared distance summed directly, so quadratic generators give exact ratios
    sq = ((Q - Qh) ** 2).sum(axis=-1)
    d2 = np.sqrt(sq)
    use = np.isfinite(R) & (sq > 0)
    ratio = np.full(samples, np.inf)
    ratio[use] = R[use] / (0.5 * sq[use])
    k = int(np.argmin(ratio))
    min_ratio = float(ratio[k])
    chain = d2[use] - np.sqrt(2.0 * R[use] / kappa)
    return Report(
        kind="strong-properness",
        family=spec.name,
        alpha=spec.alpha,
        N=spec.N,
        p="2",
        passed=bool(min_ratio >= kappa - PROPER_TOL),
        worst_witness=witness(Q[k], Qh[k], min_ratio),
        margin=min_ratio - kappa,
        details={
            "kappa": kappa,
            "samples": samples,
            "seed": seed,
            "min_ratio": min_ratio,
            "used_pairs": int(use.sum()),
            "chain_violations": int(np.sum(chain > 1e-9)),
        },
    )
