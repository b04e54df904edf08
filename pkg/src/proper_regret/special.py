"""Special functions not worth a dependency beyond numpy."""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

__all__ = ["cosine_integral"]

_EULER_GAMMA = 0.57721566490153286061
_EPS = 1e-16
_SERIES_MAX = 2.0
_MAXIT = 10_000


def _ci_series(z: float) -> float:
    # Ci(z) = gamma + ln z + sum_k (-1)^k z^(2k) / (2k (2k)!)
    z2 = z * z
    term, total, k = 1.0, 0.0, 1
    while True:
        term *= -z2 / ((2 * k - 1) * (2 * k))
        add = term / (2 * k)
        total += add
        if abs(add) < _EPS * max(abs(total), 1e-300):
            break
        k += 1
    return _EULER_GAMMA + math.log(z) + total


def _ci_continued_fraction(z: float) -> float:
    # modified Lentz on the continued fraction of E1(iz); Ci(z) = -Re E1(iz)
    tiny = 1e-300
    b = complex(1.0, z)
    c = 1.0 / tiny
    d = h = 1.0 / b
    for i in range(1, _MAXIT):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta.real - 1.0) + abs(delta.imag) < _EPS:
            break
    h *= complex(math.cos(z), -math.sin(z))
    return -h.real


def _ci_scalar(z: float) -> float:
    if not z > 0 or not math.isfinite(z):
        if z == math.inf:
            return 0.0
        raise DomainError(f"cosine integral needs z > 0, got {z}")
    if z <= _SERIES_MAX:
        return _ci_series(z)
    return _ci_continued_fraction(z)


def cosine_integral(z):
    """Cosine integral ``Ci(z) = -int_z^inf cos(t)/t dt`` for ``z > 0``.

    Uses the power series for ``z <= 2`` and a continued fraction for the
    exponential integral ``E1(iz)`` beyond; both are accurate to about 1e-15.
    Accepts scalars or arrays.
    """
    if np.ndim(z) == 0:
        return _ci_scalar(float(z))
    arr = np.asarray(z, dtype=float)
    return np.array([_ci_scalar(x) for x in arr.ravel()]).reshape(arr.shape)
