import math

import numpy as np
import pytest

from proper_regret.errors import DegenerateError, DomainError, InputError
from proper_regret.generators import make_generator
from proper_regret.modulus import modulus_curve
from proper_regret.order import (
    CounterexampleOmega,
    ModulusFunction,
    OrderConfig,
    counterexample_check,
    counterexample_profile,
    dini_left_derivative,
    local_modulus,
    modulus_function,
    order_barrier_check,
    order_profile,
    power_sandwich_check,
    simonenko_order,
)
from proper_regret.proper_loss import jensen_gap_batch
from proper_regret.simplex import p_norm, sample_simplex_array

SMOOTH = [("shannon", None), ("brier", None), ("tsallis", 1.5), ("tsallis", 2.5), ("sq-alpha-norm", 1.5)]


def power(c, a):
    return ModulusFunction(lambda r: c * np.asarray(r, dtype=float) ** a,
                           lambda r: c * a * np.asarray(r, dtype=float) ** (a - 1), (0.0, 2.0), f"r^{a}")


def small_grid(top=2.0, n=120):
    return np.geomspace(1e-3, top, n)


def test_dini_examples():
    brier = power(1 / 8, 2)
    assert dini_left_derivative(brier, 1.0) == 0.25
    np.testing.assert_allclose(dini_left_derivative(brier, 1.0, analytic=False), 0.25, rtol=1e-4)
    mp3 = power(1 / 64, 3)
    np.testing.assert_allclose(dini_left_derivative(mp3, 1.0), 3 / 64)
    np.testing.assert_allclose(dini_left_derivative(mp3, 1.0, analytic=False), 3 / 64, rtol=1e-4)
    assert dini_left_derivative(lambda r: r, 0.7) == pytest.approx(1.0, rel=1e-8)


def test_dini_explicit_schedule_and_limsup():
    # a kink at 1: the left slope is 1 and the right slope 3
    kink = ModulusFunction(lambda r: np.where(np.asarray(r) <= 1, r, 1 + 3 * (np.asarray(r) - 1)))
    assert dini_left_derivative(kink, 1.0, [1e-2, 1e-3, 1e-4]) == pytest.approx(1.0)
    with pytest.raises(InputError):
        dini_left_derivative(kink, 1.0, [1e-3, 1e-2])
    with pytest.raises(InputError):
        dini_left_derivative(kink, 1.0, [])
    with pytest.raises(DomainError):
        dini_left_derivative(power(1, 2), 0.001, [1e-2], analytic=False)


@pytest.mark.parametrize("a", [1.5, 2.0, 3.0, 4.5])
def test_sigma_of_powers(a):
    f = power(0.3, a)
    for r in (0.01, 0.3, 1.7):
        np.testing.assert_allclose(simonenko_order(f, r), a, atol=1e-9)
        np.testing.assert_allclose(simonenko_order(f, r, analytic=False), a, atol=1e-4 * a)


def test_sigma_of_families():
    brier = make_generator("brier")
    mp3 = make_generator("max-power", 3)
    for r in (0.05, 0.5, 1.5):
        np.testing.assert_allclose(simonenko_order(modulus_function(brier, 1), r), 2.0, atol=1e-9)
        np.testing.assert_allclose(simonenko_order(modulus_function(mp3, 1), r), 3.0, atol=1e-9)
    sh = modulus_function(make_generator("shannon"), 1)
    np.testing.assert_allclose(simonenko_order(sh, 0.01), 2.0, atol=1e-3)


def test_sigma_degenerate():
    with pytest.raises(DegenerateError):
        simonenko_order(lambda r: 0.0 * r, 0.5)


@pytest.mark.parametrize("fa", SMOOTH, ids=lambda fa: f"{fa[0]}-{fa[1]}")
def test_dini_finite_difference_matches_analytic(fa):
    func = modulus_function(make_generator(*fa), 1)
    for r in np.geomspace(0.01, 1.9, 25):
        np.testing.assert_allclose(dini_left_derivative(func, r, analytic=False),
                                   dini_left_derivative(func, r), rtol=1e-4)


def test_dini_on_curve():
    curve = modulus_curve(make_generator("brier"), 1, np.linspace(0, 2, 401), method="closed")
    np.testing.assert_allclose(dini_left_derivative(curve, 1.0), 0.25, rtol=1e-4)


def test_brier_profile():
    prof = order_profile(make_generator("brier"), 1, small_grid())
    np.testing.assert_allclose(prof.K, 1.0, rtol=1e-8)
    np.testing.assert_allclose(prof.sigma, 2.0, atol=1e-9)
    assert prof.kappa_estimate == pytest.approx(1.0)
    np.testing.assert_allclose(prof.K, local_modulus(prof.omega, prof.r))


def test_shannon_profile():
    prof = order_profile(make_generator("shannon"), 1, small_grid())
    np.testing.assert_allclose(prof.kappa_estimate, 1.0, atol=1e-5)
    np.testing.assert_allclose(prof.K[-1], 2 * math.log(2), rtol=1e-12)
    assert np.all(prof.K >= prof.kappa_estimate)
    assert np.all(prof.sigma[prof.omega > 0] >= 0)
    rep = order_barrier_check(prof)
    assert rep.passed and rep.details["C1"] and rep.details["C2"]
    assert rep.details["estimate"] == "liminf"


def test_alpha_norm_four_kappa_vanishes():
    prof = order_profile(make_generator("alpha-norm", 4), 1, small_grid())
    assert prof.kappa_estimate < 1e-2
    rep = order_barrier_check(prof)
    assert not rep.details["C1"]


def test_profile_errors():
    with pytest.raises(InputError):
        order_profile(make_generator("max-power", 1.5, N=3), 1, small_grid())
    with pytest.raises(InputError):
        order_profile(make_generator("brier"), 1, [0.0, 0.5])
    with pytest.raises(DomainError):
        order_profile(make_generator("brier"), 2, [0.5, 1.5])


def test_profile_serialisation():
    prof = order_profile(make_generator("brier"), 1, small_grid(n=20))
    lines = prof.to_csv().splitlines()
    assert lines[0] == "r,omega,sigma,K" and len(lines) == 21
    s = prof.summary()
    assert set(s) >= {"kappa", "limsup_sigma", "liminf_sigma", "C1", "C2", "pass"}
    assert s["pass"] is True


def test_power_sandwich_examples():
    grid = np.geomspace(1e-3, 2.0, 100)
    grid = np.sort(np.append(grid, 1.0))
    for fa, a in ((("brier", None), 2.0), (("max-power", 3), 3.0)):
        rep = power_sandwich_check(order_profile(make_generator(*fa), 1, grid), 1.0)
        assert rep.passed
        np.testing.assert_allclose([rep.details["s"], rep.details["S"]], a, atol=1e-9)
    rep = power_sandwich_check(order_profile(make_generator("shannon"), 1, grid), 1.0)
    assert rep.passed
    np.testing.assert_allclose(rep.details["s"], 2.0, atol=1e-3)
    np.testing.assert_allclose(rep.details["S"], 2.0996, atol=1e-3)
    with pytest.raises(DomainError):
        power_sandwich_check(order_profile(make_generator("brier"), 1, grid), 0.777)


@pytest.mark.parametrize("fa", SMOOTH, ids=lambda fa: f"{fa[0]}-{fa[1]}")
def test_barrier_smooth_families(fa):
    rep = order_barrier_check(order_profile(make_generator(*fa), 1, small_grid()))
    assert rep.passed


def test_barrier_max_power():
    rep = order_barrier_check(order_profile(make_generator("max-power", 3), 1, small_grid()))
    assert rep.passed
    assert rep.details["limsup_sigma"] == pytest.approx(3.0)


def test_barrier_inconclusive_on_coarse_grid():
    rep = order_barrier_check(order_profile(make_generator("brier"), 1, np.linspace(0.1, 2, 20)))
    assert rep.passed is None


def test_kappa_lower_bounds(rng):
    for fa, p, kappa in ((("shannon", None), 1, 1.0), (("brier", None), 2, 2.0)):
        spec = make_generator(*fa, N=3)
        Q = sample_simplex_array(3, 1000, 7)
        Qc = sample_simplex_array(3, 1000, 8)
        J = jensen_gap_batch(spec, Q, Qc)
        assert np.all(J >= kappa / 8 * p_norm(Q - Qc, p) ** 2 - 1e-9)
    func = modulus_function(make_generator("shannon"), 1)
    r = np.geomspace(1e-3, 2, 50)
    assert np.all(np.array([dini_left_derivative(func, x) for x in r]) >= r / 4 - 1e-6)


@pytest.mark.parametrize("fa", SMOOTH, ids=lambda fa: f"{fa[0]}-{fa[1]}")
def test_K_left_continuity(fa):
    func = modulus_function(make_generator(*fa), 1)
    for r in (0.05, 0.5, 1.5):
        K = local_modulus(func(r), r)
        taus = np.array([1e-2, 1e-3, 1e-4, 1e-5])
        gaps = np.abs([local_modulus(func((1 - t) * r), (1 - t) * r) - K for t in taus])
        assert np.all(np.diff(gaps) <= 1e-12)
        assert gaps[-1] < 1e-3


def test_counterexample():
    omega = CounterexampleOmega()
    assert omega(0.0) == 0.0
    r = np.geomspace(1e-3, 1.0, 200)
    assert np.all(omega.derivative(r) >= 0)
    h = 1e-7
    x = np.geomspace(0.05, 1.0, 20)
    np.testing.assert_allclose((omega(x + h) - omega(x - h)) / (2 * h), omega.derivative(x), rtol=1e-5)
    prof = counterexample_profile(r)
    rep = counterexample_check(prof)
    assert rep.passed
    assert rep.details["max_sigma_small_r"] >= 1.95
    assert rep.details["max_omega_over_r"] < 3.0
    with pytest.raises(DomainError):
        counterexample_profile([1e-5, 0.5])
