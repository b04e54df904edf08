import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from conftest import ALL_FAMILIES, family_id
from proper_regret.errors import DomainError, InputError, NonInvertibleError, UnsupportedError
from proper_regret.generators import make_generator
from proper_regret.modulus import (
    BRUTE,
    CLOSED,
    ModulusCurve,
    ModulusPoint,
    SearchBudget,
    closed_form_available,
    golden_section,
    inverse_modulus,
    modulus_brute_force,
    modulus_closed_form,
    modulus_closed_form_derivative,
    modulus_curve,
)
from proper_regret.proper_loss import jensen_gap

LN2 = math.log(2)
CLOSED_FAMILIES = [fa for fa in ALL_FAMILIES if not (fa[0] == "alpha-norm" and fa[1] < 2)]


def scan_oracle(spec, r):
    # independent two-class oracle: bounded scalar minimisation over the midpoint
    h = r / 4

    def J(m):
        return jensen_gap(spec, [m + h, 1 - m - h], [m - h, 1 - m + h])

    if 1 - h <= h:
        return J(0.5)
    res = minimize_scalar(J, bounds=(h, 1 - h), method="bounded", options={"xatol": 1e-12})
    return min(res.fun, J(0.5), J(h), J(1 - h))


def test_golden_section():
    x, fx = golden_section(lambda t: (t - 0.3) ** 2, 0.0, 1.0)
    assert abs(x - 0.3) < 1e-9 and fx < 1e-18


def test_brute_force_examples(shannon, brier):
    res = modulus_brute_force(shannon, 1, 1.0)
    np.testing.assert_allclose(res.omega, 0.130812, atol=1e-6)
    pair = sorted([res.minimizer.q.tolist(), res.minimizer.q_check.tolist()])
    np.testing.assert_allclose(pair, [[0.25, 0.75], [0.75, 0.25]], atol=1e-6)
    assert not res.heuristic
    assert modulus_brute_force(shannon, 1, 0.0).omega == 0.0
    res = modulus_brute_force(shannon, 1, 2.0)
    np.testing.assert_allclose(res.omega, LN2, rtol=1e-14)
    assert sorted([res.minimizer.q.tolist(), res.minimizer.q_check.tolist()]) == [[0, 1], [1, 0]]
    for r in (0.1, 0.7, 1.3, 2.0):
        np.testing.assert_allclose(modulus_brute_force(brier, 1, r).omega, r * r / 8, atol=1e-12)


def test_brute_force_domain(shannon):
    with pytest.raises(DomainError):
        modulus_brute_force(shannon, 1, 2.1)
    with pytest.raises(DomainError):
        modulus_brute_force(shannon, 2, 1.5)
    with pytest.raises(DomainError):
        modulus_brute_force(shannon, 1, -0.1)


def test_minimizer_at_exact_distance(shannon):
    spec = make_generator("tsallis", 1.5, N=3)
    for p in (1, 2, "inf"):
        res = modulus_brute_force(spec, p, 0.5, SearchBudget(restarts=8))
        assert res.heuristic
        np.testing.assert_allclose(res.minimizer.distance, 0.5, atol=1e-12)
        np.testing.assert_allclose(jensen_gap(spec, res.minimizer.q, res.minimizer.q_check), res.omega,
                                   atol=1e-15)


def test_closed_form_examples(shannon, brier):
    np.testing.assert_allclose(modulus_closed_form(shannon, 1, 2.0), LN2, rtol=1e-15)
    np.testing.assert_allclose(modulus_closed_form(brier, 1, 1.0), 0.125, rtol=1e-14)
    mp3 = make_generator("max-power", 3)
    np.testing.assert_allclose(modulus_closed_form(mp3, 1, [0.4, 1.0, 2.0]),
                               (np.array([0.4, 1.0, 2.0]) / 4) ** 3, rtol=1e-13)
    sh3 = make_generator("shannon", N=3)
    np.testing.assert_allclose(modulus_closed_form(sh3, 2, math.sqrt(2)), LN2, rtol=1e-14)
    assert modulus_closed_form(shannon, 1, 0.0) == 0.0


def test_closed_form_unsupported(shannon):
    with pytest.raises(UnsupportedError, match="no closed form in general"):
        modulus_closed_form(make_generator("alpha-norm", 1.5), 1, 0.5)
    with pytest.raises(UnsupportedError):
        modulus_closed_form(make_generator("brier", N=3), 1, 0.5)
    with pytest.raises(UnsupportedError):
        modulus_closed_form(shannon, "inf", 0.5)
    with pytest.raises(UnsupportedError):
        modulus_closed_form(make_generator("brier"), 2, 0.5)
    # Shannon at p = 2 has a closed form for every N, including N = 2
    r = np.linspace(0.1, math.sqrt(2), 8)
    brute = [modulus_brute_force(shannon, 2, x).omega for x in r]
    np.testing.assert_allclose(modulus_closed_form(shannon, 2, r), brute, atol=1e-9)
    assert closed_form_available(shannon, 1)
    assert not closed_form_available(make_generator("alpha-norm", 1.5), 1)


@pytest.mark.parametrize("fa", CLOSED_FAMILIES, ids=family_id)
def test_closed_form_matches_oracles(fa):
    spec = make_generator(*fa)
    r = np.linspace(0.05, 2.0, 40)
    closed = modulus_closed_form(spec, 1, r)
    brute = np.array([modulus_brute_force(spec, 1, x).omega for x in r])
    oracle = np.array([scan_oracle(spec, x) for x in r])
    np.testing.assert_allclose(closed, brute, atol=1e-6, rtol=0)
    np.testing.assert_allclose(closed, oracle, atol=1e-6, rtol=0)


@pytest.mark.parametrize("fa", [("shannon", None), ("brier", None), ("tsallis", 1.5), ("max-power", 3)],
                         ids=family_id)
def test_closed_form_derivative(fa):
    spec = make_generator(*fa)
    r = np.linspace(0.05, 1.9, 15)
    h = 1e-6
    fd = (modulus_closed_form(spec, 1, r + h) - modulus_closed_form(spec, 1, r - h)) / (2 * h)
    np.testing.assert_allclose(modulus_closed_form_derivative(spec, 1, r), fd, rtol=1e-6, atol=1e-10)


def test_unrescaled_table_disagrees(brier):
    # evaluating the printed expression at r rather than r/2 gives 4x the modulus
    r = np.linspace(0.1, 1.0, 5)
    np.testing.assert_allclose(modulus_closed_form(brier, 1, 2 * r), 4 * modulus_closed_form(brier, 1, r))
    brute = np.array([modulus_brute_force(brier, 1, x).omega for x in r])
    assert np.all(modulus_closed_form(brier, 1, 2 * r) > brute + 1e-3)


@pytest.mark.parametrize("fa", ALL_FAMILIES, ids=family_id)
def test_curve_monotone(fa):
    spec = make_generator(*fa)
    curve = modulus_curve(spec, 1, np.linspace(0, 2, 41), method="brute")
    assert curve.is_monotone()
    assert curve.omega[0] == 0.0
    if spec.strict:
        assert curve.is_strictly_increasing()
        assert curve.diagnostics == []


def test_non_strict_flat_segments_reported():
    spec = make_generator("max-power", 1.5, N=3)
    curve = modulus_curve(spec, 1, [0.0, 0.2, 0.4], method="brute", budget=SearchBudget(restarts=8))
    assert curve.is_monotone()
    assert not curve.is_strictly_increasing()
    assert np.all(curve.omega < 1e-9)


def test_decrease_is_diagnosed_not_repaired(brier):
    pts = [ModulusPoint(0.0, 0.0, BRUTE), ModulusPoint(0.5, 0.2, BRUTE), ModulusPoint(1.0, 0.1, BRUTE)]
    curve = ModulusCurve(brier, 1, pts)
    assert not curve.is_monotone()
    assert curve.diagnostics[0]["kind"] == "decrease"
    assert curve.omega[-1] == 0.1


def test_curve_validation(brier):
    with pytest.raises(InputError):
        ModulusCurve(brier, 1, [ModulusPoint(0.5, 0.1, BRUTE), ModulusPoint(0.4, 0.2, BRUTE)])
    with pytest.raises(InputError):
        ModulusCurve(brier, 1, [ModulusPoint(0.0, 0.1, BRUTE)])
    with pytest.raises(InputError):
        modulus_curve(brier, 1, [0.5], method="magic")


def test_empty_curve(brier):
    curve = modulus_curve(brier, 1, [], method="brute")
    assert len(curve) == 0
    assert curve.to_csv() == "r,omega,method,heuristic\n"


def test_auto_method(shannon):
    assert modulus_curve(shannon, 1, [0.5]).points[0].method == CLOSED
    tsa = make_generator("alpha-norm", 1.5)
    assert modulus_curve(tsa, 1, [0.5]).points[0].method == BRUTE


def test_workers_do_not_change_result():
    spec = make_generator("shannon", N=3)
    grid = np.linspace(0.1, 1.2, 6)
    budget = SearchBudget(restarts=8)
    a = modulus_curve(spec, 2, grid, "brute", budget, workers=1)
    b = modulus_curve(spec, 2, grid, "brute", budget, workers=4)
    assert a.to_csv() == b.to_csv()
    assert a.to_json() == b.to_json()


@pytest.mark.parametrize("fa", [("shannon", None), ("tsallis", 1.5), ("max-power", 3)], ids=family_id)
@pytest.mark.parametrize("tau", [0.1, 0.25])
def test_chord_shrink_property(fa, tau):
    spec = make_generator(*fa)
    for r in (0.4, 1.0, 1.6):
        res = modulus_brute_force(spec, 1, r)
        q, qc = res.minimizer.q.components, res.minimizer.q_check.components
        a, b = q + tau * (qc - q), q + (1 - tau) * (qc - q)
        inner = modulus_brute_force(spec, 1, (1 - 2 * tau) * r).omega
        assert jensen_gap(spec, a, b) >= inner - 1e-12
        assert res.omega >= inner - 1e-12


def test_shannon_three_class_two_coordinate_minimizer():
    spec = make_generator("shannon", N=3)
    for r in (0.2, 0.7, 1.2):
        res = modulus_brute_force(spec, 2, r, SearchBudget(restarts=16))
        np.testing.assert_allclose(res.omega, modulus_closed_form(spec, 2, r), atol=1e-3)
        x = r / math.sqrt(2)
        expect = sorted([[0.0, (1 - x) / 2, (1 + x) / 2], [0.0, (1 + x) / 2, (1 - x) / 2]])
        got = sorted([sorted(res.minimizer.q.tolist()), sorted(res.minimizer.q_check.tolist())])
        np.testing.assert_allclose(sorted(got), [sorted(e) for e in expect][::1], atol=1e-3)


def test_inverse_modulus_examples(shannon, brier):
    bc = modulus_curve(brier, 1, np.linspace(0, 2, 81), method="closed")
    np.testing.assert_allclose(inverse_modulus(bc, 0.125), 1.0, atol=1e-9)
    assert inverse_modulus(bc, 0.0) == 0.0
    sc = modulus_curve(shannon, 1, np.linspace(0, 2, 81), method="closed")
    assert inverse_modulus(sc, 1.0) == 2.0
    rho = np.array([0.0, 0.01, 0.1, 0.5])
    r = inverse_modulus(sc, rho)
    np.testing.assert_allclose(sc(r), rho, atol=1e-9)


def test_inverse_modulus_errors(brier):
    flat = modulus_curve(make_generator("max-power", 1.5, N=3), 1, [0.0, 0.5, 1.0], "brute",
                         SearchBudget(restarts=4))
    with pytest.raises(NonInvertibleError):
        inverse_modulus(flat, 0.1)
    bc = modulus_curve(brier, 1, np.linspace(0, 2, 11), method="closed")
    with pytest.raises(DomainError):
        inverse_modulus(bc, -1.0)


def test_interpolant_is_monotone(shannon):
    curve = modulus_curve(shannon, 1, np.linspace(0.1, 2, 12), method="closed")
    fine = curve(np.linspace(0, 2, 2001))
    assert np.all(np.diff(fine) >= 0)
    assert curve(0.0) == 0.0


def test_serialisation(shannon):
    curve = modulus_curve(shannon, 1, [0.0, 1.0, 2.0], method="brute")
    lines = curve.to_csv().splitlines()
    assert lines[0] == "r,omega,method,heuristic"
    assert lines[2].startswith("1,0.1308") and lines[2].endswith(",brute_force,false")
    assert float(lines[3].split(",")[1]) == curve.omega[2]
    withagree = curve.to_csv(agreement=[0.0, 1e-12, 0.0]).splitlines()
    assert withagree[0].endswith(",agreement")
    d = curve.to_dict()
    assert d["family"] == "shannon" and d["p"] == "1"
    assert d["points"][1]["minimizer"]["distance"] == pytest.approx(1.0)
