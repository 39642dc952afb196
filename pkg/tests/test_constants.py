import math

import pytest

import reference_constants as ref
from qbnf import constants as K
from qbnf.families import builtin_frequencies

REL = 1e-12


def close(a, b, rel=REL):
    return abs(a - b) <= rel * max(abs(a), abs(b))


def test_Z():
    assert K.Z(0) == 2
    assert K.Z(1) == 32
    assert K.Z(2) == 2 * 3 * 64
    with pytest.raises(ValueError):
        K.Z(-1)


def test_delta_log2():
    assert K.delta_const(0.5, 0.25) == pytest.approx(math.log(2), rel=1e-15)
    assert K.delta_const(0.9, 0.1) > math.log(2)


@pytest.mark.parametrize("eta, C", [(0.5, 0.25), (0.9, 0.05), (0.3, 0.2), (0.99, 0.9)])
def test_delta_and_cap_against_reference(eta, C):
    assert close(K.delta_const(eta, C), ref.Delta(eta, C))
    for k in (0, 1, 2):
        assert close(K.M_cap(0.5, C, k), ref.Mcap(0.5, C, k))
        assert K.M_cap(0.5, C, k) < 1


def test_budget_example():
    max_B, ok = K.brjuno_budget(1e-6, 1.0, 0.5, 0.5, 0, B_value=0.1)
    Kb = (0.5 ** 4 * 0.5 ** 6) / ((0.5 + 2 * 1.5) * 2 ** 6 * 2 ** (1 / math.e) * 8)
    assert max_B == pytest.approx(math.log(2 * Kb / 1e-6) / 3, rel=1e-14)
    # negative: at this size even B = 0 is outside the budget
    assert max_B == pytest.approx(-0.056298752681354314, rel=1e-12)
    assert ok is False
    # equality boundary: norm_V = 2K e^{-3B}
    B = 0.2
    nV = 2 * Kb * math.exp(-3 * B)
    assert K.brjuno_budget(nV, 1.0, 0.5, 0.5, 0)[0] == pytest.approx(B, rel=1e-12)
    assert K.brjuno_budget(1e-300, 1.0, 0.5, 0.5, 0)[0] > K.brjuno_budget(1e-6, 1.0, 0.5, 0.5, 0)[0]


PARAMS = [
    ("golden_1x2", 0, 0.5, 0.5, 0.25, 1e-3),
    ("golden_1x2", 1, 0.3, 0.6, 0.1, 1e-8),
    ("cubic_1x3", 0, 0.6, 0.4, 0.3, 1e-5),
    ("golden_2x2", 0, 0.5, 0.5, 0.25, 1e-4),
    ("rot_2x2", 2, 1.0, 0.7, 0.5, 0.0),
]


@pytest.mark.parametrize("name, k, alpha, eta, C, nV", PARAMS)
def test_constants_two_paths(name, k, alpha, eta, C, nV):
    f = builtin_frequencies(name)
    rep = K.constants(f, k=k, alpha=alpha, eta=eta, C=C, norm_V=nV, K=5, lam=50.0, gamma=2.0, tau=2.5)
    B = sum(abs(math.log(f.small_divisor_bound(2.0 ** j))) / 2 ** j for j in range(6))
    M1 = f.small_divisor_bound(1)
    uo = f.underomega
    assert close(rep.B, B)
    assert rep.Z_k == ref.Zk(k)
    assert close(rep.Delta, ref.Delta(eta, C))
    assert close(rep.M_cap, ref.Mcap(alpha, C, k))
    assert close(rep.E0, ref.E0(alpha, eta, uo, M1))
    assert close(rep.E1, ref.E1(alpha, eta, uo, 2.0, 2.5))
    assert close(rep.C_k, ref.Ck(B, alpha, k, rep.E))
    assert close(rep.P, ref.P(B, eta, C, k))
    assert close(rep.D_k, ref.Dk(B, alpha, k, rep.E, M1, nV))
    assert close(rep.R_brjuno, ref.R_brjuno(B, M1, uo, alpha, eta, C, k))
    assert rep.omega_condition_ok == ref.omega_condition(B, M1, uo, alpha, eta, C, k)
    assert close(rep.lambda0, ref.lambda0(B, M1, uo, alpha, eta, C, k))
    assert close(rep.R_scaled, ref.R_scaled(B, M1, uo, alpha, eta, C, k, 50.0))
    assert close(rep.R_dio, ref.R_dio(uo, alpha, eta, C, k, 2.0, 2.5))
    assert close(rep.B_alpha, ref.B_alpha_series(2.0, 2.5, alpha))
    assert rep.Delta > 0 and rep.P > 0


def test_R_decreasing_in_B():
    prev = math.inf
    for B in [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0]:
        R, _ = K.radius_brjuno_raw(B, 1.0, 1.9, 0.5, 0.5, 0.25, 0)
        assert R < prev
        prev = R


def test_R_decreasing_in_gamma():
    vals = [K.radius_diophantine(1.9, 0.5, 0.5, 0.25, 0, g, 2.0)[0] for g in (0.5, 1, 2, 10, 100)]
    assert vals == sorted(vals, reverse=True)


def test_radius_scaling():
    # R_k(lam omega) equals the formula with B - 2 log lam, M1 / lam and lam * underomega
    f = builtin_frequencies("golden_1x2")
    lam = 4.0
    B = f.brjuno_sum(4)[0]
    M1 = f.small_divisor_bound(1)
    g = f.scaled(lam)
    Bl = g.brjuno_sum(4)[0]
    assert Bl == pytest.approx(B - math.log(lam) * sum(2.0 ** -j for j in range(5)), rel=1e-12)
    R_direct, _ = K.radius_brjuno_raw(Bl, g.small_divisor_bound(1), g.underomega, 0.5, 0.5, 0.25, 0)
    R_formula, _ = K.radius_brjuno_raw(Bl, M1 / lam, lam * f.underomega, 0.5, 0.5, 0.25, 0)
    assert R_direct == pytest.approx(R_formula, rel=1e-12)


def test_lambda0_branches():
    f = builtin_frequencies("golden_1x2")
    rep = K.constants(f)
    lam0 = rep.lambda0
    B, M1, uo = rep.B, f.small_divisor_bound(1), f.underomega
    assert lam0 > 0
    _, Rs = K.lambda_scaling_raw(B, M1, uo, 0.5, 0.5, 0.25, 0, lam=lam0)
    assert Rs > 0


def test_B_alpha_degenerate():
    assert K.B_alpha(1.0, 0.0, 0.5) == 0.0
    assert K.B_alpha(2.0, 1.0, 0.5) == pytest.approx(ref.B_alpha_series(2.0, 1.0, 0.5), rel=1e-12)


def test_brjuno_alpha_limit():
    rep = K.constants(builtin_frequencies("golden_1x2"), alpha=2 * math.log(2))
    assert rep.R_brjuno is None and rep.lambda0 is None
    with pytest.raises(ValueError):
        K.radius_brjuno_raw(0.0, 1.0, 1.0, 1.5, 0.5, 0.25, 0)


@pytest.mark.parametrize("eta, C", [(0.5, 0.5), (0.5, 0.0), (1.0, 0.5)])
def test_invalid_ranges(eta, C):
    with pytest.raises(ValueError):
        K.constants(builtin_frequencies("golden_1x2"), eta=eta, C=C)
