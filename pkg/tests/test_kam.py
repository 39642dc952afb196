import math

import numpy as np
import pytest

from qbnf import kam, oracle
from qbnf.errors import ConfigError, PreconditionError
from qbnf.families import default_family, generate_commuting_family
from qbnf.symbol import average, bracket, linear_bracket, lincomb, norm


@pytest.fixture(scope="module")
def family1():
    return generate_commuting_family(default_family(m=1, hbar=1.0))


@pytest.fixture(scope="module")
def family2():
    return generate_commuting_family(default_family(m=2, hbar=1.0))


def test_schedule():
    cfg = kam.KamConfig()
    rhos = [cfg.rho_at(r) for r in range(8)]
    assert rhos[0] == cfg.rho
    for r in range(7):
        assert rhos[r + 1] == pytest.approx(rhos[r] - cfg.delta_at(r), rel=1e-15)
        assert rhos[r + 1] < rhos[r]
        assert rhos[r + 1] > cfg.rho - 2 * cfg.alpha
    assert cfg.cutoff_at(3) == 8
    assert cfg.delta_at(2) == cfg.alpha / 4


@pytest.mark.parametrize("kw", [dict(alpha=1.5), dict(rho=0.9), dict(eta=0.2, C=0.3), dict(hbar=1.5),
                                dict(mode="other"), dict(lie_tol=0.0)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        kam.KamConfig(**kw).validate()


def test_diophantine_allows_large_alpha():
    kam.KamConfig(mode=kam.DIOPHANTINE, alpha=1.5, rho=4.0).validate()


def test_zero_perturbation(family1):
    V = family1[0].space.zero_vector()
    res = kam.run(V, kam.KamConfig())
    assert res.converged and res.records == [] and res.Ws == []
    assert res.B_infty.is_zero()


def test_already_normal(family1):
    V = average(family1[0])
    st = kam.initial_state(V, kam.KamConfig())
    st1, rec = kam.kam_step(st, kam.KamConfig())
    assert len(st1.Ws[0]) == 0
    assert st1.V.is_zero()
    assert (st1.G[0] - V[0]).max_abs() == 0
    assert rec.measured_next == 0


@pytest.mark.parametrize("mode", [kam.BRJUNO, kam.DIOPHANTINE])
@pytest.mark.parametrize("hbar", [0.0, 0.1, 1.0])
@pytest.mark.parametrize("m", [1, 2])
def test_bound_audit(mode, hbar, m):
    V, _ = generate_commuting_family(default_family(m=m, hbar=hbar))
    res = kam.run(V, kam.KamConfig(mode=mode, hbar=hbar))
    assert res.converged
    assert res.final_norm <= 1e-12 * res.initial_norm
    for rec in res.records:
        assert rec.bound_ok is True
        assert rec.measured_next <= rec.bound_rhs * (1 + 1e-9)


def test_predicted_bound_hand_value(family1):
    V = family1[0]
    cfg = kam.KamConfig()
    st = kam.initial_state(V, cfg)
    F = kam.predicted_bound(st, cfg)
    M = 1.0  # M_{M_0} for golden ratio frequencies
    Zk, d = 2.0, 0.5
    uo = V.space.underomega
    nV = norm(V, 2.0)
    hand = M * Zk / d ** 2 * (1 + (1 + M / d * uo) / (1 - M * Zk * nV / d ** 2))
    assert F == pytest.approx(hand, rel=1e-14)
    assert F == pytest.approx(46.743791593899488, rel=1e-12)


def test_predicted_bound_limit_and_unavailable():
    f0 = kam.step_bound(kam.BRJUNO, 0.0, 0.0, 2.0, 0.25, 1.9, 2.0)
    assert f0 == pytest.approx(2.0 * 2 / 0.25 ** 2 * (2 + 2.0 / 0.25 * 1.9), rel=1e-14)
    assert kam.step_bound(kam.BRJUNO, 1.0, 0.0, 2.0, 0.25, 1.9, 2.0) is None
    assert kam.step_bound(kam.BRJUNO, 0.0, 0.6, 2.0, 0.25, 1.9, 2.0) is None
    dio = kam.step_bound(kam.DIOPHANTINE, 0.0, 0.0, 2.0, 0.25, 1.9, 2.0, tau=2.0)
    assert dio == pytest.approx(2.0 * 2 / 0.25 ** 2 * (16 + 1 + 2.0 / 0.25 * 1.9), rel=1e-14)


def test_quadratic_decay(family1, family2):
    for V, _ in (family1, family2):
        res = kam.run(V, kam.KamConfig())
        fit = kam.decay_fit(res.records)
        assert len(res.records) <= 6
        assert fit["slope"] < 0 and fit["r2"] >= 0.98
        norms = [r.norm_V for r in res.records] + [res.final_norm]
        ratios = [norms[i + 1] / norms[i] for i in range(len(norms) - 1)]
        assert all(ratios[i + 1] < ratios[i] for i in range(len(ratios) - 1))


def _late_state(V, cfg):
    st = kam.initial_state(V, cfg)
    st.r = 1
    st.rho_r = cfg.rho_at(1)
    return st


def test_strict_preconditions(family1):
    V = family1[0] * 40.0
    cfg = kam.KamConfig(strict=True)
    with pytest.raises(PreconditionError) as exc:
        kam.kam_step(_late_state(V, cfg), cfg)
    assert exc.value.inequality == "perturbation_smallness"
    lax = kam.KamConfig(strict=False)
    with pytest.warns(RuntimeWarning):
        kam.kam_step(_late_state(V, lax), lax)
    kam.kam_step(_late_state(family1[0], cfg), cfg)


def test_dense_step_identity(family2):
    V, _ = family2
    cfg = kam.KamConfig()
    st = kam.initial_state(V, cfg)
    N, hbar = 12, 1.0
    for _ in range(2):
        nxt, rec = kam.kam_step(st, cfg, audit=True)
        assert rec.diag["decomposition_gap"] <= 1e-15
        before = oracle.vector_matrices(st.G + st.V, N, hbar)
        after = oracle.vector_matrices(nxt.G + nxt.V, N, hbar)
        for a in range(2):
            d = oracle.conjugation_defect(before[a].entries, nxt.Ws[-1], after[a].entries, N, hbar)
            assert d <= 1e-8
        st = nxt


def test_commutation_propagation(family2):
    V, _ = family2
    cfg = kam.KamConfig()
    st = kam.initial_state(V, cfg)
    om = V.space.omega
    for _ in range(3):
        H = st.G + st.V
        c = lincomb([1, -1, 1], [linear_bracket(H[1], om[0]), linear_bracket(H[0], om[1]),
                                 bracket(H[0], H[1], cfg.hbar)])
        assert norm(c, st.rho_r) <= 10 * max(norm(st.V, st.rho_r) ** 2, 1e-30) + 1e-16
        st, _ = kam.kam_step(st, cfg)


@pytest.mark.parametrize("m", [1, 2])
def test_B_infty_recovers_generator(m):
    V, B = generate_commuting_family(default_family(m=m))
    res = kam.run(V, kam.KamConfig())
    assert norm(res.B_infty - B, 1.0) <= 1e-12 * norm(B, 1.0)
    n = oracle.lattice_box(3, 2)
    ev = oracle.predicted_eigenvalues(res.B_infty, n, 1.0)
    assert ev.shape == (len(n), m) and np.all(np.isfinite(ev))


def test_classical_run(family1):
    V, _ = generate_commuting_family(default_family(m=1, hbar=0.0))
    with pytest.raises(ConfigError):
        kam.classical_run(V, kam.KamConfig(hbar=0.5))
    res = kam.classical_run(V, kam.KamConfig(hbar=0.0))
    assert res.converged


def test_observable_consistency(family2):
    V, _ = family2
    res = kam.run(V, kam.KamConfig())
    for a in range(2):
        Y, _ = kam.conjugate_observable(V[a], res, 0.2, linear=V.space.omega[a])
        gap = norm(Y - res.B_infty[a], 0.8)
        assert gap <= 1e-12 * res.initial_norm


def test_observable_bound(family2):
    V, _ = family2
    res = kam.run(V, kam.KamConfig())
    rng = np.random.default_rng(0)
    from conftest import random_symbol
    for _ in range(10):
        X = random_symbol(rng, V.space, 4, 2, 2)
        delta = 0.3
        _, measured = kam.conjugate_observable(X, res, delta)
        emp, formula = kam.observable_bound(norm(X, res.config.rho) / math.e ** 2, res, delta)
        assert measured <= emp
        assert measured <= formula


def test_observable_no_generators(family1):
    V = average(family1[0])
    res = kam.run(V, kam.KamConfig())
    X = V[0]
    Y, d = kam.conjugate_observable(X, res, 0.1)
    assert d == 0.0


def test_tail_estimate():
    V, _ = generate_commuting_family(default_family(m=1))
    cfg = kam.KamConfig()
    A = kam.tail_estimate(V.space.freq, cfg, 1e-3, 3)
    assert A == math.inf or A >= 0


def test_radius_warning(family1, caplog):
    with caplog.at_level("WARNING", logger="qbnf"):
        kam.run(family1[0], kam.KamConfig())
    assert any("sufficient radius" in r.message for r in caplog.records)
