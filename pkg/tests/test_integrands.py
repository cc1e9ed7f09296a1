import json
from pathlib import Path

import numpy as np
import pytest

from vreg import integrands as I
from vreg.errors import InvalidArgument

import vlemmas as L

CONST = json.loads((Path(__file__).parent / "fixtures" / "v_constants.json").read_text())["constants"]


def z(*row):
    return np.array([row], dtype=float)


def test_growth_params_validation():
    with pytest.raises(InvalidArgument):
        I.GrowthParams(p=3, q=2)
    with pytest.raises(InvalidArgument):
        I.GrowthParams(p=2, q=2, alpha=0)
    with pytest.raises(InvalidArgument):
        I.GrowthParams(p=2, q=2, mu=-1)
    P = I.GrowthParams(p=3, q=4)
    assert P.p_conj == pytest.approx(1.5)
    assert P.q_conj == pytest.approx(4 / 3)


def test_eval_examples():
    x = np.zeros(2)
    assert I.eval(I.p_energy(2, mu=1, n=2), x, z(0, 0)) == 0.0
    dp = I.double_phase(2, 3, I.constant_coefficient(0.0), n=2)
    assert I.eval(dp, x, z(1, 0)) == pytest.approx(1.0)
    assert I.eval(I.p_energy(4, n=2), x, z(2, 0)) == pytest.approx(16.0)


def test_grad_examples():
    x = np.zeros(2)
    zz = z(0.3, -1.2)
    np.testing.assert_allclose(I.grad_z(I.p_energy(2, n=2), x, zz), 2 * zz)
    np.testing.assert_allclose(I.grad_z(I.p_energy(3, n=2), x, z(1, 0)), z(3, 0))
    for spec in (I.p_energy(3, mu=0.5, n=2),
                 I.double_phase(2, 3, I.power_coefficient(0.5), mu=0.5, n=2)):
        np.testing.assert_array_equal(I.grad_z(spec, np.ones(2), z(0, 0)), 0.0)


def test_non_finite_input_rejected():
    spec = I.p_energy(2, n=2)
    with pytest.raises(InvalidArgument):
        I.eval(spec, np.zeros(2), z(np.nan, 0))
    with pytest.raises(InvalidArgument):
        I.grad_z(spec, np.array([np.inf, 0]), z(1, 0))


def test_v_transform_examples():
    rng = np.random.default_rng(0)
    zz = rng.standard_normal((10, 2, 3))
    np.testing.assert_allclose(I.v_transform(2, 0.7, zz), zz)
    np.testing.assert_allclose(I.v_transform(4, 0, z(2, 0)), z(4, 0))
    np.testing.assert_array_equal(I.v_transform(3, 0.5, z(0, 0)), 0.0)
    for p in (1.5, 3.0):
        V = I.v_transform(p, 0.0, zz)
        np.testing.assert_allclose(np.sum(V * V, axis=(-2, -1)),
                                   np.sum(zz * zz, axis=(-2, -1)) ** (p / 2), rtol=1e-12)


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(1)
    specs = [I.p_energy(3, mu=0.2, n=2), I.p_energy(1.5, mu=1, n=2, m=2),
             I.double_phase(2, 2.6, I.power_coefficient(0.5), mu=0.3, n=2),
             I.radial_modulated(2.5, I.power_coefficient(1.0, 2.0), mu=1, n=2)]
    for spec in specs:
        m = spec.params.m
        x = rng.uniform(-1, 1, (200, 2))
        zz = rng.standard_normal((200, m, 2)) * 2
        g = I.grad_z(spec, x, zz)
        h = 1e-6
        fd = np.zeros_like(zz)
        for i in range(m):
            for j in range(2):
                e = np.zeros((m, 2))
                e[i, j] = h
                fd[:, i, j] = (I.eval(spec, x, zz + e) - I.eval(spec, x, zz - e)) / (2 * h)
        err = np.linalg.norm((g - fd).reshape(200, -1), axis=1) / np.linalg.norm(g.reshape(200, -1), axis=1)
        assert err.max() <= 1e-6


def test_shifted_properties():
    spec = I.double_phase(2, 3, I.power_coefficient(0.5), mu=0.5, n=2)
    z0 = z(0.4, -1.0)
    sh = I.shifted(spec, z0)
    x = np.array([0.3, 0.2])
    assert I.eval(sh, x, z(0, 0)) == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(I.grad_z(sh, x, z(0, 0)), 0.0, atol=1e-14)
    quad = I.p_energy(2, n=2)
    qs = I.shifted(quad, z0)
    for w in (z(1, 2), z(-0.3, 0.7)):
        assert I.eval(qs, x, w) == pytest.approx(I.eval(quad, x, w) - I.eval(quad, x, z(0, 0)))
    zero = I.shifted(spec, z(0, 0))
    assert I.eval(zero, x, z(1, 1)) == pytest.approx(I.eval(spec, x, z(1, 1)))


def test_regularized():
    spec = I.p_energy(2, mu=1, n=2)
    with pytest.raises(InvalidArgument):
        I.regularized(spec, 0.0)
    with pytest.raises(InvalidArgument):
        I.regularized(spec, -1.0)
    rng = np.random.default_rng(2)
    zz = rng.standard_normal((50, 1, 2)) * 3
    x = np.zeros((50, 2))
    for eps in (1e-1, 1e-3):
        r = I.regularized(spec, eps)
        diff = I.eval(r, x, zz) - I.eval(spec, x, zz)
        assert np.all(diff <= eps * (1 + np.linalg.norm(zz.reshape(50, -1), axis=1)) ** 2 + 1e-14)
    dp = I.double_phase(2, 2.5, I.power_coefficient(0.5), mu=1, n=2)
    for eps in (1e-1, 1e-3):
        assert I.verify_growth(I.regularized(dp, eps), 400, seed=3).passed


def test_verify_growth_examples():
    rep = I.verify_growth(I.p_energy(3, mu=1, n=2), 500, seed=0)
    assert rep.passed and rep.fenchel_constant > 0
    dp = I.double_phase(2, 3, I.power_coefficient(0.5), mu=1, n=2)
    rep = I.verify_growth(dp, 500, seed=0)
    assert rep.checks["H3"].worst_ratio <= dp.params.Lambda * I.SLACK
    step = I.double_phase(2, 3, I.step_coefficient(1.0, 0.0), mu=1, n=2)
    rep = I.verify_growth(step, 500, seed=0)
    assert not rep.checks["H3"].passed


def test_verify_growth_warns_for_mu_zero():
    with pytest.warns(UserWarning, match="mu = 0"):
        rep = I.verify_growth(I.p_energy(2, n=1), 100, seed=0)
    assert rep.warnings


def test_convexity_on_segments():
    rng = np.random.default_rng(4)
    spec = I.double_phase(1.5, 2.5, I.checkerboard_coefficient(0.5), mu=0.1, n=2)
    x = rng.uniform(-1, 1, (500, 2))
    a = rng.standard_normal((500, 1, 2)) * 5
    b = rng.standard_normal((500, 1, 2)) * 5
    mid = I.eval(spec, x, (a + b) / 2)
    assert np.all(mid <= (I.eval(spec, x, a) + I.eval(spec, x, b)) / 2 + 1e-12)


# pointwise V-function inequalities, constants from the calibration fixture

@pytest.mark.parametrize("p", L.P_VALUES)
def test_v_lemmas_against_fixture(p):
    c = CONST[str(p)]
    rng = np.random.default_rng(2024 + int(10 * p))
    z1, mu = L.draw(rng, 1000)
    z2, _ = L.draw(rng, 1000)
    d = L.difference_ratio(p, z1, z2, mu)
    assert c["difference_lower"] <= d.min() and d.max() <= c["difference_upper"]
    assert L.additivity_ratio(p, z1, z2, mu).max() <= c["additivity"]
    lam = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), 1000))
    lo, hi = L.homogeneity_ratios(p, z1, lam, mu)
    assert lo.min() >= 1 - 1e-12 and hi.max() <= 1 + 1e-12
    for delta in L.DELTAS:
        assert L.young_ratio(p, z1, z2, mu, delta).max() <= c["young"]
    assert L.comparison_ratio(p, c["comparison_q"], z1, mu).max() <= c["comparison"]
