import warnings

import numpy as np
import pytest

from vreg import fields as F
from vreg.errors import InvalidArgument, UnsupportedError


def grid2(n=17, **kw):
    return F.make_grid([(0, 1), (0, 1)], n, **kw)


def test_grid_validation():
    with pytest.raises(InvalidArgument):
        F.make_grid([0, 1], 2)
    with pytest.raises(InvalidArgument):
        F.make_grid([1, 0], 5)
    with pytest.raises(InvalidArgument):
        F.make_grid([0, 1], 5, tags={"y-": "neumann"})
    with pytest.raises(InvalidArgument):
        F.make_grid([0, 1], 5, tags={"x-": "robin"})
    g = F.make_grid([(0, 2), (0, 1)], (5, 3), tags={"x+": "neumann"})
    np.testing.assert_allclose(g.spacing, [0.5, 0.5])
    assert g.tag("x+") == "neumann" and g.tag("x-") == "dirichlet"


def test_gradient_constant_and_affine():
    g = grid2()
    c = F.sample(g, lambda x: np.full(x.shape[:-1], 3.0))
    assert np.all(F.discrete_gradient(c) == 0)
    A = np.array([[1.5, -2.0], [0.25, 4.0]])
    u = F.sample(g, lambda x: x @ A.T + np.array([1.0, -1.0]))
    D = F.discrete_gradient(u)
    np.testing.assert_allclose(D, np.broadcast_to(A, D.shape), atol=1e-12)


def test_gradient_second_order_at_centres():
    errs = []
    for n in (101, 201):
        g = F.make_grid([0, 1], n)
        u = F.sample(g, lambda x: x[..., 0] ** 2)
        D = F.discrete_gradient(u)[:, 0, 0]
        errs.append(np.max(np.abs(D - 2 * g.cell_centers()[:, 0])))
    assert errs[0] <= 1e-4
    # x^2 is reproduced exactly at the midpoints
    assert max(errs) <= 1e-12


def test_integrate_examples():
    g = grid2()
    assert F.integrate(lambda x: np.ones(x.shape[:-1]), g) == pytest.approx(1.0)
    assert F.integrate(lambda x: np.ones(x.shape[:-1]), g, rule="boundary") == pytest.approx(4.0)
    g1 = F.make_grid([0, 1], 11)
    assert F.integrate(lambda x: x[..., 0], g1) == pytest.approx(0.5, rel=1e-15)
    one = F.sample(g, lambda x: np.ones(x.shape[:-1]))
    assert F.integrate(one) == pytest.approx(1.0)
    assert F.integrate(one, rule="boundary") == pytest.approx(4.0)


def test_shift_difference_examples():
    g = F.make_grid([0, 1], 21)
    h = 0.15
    aff = F.sample(g, lambda x: 2 * x[..., 0] - 1)
    np.testing.assert_allclose(F.shift_difference(aff, [h], 2).values, 0.0, atol=1e-13)
    sq = F.sample(g, lambda x: x[..., 0] ** 2)
    np.testing.assert_allclose(F.shift_difference(sq, [h], 2).values, 2 * h * h, rtol=1e-12)
    const = F.sample(g, lambda x: np.full(x.shape[:-1], 4.0))
    assert np.all(F.shift_difference(const, [h], 1).values == 0)
    d = F.shift_difference(sq, [h], 1)
    assert d.meta["omega_h"] == ((0.0, pytest.approx(0.85)),)
    with pytest.raises(InvalidArgument):
        F.shift_difference(sq, [0.123], 1)


def test_second_difference_factorisation():
    rng = np.random.default_rng(0)
    g = F.make_grid([0, 1], 41)
    u = F.GridFunction(g, rng.standard_normal(41))
    h = 0.05
    d2 = F.shift_difference(u, [h], 2)
    dh = F.shift_difference(u, [h], 1)          # nodes 0..38
    both = F.shift_difference(dh, [-h], 1)       # -Delta_{-h} Delta_h
    np.testing.assert_allclose(-both.values, d2.values, atol=1e-14)


def test_telescoping_identity():
    rng = np.random.default_rng(1)
    g = F.make_grid([0, 1], 41)
    u = F.GridFunction(g, rng.standard_normal(41))
    k = 4
    d = F.shift_difference(u, [k * g.spacing[0]], 1)
    lhs = d.values.sum()
    rhs = u.values[-k:].sum() - u.values[:k].sum()
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_extend_examples():
    g = F.make_grid([(0, 1), (0, 1)], 9)
    y = F.sample(g, lambda x: x[..., 1])
    odd = F.extend(y, "y-", "odd")
    np.testing.assert_allclose(odd.values[..., 0], odd.grid.coords()[..., 1], atol=1e-15)
    even = F.extend(y, "y-", "even")
    np.testing.assert_allclose(even.values[..., 0], np.abs(even.grid.coords()[..., 1]), atol=1e-15)
    one = F.sample(g, lambda x: np.ones(x.shape[:-1]))
    z = F.extend(one, "y-", "zero")
    yy = z.grid.coords()[..., 1]
    np.testing.assert_array_equal(z.values[..., 0], np.where(yy >= 0, 1.0, 0.0))
    assert z.grid.resolution == (9, 17)
    with pytest.raises(UnsupportedError):
        F.extend(y, [1.0, 1.0], "odd")
    # outward normal form selects the same face
    np.testing.assert_array_equal(F.extend(y, [0.0, -1.0], "odd").values, odd.values)


def test_odd_extension_warns_on_nonzero_trace():
    g = F.make_grid([0, 1], 9)
    u = F.sample(g, lambda x: 1 + x[..., 0])
    with pytest.warns(UserWarning, match="trace"):
        F.extend(u, "x-", "odd")


def test_odd_even_reflections_commute_on_corner():
    rng = np.random.default_rng(2)
    g = F.make_grid([(0, 1), (0, 1)], 7, corner_mode=True)
    v = rng.standard_normal((7, 7))
    v[0, :] = 0.0
    u = F.GridFunction(g, v)
    a = F.extend(F.extend(u, "x-", "odd"), "y-", "even")
    b = F.extend(F.extend(u, "y-", "even"), "x-", "odd")
    np.testing.assert_array_equal(a.values, b.values)


def test_smoothing_preserves_affine():
    rng = np.random.default_rng(3)
    g = F.make_grid([(-1, 1), (-1, 1)], 41)
    for _ in range(5):
        A = rng.standard_normal(2)
        b = rng.standard_normal()
        u = F.sample(g, lambda x: x @ A + b)
        w = F.smooth_annulus(u, [0.0, 0.0], 0.2, 0.7)
        scale = np.max(np.abs(u.values))
        assert np.max(np.abs(w.values - u.values)) <= 1e-3 * scale


def test_smoothing_identity_off_annulus():
    rng = np.random.default_rng(4)
    g = F.make_grid([(-1, 1), (-1, 1)], 41)
    u = F.GridFunction(g, rng.standard_normal((41, 41)))
    w = F.smooth_annulus(u, [0.1, 0.0], 0.2, 0.6)
    th = F.smoothing_radius(g.coords(), [0.1, 0.0], 0.2, 0.6)
    np.testing.assert_array_equal(w.values[th == 0], u.values[th == 0])
    assert np.any(w.values[th > 0] != u.values[th > 0])
    with pytest.raises(InvalidArgument):
        F.smooth_annulus(u, [0.5, 0.0], 0.2, 0.6)


def test_cancellation_identity():
    rng = np.random.default_rng(5)
    N = 50
    a = rng.standard_normal(N + 1)
    even = np.concatenate([a[:0:-1], a])
    b = rng.standard_normal(N)
    odd = np.concatenate([-b[::-1], [0.0], b])
    for s, t, par in ((even, even[::-1].copy(), "even"), (odd, -odd[::-1], "odd")):
        scale = np.max(np.abs(s)) * np.max(np.abs(t))
        assert F.cancellation_check(s, t, 7 * 0.1, par, spacing=0.1) <= 1e-12 * scale
    with pytest.raises(InvalidArgument):
        F.cancellation_check(even, odd, 0.5, ("even", "odd"), spacing=0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = F.cancellation_check(even, odd, 0.7, "even", spacing=0.1)
    assert r > 1e-6


def test_csv_roundtrip(tmp_path):
    g = F.make_grid([(0, 1), (0, 2)], (4, 3))
    u = F.sample(g, lambda x: np.stack([x[..., 0], x[..., 1] ** 2 / 3], -1))
    text = F.to_csv(u)
    assert text.splitlines()[0] == "x,y,component_index,value"
    path = tmp_path / "u.csv"
    F.write_csv(u, path)
    v = F.read_csv(path, g)
    np.testing.assert_array_equal(u.values, v.values)


def test_values_are_immutable():
    g = F.make_grid([0, 1], 5)
    u = F.GridFunction(g, np.zeros(5))
    with pytest.raises(ValueError):
        u.values[0, 0] = 1.0
    with pytest.raises(InvalidArgument):
        F.GridFunction(g, np.array([0, 1, np.nan, 0, 0]))
