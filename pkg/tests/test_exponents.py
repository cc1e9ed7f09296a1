import itertools

import numpy as np
import pytest

from vreg import exponents as X
from vreg.errors import InvalidArgument


def sc(**kw):
    kw.setdefault("n", 2)
    kw.setdefault("q", kw.get("p", 2))
    return X.Scenario(**kw)


def test_scenario_validation():
    with pytest.raises(InvalidArgument):
        X.Scenario(n=2, p=3, q=2)
    with pytest.raises(InvalidArgument):
        X.Scenario(n=2, p=2, q=2, alpha=0)
    with pytest.raises(InvalidArgument):
        X.Scenario(n=2, p=2, q=2, data_class="strong", alpha=0.5, beta=0.2)


def test_predicted_delta_examples():
    assert X.predicted_delta(sc(p=3, q=3, alpha=1)).delta_predicted == pytest.approx(0.75)
    assert X.predicted_delta(sc(p=2, alpha=1)).delta_predicted == pytest.approx(1.0)
    strong = sc(p=4, alpha=0.5, beta=2, data_class="strong")
    assert X.predicted_delta(strong).delta_predicted == pytest.approx(0.5)


def test_q_range_examples():
    b = X.q_range(sc(p=2, alpha=1))["bounds"]
    assert b["basic"] == pytest.approx(3.0)
    assert b["apriori"] == pytest.approx(4.0)
    b3 = X.q_range(sc(n=3, p=2))["bounds"]
    assert b3["autonomous"] == pytest.approx(3.0)
    assert b3["partial_regularity"] == pytest.approx(3.0)
    sat = X.q_range(sc(p=2, q=3.5, alpha=1))["satisfied"]
    assert not sat["basic"] and sat["apriori"]


def test_bootstrap_examples():
    tr = X.iterate_deltas(sc(p=2, alpha=1))
    np.testing.assert_allclose(tr.deltas[:4], [0.5, 0.75, 0.875, 0.9375])
    assert tr.limit == pytest.approx(1.0, abs=1e-9)
    assert X.kappa_infinity(sc(p=2, q=2, alpha=1)) == pytest.approx(0.5)
    tr = X.iterate_deltas(sc(p=1.5, alpha=0.5))
    np.testing.assert_allclose(tr.deltas[:3], [0.25, 0.375, 0.4375])
    assert tr.limit == pytest.approx(0.5, abs=1e-9)


def test_deltas_increase_until_limit():
    tr = X.iterate_deltas(sc(n=3, p=3, q=3.4, alpha=0.7))
    d = np.array(tr.deltas)
    assert np.all(np.diff(d[:-1]) > 0)
    assert len(tr.branch) == len(tr.tau1) == len(tr.kappa_sequence)


def test_singular_dim_examples():
    assert X.singular_dim_bound(sc(n=3, p=2, alpha=1)) == pytest.approx(1.0)
    assert X.singular_dim_bound(sc(n=2, p=2, alpha=1)) == 0.0
    strong = sc(n=3, p=4, alpha=1, beta=1.5, data_class="strong")
    assert X.singular_dim_bound(strong) == pytest.approx(1.0)
    assert X.singular_dim_bound(sc(n=1, p=2, alpha=1)) == 0.0


def test_boundary_condition_examples():
    assert X.boundary_regularity_condition(sc(p=3, alpha=0.8)).holds
    assert not X.boundary_regularity_condition(sc(p=2, alpha=0.5)).holds
    auto = X.boundary_regularity_condition(sc(p=2, alpha=0.3, autonomous=True))
    assert auto.holds and auto.rule == "autonomous"
    neu = X.boundary_regularity_condition(sc(p=3, alpha=0.8, beta=0.9, bc="neumann",
                                            homogeneous_boundary=False))
    assert neu.holds and neu.rule == "neumann-inhomogeneous"


def test_embedding_examples():
    assert X.embedding_check(1, 2, 0.5, 2, n=2).holds
    eq = X.embedding_check(1, 2, 0.5, 4, q_fine=2, q1_fine=2, n=2)   # 0 == 0
    assert eq.applicable and eq.holds
    rev = X.embedding_check(1, 2, 0.5, 4, q_fine=3, q1_fine=2, n=2)
    assert not rev.holds
    bad = X.embedding_check(0.2, 2, 0.9, 2)
    assert not bad.applicable and bad.holds is None


def test_equality_case_is_inapplicable():
    n, p, a = 2, 2.0, 1.0
    rep = X.predicted_delta(sc(n=n, p=p, q=(n + a) * p / n, alpha=a))
    assert "besov-basic" not in rep.applicable
    tr = X.iterate_deltas(sc(n=2, p=2, q=4.0, alpha=1))
    assert not tr.applicable and tr.note


def test_neumann_cap_is_a_flag():
    rep = X.predicted_delta(sc(p=3, alpha=1, bc="neumann", radial=True, homogeneous_boundary=False))
    assert isinstance(rep.delta_neumann_cap, str)
    assert rep.delta_predicted == pytest.approx(0.75)


def _grid():
    for n, p, a, frac in itertools.product((2, 3), np.linspace(1.2, 5, 5), (0.25, 0.5, 1.0),
                                           (0.0, 0.3, 0.6, 0.9)):
        hi = min(n * p / (n - a), (n + a) * p / n + 1)
        yield X.Scenario(n=n, p=float(p), q=float(p + frac * (hi - p)), alpha=a)


def test_threshold_forms_agree_away_from_equality():
    for s in _grid():
        for d in np.linspace(0.01, 1.5, 40):
            it2 = X._branch_quantities(s, d)[1]
            if abs(it2 - 0.5) > 1e-9:
                assert X.case_a_by_threshold(s, d) == X.case_a_by_tau(s, d)


def test_monotone_in_alpha_and_beta():
    for p in (1.5, 2, 3, 4):
        d = [X.predicted_delta(sc(p=p, alpha=a)).delta_predicted for a in (0.2, 0.5, 0.9)]
        assert d == sorted(d)
    d = [X.predicted_delta(sc(p=3, alpha=0.5, beta=b, data_class="strong")).delta_predicted
         for b in (0.5, 1.0, 2.0)]
    assert d == sorted(d)
    for key in ("basic", "apriori", "partial_regularity"):
        vals = [X.q_range(sc(n=3, p=p, alpha=a))["bounds"][key] for p, a in ((2, 0.3), (2, 0.6), (3, 0.6))]
        assert vals == sorted(vals)
