import json

import numpy as np
import pytest

from vreg import builtins as BI
from vreg import fields as F
from vreg import integrands as I
from vreg import solver as S
from vreg.errors import InvalidArgument


@pytest.fixture(scope="module")
def benchmark():
    g = F.make_grid([0, 1], 257)
    pb = S.ProblemSpec(I.p_energy(3, mu=1e-8, weight=1 / 3), g, forcing=1.0)
    u, rep = S.minimize_regularized(pb, 1e-8)
    return pb, u, rep


def exact_p3(x):
    return (2 / 3) * (0.5 ** 1.5 - np.abs(x - 0.5) ** 1.5)


def test_zero_data_gives_zero():
    g = F.make_grid([(0, 1), (0, 1)], 9)
    for spec in (I.p_energy(3, mu=0.1, n=2),
                 I.double_phase(2, 2.5, I.power_coefficient(0.5), mu=0.1, n=2)):
        u, rep = S.minimize_regularized(S.ProblemSpec(spec, g), 1e-3)
        assert np.all(u.values == 0)
        assert rep.final_energy == pytest.approx(0.0, abs=1e-15)
    u, rep = S.minimize_regularized(S.ProblemSpec(I.p_energy(2, mu=0.1, n=2), g, mode="neumann"), 1e-3)
    assert np.all(u.values == 0)


def test_benchmark_matches_closed_form(benchmark):
    pb, u, rep = benchmark
    x = pb.grid.axes()[0]
    assert np.max(np.abs(u.scalar - exact_p3(x))) <= 2e-3
    assert u.scalar[128] == pytest.approx(0.23570, abs=2e-3)
    assert rep.converged and rep.el_residual <= 1e-8
    assert rep.final_energy == pytest.approx(BI.plaplace_1d_energy(3), abs=1e-3)


def test_energy_decreases_across_accepted_steps(benchmark):
    _, _, rep = benchmark
    steps = np.array(rep._energy_steps)
    assert np.all(np.diff(steps) <= 1e-12 * np.abs(steps[1:]).max())


def test_convexity_certificate(benchmark):
    pb, u, _ = benchmark
    E0 = S.discrete_energy(pb, u, 1e-8)
    rng = np.random.default_rng(0)
    for _ in range(50):
        v = rng.standard_normal(257) * 1e-3
        v[[0, -1]] = 0.0
        assert E0 <= S.discrete_energy(pb, u.with_values(u.values[:, 0] + v), 1e-8) + 1e-12


def test_residual_grows_linearly_under_perturbation(benchmark):
    pb, u, _ = benchmark
    x = pb.grid.axes()[0]
    psi = np.sin(np.pi * x)
    res = [S.el_residual(pb, u.with_values(u.scalar + d * psi), 1e-8)[0] for d in (1e-4, 2e-4, 4e-4)]
    ratios = np.array(res[1:]) / np.array(res[:-1])
    np.testing.assert_allclose(ratios, 2.0, rtol=0.1)


def test_stress_norm_for_laplace():
    g = F.make_grid([0, 1], 129)
    pb = S.ProblemSpec(I.p_energy(2, mu=0), g, forcing=1.0)
    u, rep = S.minimize_regularized(pb, 1e-10)
    Du = F.discrete_gradient(u)[:, 0, 0]
    l2 = np.sqrt(np.sum(Du ** 2) * g.spacing[0])
    _, stress = S.el_residual(pb, u)
    assert stress == pytest.approx(2 * l2, rel=1e-6)


def test_neumann_compatibility_and_gauge():
    g = F.make_grid([(-1, 1), (-1, 1)], 17)
    spec = I.p_energy(3, mu=0.1, n=2)
    with pytest.raises(InvalidArgument):
        S.minimize_regularized(S.ProblemSpec(spec, g, forcing=1.0, mode="neumann"), 1e-3)
    f = BI.forcing("cosine")
    pb = S.ProblemSpec(spec, g, forcing=f, mode="neumann")
    u, rep = S.minimize_regularized(pb, 1e-3)
    disc = S.Discretization(pb)
    assert np.all(np.abs(disc.mean(disc.from_field(u))) <= 1e-12)
    u2, _ = S.minimize_regularized(pb, 1e-3, warm_start=u.with_values(u.values + 5.0))
    assert np.max(np.abs(u2.values - u.values)) <= 1e-6


def test_mixed_mode_runs():
    g = F.make_grid([(0, 1), (0, 1)], 9, tags={"x+": "neumann", "y+": "neumann"})
    pb = S.ProblemSpec(I.p_energy(2, mu=0.1, n=2), g, forcing=1.0,
                       neumann_data={"x+": lambda x: 0.1 * np.ones(x.shape[:-1])}, mode="mixed")
    u, rep = S.minimize_regularized(pb, 1e-4)
    assert rep.converged
    assert np.all(u.values[0, :] == 0) and np.all(u.values[:, 0] == 0)
    assert np.all(u.values[-1, 1:] > 0)


def test_strict_convexity_contraction():
    g = F.make_grid([0, 1], 33)
    pb = S.ProblemSpec(I.p_energy(3, mu=0.1, weight=1 / 3), g, forcing=1.0)
    rng = np.random.default_rng(1)
    cs = []
    for _ in range(20):
        w1 = rng.standard_normal(33)
        w2 = rng.standard_normal(33)
        w1[[0, -1]] = w2[[0, -1]] = 0
        u1 = F.GridFunction(g, w1)
        u2 = F.GridFunction(g, w2)
        mid = F.GridFunction(g, (w1 + w2) / 2)
        gap = 0.5 * (S.discrete_energy(pb, u1) + S.discrete_energy(pb, u2)) - S.discrete_energy(pb, mid)
        dd = np.abs(np.diff(w1 - w2) / g.spacing[0])
        cs.append(gap / np.sum(dd ** 3 * g.spacing[0]))
    assert min(cs) > 0


def test_relaxation_of_autonomous_benchmark():
    g = F.make_grid([0, 1], 129)
    pb = S.ProblemSpec(I.p_energy(3, mu=0, weight=1 / 3), g, forcing=1.0)
    u, rep = S.relax_continuation(pb, S.SolverConfig(k_max=10))
    exact = BI.plaplace_1d_energy(3)
    assert rep.relaxed_estimate == pytest.approx(exact, rel=1e-3)
    tr = np.array(rep.regularized_energy_trace)
    assert np.all(np.diff(tr) <= 1e-10)
    assert rep.q_energy_decay_slope < 0
    assert len(rep.cauchy_trace) == len(tr) - 1
    assert any("mu = 0" in n for n in rep.notes)


def test_double_phase_no_gap_range():
    g = F.make_grid([(-1, 1), (-1, 1)], 17)
    dp = I.double_phase(2, 2.4, I.power_coefficient(0.5), mu=0.0, n=2)
    u, rep = S.relax_continuation(S.ProblemSpec(dp, g, forcing=1.0), S.SolverConfig(k_max=6))
    assert rep.q_energy_decay_slope < 0
    assert not any("Lavrentiev" in f for f in rep.flags)


def test_gap_probe_against_own_output():
    g = F.make_grid([0, 1], 65)
    pb = S.ProblemSpec(I.p_energy(3, mu=0, weight=1 / 3), g, forcing=1.0)
    cfg = S.SolverConfig(k_max=6)
    u, _ = S.relax_continuation(pb, cfg)
    rep = S.gap_probe(pb, u, cfg)
    assert rep.gap_indicator <= rep.tolerance
    assert not rep.gap_detected


def test_gap_probe_flags_divergent_competitor():
    g = F.make_grid([0, 1], 33)
    pb = S.ProblemSpec(I.p_energy(2, mu=0), g)
    # |u'| ~ |x - 1/2|^{-1/2} has infinite Dirichlet energy
    comp = S.ClosedForm(lambda x: np.sqrt(np.abs(x[..., 0] - 0.5))[..., None],
                        lambda x: (0.5 * np.sign(x[..., 0] - 0.5)
                                   / np.sqrt(np.abs(x[..., 0] - 0.5)))[..., None, None],
                        [(0.5,)])
    rep = S.gap_probe(pb, comp, S.SolverConfig(k_max=2))
    assert rep.competitor_diverged and rep.gap_indicator is None


def test_report_json_keys(benchmark):
    _, _, rep = benchmark
    d = json.loads(rep.to_json())
    for key in ("final_energy", "el_residual", "epsilon_trace", "converged"):
        assert key in d
    assert rep.to_json() == rep.to_json()


def test_non_convergence_is_flagged():
    g = F.make_grid([0, 1], 129)
    pb = S.ProblemSpec(I.p_energy(3, mu=0, weight=1 / 3), g, forcing=1.0)
    u, rep = S.minimize_regularized(pb, 1e-8, S.SolverConfig(max_iterations=2))
    assert not rep.converged and "not-converged" in rep.flags


def test_config_validation():
    with pytest.raises(InvalidArgument):
        S.SolverConfig(rho=1.5)
    with pytest.raises(InvalidArgument):
        S.SolverConfig(gradient_tolerance=0)
    assert S.SolverConfig(epsilon0=0.1, rho=0.5, k_max=2).schedule() == [0.1, 0.05, 0.025]
    g = F.make_grid([0, 1], 9)
    with pytest.raises(InvalidArgument):
        S.minimize_regularized(S.ProblemSpec(I.p_energy(2, mu=1), g), 0.0)


def test_autonomous_trace_changes_are_first_order_in_epsilon():
    g = F.make_grid([0, 1], 129)
    pb = S.ProblemSpec(I.p_energy(3, mu=0, weight=1 / 3), g, forcing=1.0)
    _, rep = S.relax_continuation(pb, S.SolverConfig(k_max=6))
    steps = np.abs(np.diff(rep.regularized_energy_trace))
    np.testing.assert_allclose(steps[1:] / steps[:-1], 0.5, atol=0.1)
