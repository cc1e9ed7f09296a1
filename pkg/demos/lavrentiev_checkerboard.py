# Probing the Lavrentiev gap.  For a double phase energy |z|^p + a(x)|z|^q the
# relaxed energy can sit below the infimum over smooth functions when q is
# large and a(x) vanishes on a checkerboard.  Every lattice function is
# Lipschitz, so a grid can only hint at a gap through resolution trends.
import warnings

from vreg import builtins as BI
from vreg import fields as F
from vreg import integrands as I
from vreg import solver as S

warnings.simplefilter("ignore")


def report(label, problem, competitor, cfg):
    rep = S.gap_probe(problem, competitor, cfg)
    ind = "diverged" if rep.gap_indicator is None else f"{rep.gap_indicator:+.4f}"
    print(f"{label:30s} relaxed {rep.relaxed_estimate:9.5f}  competitor {rep.competitor_energy:9.5f}  "
          f"indicator {ind}  (tol {rep.tolerance:.1e})")
    return rep


# sanity: an autonomous p = q problem has no gap
g1 = F.make_grid([0, 1], 129)
auto = S.ProblemSpec(I.p_energy(3, mu=0, weight=1 / 3), g1, forcing=1.0)
report("autonomous p = q = 3", auto, BI.plaplace_1d(3), S.SolverConfig(k_max=8))

# double phase in the no-gap range q < (n + alpha) p / n
g2 = F.make_grid([(-1, 1), (-1, 1)], 33)
dp = S.ProblemSpec(I.double_phase(2, 2.4, I.power_coefficient(0.5), mu=0, n=2), g2, forcing=1.0)
u, rep = S.relax_continuation(dp, S.SolverConfig(k_max=8))
print(f"\ndouble phase (p, q) = (2, 2.4): eps*int|Du|^q along the schedule")
for eps, e in zip(rep.epsilon_trace, rep.q_energy_trace):
    print(f"   eps = {eps:9.3e}   {e:.4e}")
print(f"   slope against log(1/eps): {rep.q_energy_decay_slope:.3f}")

# checkerboard coefficient, p < n < n + alpha < q, angular boundary values
print("\ncheckerboard (p, q, alpha) = (1.5, 3, 0.5) under refinement")
spec = I.double_phase(1.5, 3.0, I.checkerboard_coefficient(0.5), mu=0, n=2)
for n in (17, 33, 65):
    g = F.make_grid([(-1, 1), (-1, 1)], n)
    pb = S.ProblemSpec(spec, g, forcing=0.0, dirichlet_data=lambda x: BI.angular(x))
    report(f"  {n} x {n} nodes", pb, BI.angular_competitor(), S.SolverConfig(k_max=8))
print("\nA negative indicator means the angular competitor is simply not optimal")
print("at this resolution; the value is reported, not interpreted.")
