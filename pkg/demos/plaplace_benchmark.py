# 1D p-Laplace benchmark: minimise int |u'|^3/3 - u on (0,1), u(0) = u(1) = 0.
# The minimiser is known in closed form, so we can watch the discrete error
# shrink under refinement and compare the relaxed energy against the exact one.
import warnings

import numpy as np

from vreg import builtins as BI
from vreg import fields as F
from vreg import integrands as I
from vreg import solver as S

warnings.simplefilter("ignore")

p = 3.0
exact = BI.plaplace_1d(p)
E_exact = BI.plaplace_1d_energy(p)
print(f"closed-form energy: {E_exact:.7f}\n")

print(f"{'nodes':>6} {'max error':>11} {'energy':>12} {'EL residual':>12} {'iters':>6}")
for n in (33, 65, 129, 257, 513):
    g = F.make_grid([0, 1], n)
    pb = S.ProblemSpec(I.p_energy(p, mu=0, weight=1 / p), g, forcing=1.0)
    u, rep = S.minimize_regularized(pb, 1e-8)
    err = np.max(np.abs(u.scalar - exact.u(g.coords())[..., 0]))
    print(f"{n:6d} {err:11.3e} {rep.final_energy:12.7f} {rep.el_residual:12.2e} {sum(rep.iterations):6d}")

# the same problem through the epsilon-continuation used for relaxed minimisers
g = F.make_grid([0, 1], 129)
pb = S.ProblemSpec(I.p_energy(p, mu=0, weight=1 / p), g, forcing=1.0)
u, rep = S.relax_continuation(pb, S.SolverConfig(k_max=10))
print("\ncontinuation over epsilon:")
for eps, E in zip(rep.epsilon_trace, rep.regularized_energy_trace):
    print(f"  eps = {eps:9.3e}   F_eps = {E:.8f}")
print(f"relaxed estimate {rep.relaxed_estimate:.7f}  (exact {E_exact:.7f})")
print(f"Richardson estimate {rep.richardson_estimate}")
print(f"slope of eps*int|Du|^q against log(1/eps): {rep.q_energy_decay_slope:.3f}")
