# How smooth is V_p(Du)?  Difference quotients ||Delta_h v||_{L^2} decay like
# |h|^s for v in B^{s,2}_infty, so a log-log slope reads off s.  We first
# calibrate on |x|^gamma (slope gamma + 1/2), then probe the p = 3 benchmark.
import warnings

import numpy as np

from vreg import besov as B
from vreg import fields as F
from vreg import integrands as I
from vreg import solver as S

warnings.simplefilter("ignore")

g = F.make_grid([-1, 1], 40961)
print("calibration on |x|^gamma, second differences")
for gamma in (0.1, 0.25, 0.4, 0.75):
    v = F.sample(g, lambda x: np.abs(x[..., 0]) ** gamma)
    est = B.decay_fit(v, B.BesovProbe(order=2))
    print(f"  gamma = {gamma:4.2f}: slope {est.slope:.3f}  expected {gamma + 0.5:.2f}  r^2 {est.r_squared:.4f}")

# first differences cap at 1; second differences see past it
grid = F.make_grid([0, 1], 1025, tags={"x-": "dirichlet"})
pb = S.ProblemSpec(I.p_energy(3, mu=0, weight=1 / 3), grid, forcing=1.0)
u, _ = S.minimize_regularized(pb, 1e-8)
print("\nV_3(u') for the p = 3 benchmark (local model |x - 1/2|^{3/4})")
for order in (1, 2):
    est = B.v_field_regularity(u, pb.integrand, B.BesovProbe(order=order))
    print(f"  order {order}: slope {est.slope:.3f} saturated={est.saturated}")
    if order == 2:
        print("  per-h seminorms (|h|^-s ||Delta^2_h V||):")
        for d, h, val in est.table:
            print(f"    h = {h:.5f}  {val:.4e}")

# a Laplace problem with a jumping forcing term: Du stays W^{1,2}
pb2 = S.ProblemSpec(I.p_energy(2, mu=0), F.make_grid([0, 1], 257),
                    forcing=lambda x: np.sign(x[..., 0] - 0.3))
u2, _ = S.minimize_regularized(pb2, 1e-8)
est = B.v_field_regularity(u2, pb2.integrand, B.BesovProbe(order=1))
print(f"\np = 2, step forcing: slope {est.slope:.3f} saturated={est.saturated}")

# reflecting across the Dirichlet face keeps the interior first-difference slope
inner = B.v_field_regularity(u, pb.integrand, B.BesovProbe(order=1)).slope
odd = B.v_field_regularity(u, pb.integrand, B.BesovProbe(order=1), "odd-reflect", "x-").slope
print(f"odd reflection at x = 0: interior {inner:.3f}, reflected {odd:.3f}")
