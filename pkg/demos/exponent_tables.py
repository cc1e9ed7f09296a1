# Predicted differentiability of V_p(Du), admissible q ranges and the
# bootstrap that produces them, tabulated over a few growth exponents.
from vreg import exponents as X

print("n = 2, alpha = 1, q = p")
print(f"{'p':>5} {'delta':>7} {'q basic':>8} {'q apriori':>10} {'dim bound':>10} {'kappa_inf':>10}")
for p in (1.5, 2.0, 3.0, 4.0, 6.0):
    sc = X.Scenario(n=2, p=p, q=p, alpha=1.0)
    rep = X.predicted_delta(sc)
    b = rep.q_upper_bounds
    print(f"{p:5.1f} {rep.delta_predicted:7.4f} {b['basic']:8.3f} {b['apriori']:10.3f} "
          f"{rep.singular_dim_bound:10.3f} {rep.kappa_infinity:10.4f}")

print("\nbootstrap delta_k for (n, p, q, alpha) = (3, 3, 3.6, 0.8)")
sc = X.Scenario(n=3, p=3.0, q=3.6, alpha=0.8)
tr = X.iterate_deltas(sc, k_max=12)
for k, (d, br, j) in enumerate(zip(tr.deltas, tr.branch, tr.j0)):
    print(f"   k = {k:2d}  delta = {d:.6f}  case ({br})  inner steps {j}")
print(f"   limit {tr.limit:.6f}, predicted {X.predicted_delta(sc).delta_predicted:.6f}")

print("\nbeyond the a priori bound the bootstrap does not close")
tr = X.iterate_deltas(X.Scenario(n=2, p=2.0, q=4.5, alpha=1.0))
print("  ", tr.note)

print("\nboundary regularity inequality")
for p, a in ((3.0, 0.8), (2.0, 0.5), (1.5, 0.9)):
    bc = X.boundary_regularity_condition(X.Scenario(n=2, p=p, q=p, alpha=a))
    print(f"   p = {p}, alpha = {a}: {bc.holds}  [{bc.inequality}]")
