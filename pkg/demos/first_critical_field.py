"""Miniature first-critical-field experiment (coarse, a few minutes).

Relaxes the vortexless start and a seeded-vortex start over a ladder of
applied strengths at eps = 0.2; the winner flips from the screened branch
to the vortex branch near the leading-order critical field.
"""

from glmeissner import build_mesh, norm_star, solve_london, uniform_field
from glmeissner.london import hc1_leading
from glmeissner.minimize import MinimizeOptions, hc1_sweep

eps = 0.2
mesh = build_mesh({"shape": "ball", "R": 1.0}, eps / 2, pad=3)
md = solve_london(mesh, uniform_field(mesh, (0, 0, 1)), tol=1e-8)
ns, curve = norm_star(mesh, md.B0)
hc1 = hc1_leading(eps, ns)
print(f"norm_star = {ns:.5f}, leading-order critical field = {hc1:.3f}")

opts = MinimizeOptions(max_iters=150, grad_tol=1e-4, momentum=0.9,
                       plateau_tol=1e-8, plateau_window=20)
hex_list = [0.5 * hc1, 1.0 * hc1, 1.6 * hc1, 2.4 * hc1]
res = hc1_sweep(mesh, md, eps, hex_list, opts=opts,
                seed_curve=curve, norm_star_value=ns)

print(f"{'hex/Hc1':>8} {'winner':>9} {'vortexless':>11} {'vortex mass':>12} "
      f"{'min |u|':>8}")
for row in res.rows:
    print(f"{row['hex']/hc1:8.2f} {row['winner']:>9} {str(row['vortexless']):>11} "
          f"{row['vortex_mass']:12.3f} {row['min_abs_u']:8.3f}")
print(f"crossover bracket: {res.hc1_bracket}, "
      f"numeric/leading ratio: "
      f"{None if res.hc1_numeric is None else res.hc1_numeric / hc1}")
