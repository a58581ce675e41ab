"""The critical-field constant of the ball three ways.

1. closed form: (3/2)(1 - (1/sinh R) int_0^R sinh r / r dr),
2. 3D maximum-ratio-cycle search over the voxel graph of the ball,
3. 2D search on the meridian half-disc.

All three agree; the extremal curve is the vertical diameter.
"""

import numpy as np

from glmeissner import build_mesh, norm_star, norm_star_halfdisc
from glmeissner.fields import VectorField
from glmeissner.london import analytic_ball_B0, ball_norm_star_exact, hc1_leading

R = 1.0
exact = ball_norm_star_exact(R)
print(f"closed form: {exact:.7f}")

mesh = build_mesh({"shape": "ball", "R": R}, R / 12, pad=1)
idx = np.argwhere(np.ones(mesh.nshape, bool))
pts = mesh.node_points(idx)
r = np.linalg.norm(pts, axis=1)
pts[r > R] *= (R / r[r > R])[:, None]
vals = analytic_ball_B0(R, pts).reshape(*mesh.nshape, 3)
mask = mesh.inside | mesh.boundary
field = VectorField(mesh, "node",
                    tuple(np.where(mask, vals[..., c], 0.0) for c in range(3)))

value, curve = norm_star(mesh, field)
print(f"3D search (h = R/12): {value:.7f}  ({(value-exact)/exact:+.2%})")
print(f"  extremal curve: closed={curve.closed}, "
      f"{len(curve.vertices)} vertices, max off-axis distance "
      f"{np.abs(curve.vertices[:, :2]).max():.4f}")

v2 = norm_star_halfdisc(R, 128)
print(f"2D half-disc (128): {v2:.7f}  ({(v2-exact)/exact:+.2%})")

for eps in (1e-3, 0.05):
    print(f"leading-order critical field at eps={eps}: "
          f"{hc1_leading(eps, exact):.3f}")
