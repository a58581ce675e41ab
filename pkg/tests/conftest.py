import numpy as np
import pytest

from glmeissner.mesh import build_mesh
from glmeissner.london import analytic_ball_B0, solve_london, uniform_field
from glmeissner.fields import VectorField


@pytest.fixture(scope="session")
def ball8():
    return build_mesh({"shape": "ball", "R": 1.0}, 1.0 / 8, pad=2)


@pytest.fixture(scope="session")
def ball16():
    return build_mesh({"shape": "ball", "R": 1.0}, 1.0 / 16, pad=2)


@pytest.fixture(scope="session")
def london8(ball8):
    return solve_london(ball8, uniform_field(ball8, (0, 0, 1)), tol=1e-8)


@pytest.fixture(scope="session")
def london16(ball16):
    return solve_london(ball16, uniform_field(ball16, (0, 0, 1)), tol=1e-8)


def analytic_field_on(mesh, R=1.0):
    """Closed-form ball field sampled on the node grid; points outside the
    ball are evaluated at their surface projection, far nodes are zero."""
    idx = np.argwhere(np.ones(mesh.nshape, dtype=bool))
    pts = mesh.node_points(idx)
    r = np.linalg.norm(pts, axis=1)
    q = pts.copy()
    out = r > R
    q[out] *= (R / np.where(r[out] < 1e-300, 1.0, r[out]))[:, None]
    vals = analytic_ball_B0(R, q).reshape(*mesh.nshape, 3)
    mask = mesh.inside | mesh.boundary
    comps = tuple(np.where(mask, vals[..., c], 0.0) for c in range(3))
    return VectorField(mesh, "node", comps)


@pytest.fixture(scope="session")
def analytic8(ball8):
    return analytic_field_on(ball8)


@pytest.fixture(scope="session")
def analytic16(ball16):
    return analytic_field_on(ball16)
