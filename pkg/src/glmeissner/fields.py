"""Staggered-grid fields and discrete vector calculus.

Layout on a node grid of shape (nx, ny, nz) with spacing h:

    nodes   (i, j, k)                     scalars, complex order parameter
    x-edges (i+1/2, j, k)  (nx-1,ny,nz)   x-components of edge fields
    x-faces (i, j+1/2, k+1/2)             x-components of face fields

and cyclically for y, z.  With this layout

    gradient : nodes -> edges      (exact on linears)
    curl     : edges -> faces      (circulation / face area)
    curl_t   : faces -> edges      (adjoint of curl; the dual-grid curl
                                    with zero extension outside the grid)
    divergence : edges -> nodes, faces -> cells

and the identities curl(gradient(s)) = 0 and divergence(curl(v)) = 0 hold
to machine rounding, slot by slot.

The covariant derivative of a complex field u along an edge (p -> q) uses
the lattice link variable:  D u = (u(q) exp(-i h A_e) - u(p)) / h, which
makes |D u| and the plaquette winding exactly gauge invariant.
"""

import numpy as np

from .errors import CurveOutsideDomain, MeshMismatch, WrongStorage

EDGE_SLOTS = ("xedge", "yedge", "zedge")
FACE_SLOTS = ("xface", "yface", "zface")


def edge_shapes(nshape):
    nx, ny, nz = nshape
    return ((nx - 1, ny, nz), (nx, ny - 1, nz), (nx, ny, nz - 1))


def face_shapes(nshape):
    nx, ny, nz = nshape
    return ((nx, ny - 1, nz - 1), (nx - 1, ny, nz - 1), (nx - 1, ny - 1, nz))


class ScalarField:
    def __init__(self, mesh, values, location="node"):
        self.mesh = mesh
        self.values = np.asarray(values, dtype=float)
        self.location = location

    @classmethod
    def zeros(cls, mesh, location="node"):
        if location == "node":
            shape = mesh.nshape
        elif location == "cell":
            shape = tuple(n - 1 for n in mesh.nshape)
        else:
            raise WrongStorage(f"unknown scalar location {location!r}")
        return cls(mesh, np.zeros(shape), location)


class VectorField:
    """Three component arrays; storage is 'edge', 'face', or 'node'."""

    def __init__(self, mesh, storage, comps):
        self.mesh = mesh
        self.storage = storage
        self.comps = tuple(np.asarray(c, dtype=float) for c in comps)
        expect = {
            "edge": edge_shapes(mesh.nshape),
            "face": face_shapes(mesh.nshape),
            "node": (mesh.nshape,) * 3,
        }.get(storage)
        if expect is None:
            raise WrongStorage(f"unknown vector storage {storage!r}")
        for c, s in zip(self.comps, expect):
            if c.shape != s:
                raise WrongStorage(
                    f"component shape {c.shape} does not match {storage} slot {s}"
                )

    @classmethod
    def zeros(cls, mesh, storage="edge"):
        shapes = {
            "edge": edge_shapes(mesh.nshape),
            "face": face_shapes(mesh.nshape),
            "node": (mesh.nshape,) * 3,
        }[storage]
        return cls(mesh, storage, tuple(np.zeros(s) for s in shapes))

    def copy(self):
        return VectorField(self.mesh, self.storage, tuple(c.copy() for c in self.comps))


class ComplexField:
    def __init__(self, mesh, values):
        self.mesh = mesh
        self.values = np.asarray(values, dtype=complex)

    @classmethod
    def ones(cls, mesh):
        return cls(mesh, np.ones(mesh.nshape, dtype=complex))


# ---------------------------------------------------------------------------
# differential operators
# ---------------------------------------------------------------------------

def gradient(s):
    """Node scalar -> edge field; exact for fields linear in coordinates."""
    v = s.values
    h = s.mesh.h
    gx = (v[1:, :, :] - v[:-1, :, :]) / h
    gy = (v[:, 1:, :] - v[:, :-1, :]) / h
    gz = (v[:, :, 1:] - v[:, :, :-1]) / h
    return VectorField(s.mesh, "edge", (gx, gy, gz))


def grad_arrays(values, h):
    return (
        (values[1:, :, :] - values[:-1, :, :]) / h,
        (values[:, 1:, :] - values[:, :-1, :]) / h,
        (values[:, :, 1:] - values[:, :, :-1]) / h,
    )


def curl(v):
    """Edge field -> face field (or face -> edge via the dual grid)."""
    if v.storage == "edge":
        return VectorField(v.mesh, "face", curl_arrays(v.comps, v.mesh.h))
    if v.storage == "face":
        return VectorField(v.mesh, "edge", curl_t_arrays(v.comps, v.mesh.h))
    raise WrongStorage("curl needs an edge- or face-stored field")


def curl_arrays(comps, h):
    ex, ey, ez = comps
    fx = (ey[:, :, :-1] - ey[:, :, 1:] + ez[:, 1:, :] - ez[:, :-1, :]) / h
    fy = (ez[:-1, :, :] - ez[1:, :, :] + ex[:, :, 1:] - ex[:, :, :-1]) / h
    fz = (ex[:, :-1, :] - ex[:, 1:, :] + ey[1:, :, :] - ey[:-1, :, :]) / h
    return fx, fy, fz


def curl_t_arrays(comps, h):
    """Adjoint of curl_arrays under the plain slot-sum inner product."""
    gx, gy, gz = comps
    nx = gx.shape[0]
    ny = gy.shape[1]
    nz = gz.shape[2]
    ex = np.zeros((nx - 1, ny, nz))
    ey = np.zeros((nx, ny - 1, nz))
    ez = np.zeros((nx, ny, nz - 1))
    ex[:, :-1, :] += gz
    ex[:, 1:, :] -= gz
    ex[:, :, 1:] += gy
    ex[:, :, :-1] -= gy
    ey[:, :, :-1] += gx
    ey[:, :, 1:] -= gx
    ey[1:, :, :] += gz
    ey[:-1, :, :] -= gz
    ez[:, 1:, :] += gx
    ez[:, :-1, :] -= gx
    ez[:-1, :, :] += gy
    ez[1:, :, :] -= gy
    ex /= h
    ey /= h
    ez /= h
    return ex, ey, ez


def divergence(v):
    """Edge field -> node scalar (zero on the outermost ring), or
    face field -> cell scalar."""
    h = v.mesh.h
    if v.storage == "edge":
        ex, ey, ez = v.comps
        out = np.zeros(v.mesh.nshape)
        out[1:-1, 1:-1, 1:-1] = (
            ex[1:, 1:-1, 1:-1] - ex[:-1, 1:-1, 1:-1]
            + ey[1:-1, 1:, 1:-1] - ey[1:-1, :-1, 1:-1]
            + ez[1:-1, 1:-1, 1:] - ez[1:-1, 1:-1, :-1]
        ) / h
        return ScalarField(v.mesh, out, "node")
    if v.storage == "face":
        fx, fy, fz = v.comps
        out = (
            fx[1:, :, :] - fx[:-1, :, :]
            + fy[:, 1:, :] - fy[:, :-1, :]
            + fz[:, :, 1:] - fz[:, :, :-1]
        ) / h
        return ScalarField(v.mesh, out, "cell")
    raise WrongStorage("divergence needs an edge- or face-stored field")


def covariant_gradient(u, A):
    """Per-edge link derivative (D u)_e = (u(q) e^{-i h A_e} - u(p)) / h."""
    if u.mesh is not A.mesh:
        raise MeshMismatch("u and A live on different meshes")
    if A.storage != "edge":
        raise WrongStorage("covariant_gradient needs an edge-stored potential")
    v = u.values
    h = u.mesh.h
    ax, ay, az = A.comps
    dx = (v[1:, :, :] * np.exp(-1j * h * ax) - v[:-1, :, :]) / h
    dy = (v[:, 1:, :] * np.exp(-1j * h * ay) - v[:, :-1, :]) / h
    dz = (v[:, :, 1:] * np.exp(-1j * h * az) - v[:, :, :-1]) / h
    return dx, dy, dz


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def integrate_slot(mesh, values, slot):
    """Integral over the domain of a slot array against its in-domain weights."""
    h3 = mesh.h**3
    if slot == "node":
        w = mesh.node_weights
    elif slot in EDGE_SLOTS:
        w = mesh.edge_weights[EDGE_SLOTS.index(slot)]
    elif slot in FACE_SLOTS:
        w = mesh.face_weights[FACE_SLOTS.index(slot)]
    else:
        raise WrongStorage(f"unknown slot {slot!r}")
    return float((w * values).sum() * h3)


def integrate(field):
    """Integral of a node scalar field over the domain."""
    if field.location != "node":
        raise WrongStorage("integrate expects a node-located scalar field")
    return integrate_slot(field.mesh, field.values, "node")


def l2_norm_nodes(mesh, comps):
    """L2(domain) norm of a node-stored vector field given as 3 arrays."""
    s = sum(integrate_slot(mesh, c**2, "node") for c in comps)
    return float(np.sqrt(s))


# ---------------------------------------------------------------------------
# interpolation and line integrals
# ---------------------------------------------------------------------------

def _trilinear(arr, origin, h, pts):
    pts = np.atleast_2d(pts)
    t = (pts - origin[None, :]) / h
    n = np.array(arr.shape)
    i0 = np.clip(np.floor(t).astype(int), 0, n - 2)
    f = np.clip(t - i0, 0.0, 1.0)
    out = np.zeros(len(pts))
    for di in (0, 1):
        wi = f[:, 0] if di else 1.0 - f[:, 0]
        for dj in (0, 1):
            wj = f[:, 1] if dj else 1.0 - f[:, 1]
            for dk in (0, 1):
                wk = f[:, 2] if dk else 1.0 - f[:, 2]
                out += wi * wj * wk * arr[i0[:, 0] + di, i0[:, 1] + dj, i0[:, 2] + dk]
    return out


def sample_vector(v, pts):
    """Trilinearly sample a node- or edge-stored vector field at points (m,3)."""
    mesh = v.mesh
    pts = np.atleast_2d(pts)
    out = np.zeros((len(pts), 3))
    if v.storage == "node":
        for c in range(3):
            out[:, c] = _trilinear(v.comps[c], mesh.origin, mesh.h, pts)
        return out
    if v.storage == "edge":
        for c in range(3):
            off = mesh.origin.copy()
            off[c] += mesh.h / 2.0
            out[:, c] = _trilinear(v.comps[c], off, mesh.h, pts)
        return out
    raise WrongStorage("sample_vector supports node- or edge-stored fields")


def sample_scalar(s, pts):
    return _trilinear(s.values, s.mesh.origin, s.mesh.h, np.atleast_2d(pts))


def curve_vertices(gamma):
    """Vertex array and closed flag from a CurveCurrent or raw (m,3) array."""
    if hasattr(gamma, "vertices"):
        return np.atleast_2d(np.asarray(gamma.vertices, float)), bool(gamma.closed), \
            int(getattr(gamma, "multiplicity", 1))
    return np.atleast_2d(np.asarray(gamma, float)), False, 1


def line_integral(v, gamma, check_domain=True):
    """Midpoint-rule circulation of a vector field along an oriented polyline.

    Linear in v; reversing the orientation flips the sign exactly.
    """
    verts, closed, mult = curve_vertices(gamma)
    mesh = v.mesh
    if check_domain:
        d = mesh.shape_obj.sdf(verts)
        if (d > 1e-9 * (1.0 + mesh.shape_obj.half_extent().max())).any():
            raise CurveOutsideDomain(
                f"curve vertex leaves the domain closure by {d.max():.3e}"
            )
    if closed:
        verts = np.vstack([verts, verts[:1]])
    seg = verts[1:] - verts[:-1]
    mid = 0.5 * (verts[1:] + verts[:-1])
    vals = sample_vector(v, mid)
    return float(mult * (vals * seg).sum())


def curve_length(gamma):
    verts, closed, _ = curve_vertices(gamma)
    if closed:
        verts = np.vstack([verts, verts[:1]])
    return float(np.linalg.norm(verts[1:] - verts[:-1], axis=1).sum())


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def _vtk_order(arr):
    # VTK structured points expect x varying fastest
    return arr.transpose(2, 1, 0).ravel()


def write_vtk(path, mesh, scalars=None, vectors=None, title="glmeissner field"):
    """Write node data as a legacy-VTK STRUCTURED_POINTS ASCII file."""
    nx, ny, nz = mesh.nshape
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} {nz}",
        f"ORIGIN {mesh.origin[0]!r} {mesh.origin[1]!r} {mesh.origin[2]!r}",
        f"SPACING {mesh.h!r} {mesh.h!r} {mesh.h!r}",
        f"POINT_DATA {nx * ny * nz}",
    ]
    for name, arr in (scalars or {}).items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(repr(x) for x in _vtk_order(np.asarray(arr, float)))
    for name, comps in (vectors or {}).items():
        lines.append(f"VECTORS {name} double")
        cs = [_vtk_order(np.asarray(c, float)) for c in comps]
        lines.extend(f"{a!r} {b!r} {c!r}" for a, b, c in zip(*cs))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_csv_nodes(path, mesh, columns, only_domain=True):
    """Flat CSV of node values: x,y,z followed by one column per entry."""
    names = list(columns)
    mask = (mesh.inside | mesh.boundary) if only_domain else np.ones(mesh.nshape, bool)
    idx = np.argwhere(mask)
    pts = mesh.node_points(idx)
    with open(path, "w") as fh:
        fh.write(",".join(["x", "y", "z"] + names) + "\n")
        cols = [np.asarray(columns[n])[mask] for n in names]
        for row in range(len(idx)):
            vals = [repr(pts[row, 0]), repr(pts[row, 1]), repr(pts[row, 2])]
            vals += [repr(c[row]) for c in cols]
            fh.write(",".join(vals) + "\n")
