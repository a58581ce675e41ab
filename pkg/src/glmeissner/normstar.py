"""Critical-field constant: maximum circulation-to-length ratio over curves.

The admissible curve class contains simple loops inside the domain and
simple arcs whose two distinct endpoints lie on the surface.  Both reduce
to one cycle problem on a directed graph: domain nodes are connected by
26-neighbor moves carrying the midpoint-rule circulation of the screened
field as weight and the Euclidean step as length, and a virtual hub with
zero-weight zero-length links to every surface-layer node turns each
boundary-to-boundary arc into a cycle through the hub.

The maximum ratio  max_cycles sum(w) / sum(len)  is found with policy
iteration (Howard): repeatedly evaluate the cycle ratio and node
potentials of the current successor policy, then switch any node to an
edge that improves first the reachable cycle ratio, then the potential.
On the strongly connected graphs built here the terminal ratio is the
global optimum and the terminal potentials certify it: one relaxation
pass at ratio + tol finds no improving edge, hence no better cycle.

The meridian half-disc reduction of the ball benchmark runs the same
search on a 2D grid with the in-plane components of the closed-form
field.
"""

from dataclasses import dataclass, field as dfield

import numpy as np

from .errors import EmptyDomain, NonPositiveRadius, SolverDiverged
from .fields import curve_length, line_integral
from .london import analytic_ball_B0

_OFFSETS_3D = np.array(
    [(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)
     if (i, j, k) > (0, 0, 0)]
)
_OFFSETS_2D = np.array([(1, 0), (0, 1), (1, 1), (1, -1)])

MAX_POLICY_ITERS = 10_000


# ---------------------------------------------------------------------------
# curve container
# ---------------------------------------------------------------------------

@dataclass
class CurveCurrent:
    """Oriented polyline current: a loop, or an arc anchored on the surface."""

    vertices: np.ndarray
    closed: bool
    endpoints_on_boundary: bool = False
    multiplicity: int = 1

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be a positive integer")

    def length(self):
        return curve_length(self)

    def check(self, mesh=None):
        """Verify the admissible-class invariants; raises ValueError."""
        v = self.vertices
        seg = np.linalg.norm(v[1:] - v[:-1], axis=1)
        if len(v) < 2 or (seg < 1e-14).any() or self.length() <= 0:
            raise ValueError("curve must have distinct consecutive vertices")
        uniq = np.unique(np.round(v / max(seg.min(), 1e-12) * 4).astype(np.int64), axis=0)
        if len(uniq) != len(v):
            raise ValueError("curve vertices must not self-intersect")
        if not self.closed:
            if not self.endpoints_on_boundary:
                raise ValueError("open curves must have endpoints on the boundary")
            if np.allclose(v[0], v[-1]):
                raise ValueError("arc endpoints must be distinct")
            if mesh is not None:
                d = mesh.shape_obj.sdf(np.stack([v[0], v[-1]]))
                if (np.abs(d) > mesh.h + 1e-12).any():
                    raise ValueError("arc endpoints must lie within h of the surface")
        return True


# ---------------------------------------------------------------------------
# graph construction
# ---------------------------------------------------------------------------

@dataclass
class RatioGraph:
    """Directed edge list over domain nodes plus one virtual boundary hub."""

    coords: np.ndarray        # (n_nodes, dim) real-node coordinates
    is_boundary: np.ndarray   # (n_nodes,) bool
    tails: np.ndarray
    heads: np.ndarray
    w: np.ndarray
    ell: np.ndarray
    hub: int                  # node id of the hub (== n_nodes)
    mesh: object = None
    extras: dict = dfield(default_factory=dict)

    @property
    def n_nodes(self):
        return len(self.coords) + 1

    @property
    def n_edges(self):
        return len(self.tails)


def _edge_midpoint_values(full, offset):
    """Mean of a node array over the corner set adjacent to the midpoint of
    edges with the given integer offset; equals trilinear interpolation of
    the node field at the midpoint."""
    dim = len(offset)
    sl_from = tuple(slice(None, -1) if offset[ax] == 1 else
                    (slice(1, None) if offset[ax] == -1 else slice(None))
                    for ax in range(dim))
    acc = None
    count = 0
    for corner in np.ndindex(*[2 if offset[ax] != 0 else 1 for ax in range(dim)]):
        sl = []
        for ax in range(dim):
            if offset[ax] == 0:
                sl.append(sl_from[ax])
            else:
                step = corner[ax]
                if offset[ax] == 1:
                    sl.append(slice(step, full.shape[ax] - 1 + step))
                else:
                    sl.append(slice(1 - step, full.shape[ax] - step))
        val = full[tuple(sl)]
        acc = val.copy() if acc is None else acc + val
        count += 1
    return acc / count


def _build_edges(node_id_grid, is_bnd_grid, comp_stacks, offsets, h):
    """Directed edges over 26-(or 8-)neighbor moves, both orientations.

    Edges between two boundary-layer nodes are dropped: arcs meet the
    surface only at their endpoints and loops stay in the domain.
    """
    dim = node_id_grid.ndim
    tails, heads, ws, ells = [], [], [], []
    for off in offsets:
        sl_from = tuple(slice(None, -1) if off[ax] == 1 else
                        (slice(1, None) if off[ax] == -1 else slice(None))
                        for ax in range(dim))
        sl_to = tuple(slice(1, None) if off[ax] == 1 else
                      (slice(None, -1) if off[ax] == -1 else slice(None))
                      for ax in range(dim))
        a = node_id_grid[sl_from]
        b = node_id_grid[sl_to]
        ok = (a >= 0) & (b >= 0) & ~(is_bnd_grid[sl_from] & is_bnd_grid[sl_to])
        if not ok.any():
            continue
        step = h * np.asarray(off, dtype=float)
        wmid = np.zeros(a.shape)
        for ax in range(dim):
            if off[ax] != 0:
                wmid += step[ax] * _edge_midpoint_values(comp_stacks[ax], off)
        aa = a[ok].ravel()
        bb = b[ok].ravel()
        wv = wmid[ok].ravel()
        lv = np.full(len(aa), np.linalg.norm(step))
        tails.append(np.concatenate([aa, bb]))
        heads.append(np.concatenate([bb, aa]))
        ws.append(np.concatenate([wv, -wv]))
        ells.append(np.concatenate([lv, lv]))
    if not tails:
        return (np.zeros(0, int),) * 2 + (np.zeros(0),) * 2
    return (np.concatenate(tails), np.concatenate(heads),
            np.concatenate(ws), np.concatenate(ells))


def build_ratio_graph(mesh, B0):
    """Ratio graph of the domain for a node-stored field."""
    node_mask = mesh.inside | mesh.boundary
    n = int(node_mask.sum())
    if mesh.n_interior == 0:
        raise EmptyDomain("ratio graph needs at least one interior node")
    node_id = np.full(mesh.nshape, -1, dtype=np.int64)
    node_id[node_mask] = np.arange(n)
    coords = mesh.node_points(np.argwhere(node_mask))
    is_bnd = mesh.boundary[node_mask]

    comps = [np.asarray(c) for c in B0.comps]
    tails, heads, w, ell = _build_edges(node_id, mesh.boundary, comps, _OFFSETS_3D, mesh.h)

    hub = n
    bids = np.flatnonzero(is_bnd)
    tails = np.concatenate([tails, bids, np.full(len(bids), hub)])
    heads = np.concatenate([heads, np.full(len(bids), hub), bids])
    w = np.concatenate([w, np.zeros(2 * len(bids))])
    ell = np.concatenate([ell, np.zeros(2 * len(bids))])
    return RatioGraph(coords=coords, is_boundary=is_bnd, tails=tails, heads=heads,
                      w=w, ell=ell, hub=hub, mesh=mesh)


# ---------------------------------------------------------------------------
# Howard policy iteration for the maximum-ratio cycle
# ---------------------------------------------------------------------------

def _policy_cycles(succ):
    """Cycle decomposition of a functional graph.

    Returns (cycle_id per node, list of cycles as node lists); nodes not on
    a cycle get the id of the cycle they flow into.
    """
    n = len(succ)
    state = np.zeros(n, dtype=np.int8)   # 0 new, 1 on stack, 2 done
    cyc_id = np.full(n, -1, dtype=np.int64)
    cycles = []
    for start in range(n):
        if state[start]:
            continue
        path = []
        u = start
        while state[u] == 0:
            state[u] = 1
            path.append(u)
            u = succ[u]
        if state[u] == 1:
            # new cycle: nodes from u to end of path
            k = path.index(u)
            cid = len(cycles)
            cycles.append(path[k:])
            for node in path[k:]:
                cyc_id[node] = cid
                state[node] = 2
            tail = path[:k]
        else:
            tail = path
        cid = cyc_id[u]
        for node in reversed(tail):
            cyc_id[node] = cid
            state[node] = 2
    return cyc_id, cycles


def _values_for_policy(succ, pw, pl, cyc_id, cycles, ell_min):
    """Per-node cycle ratio lam and potential v under a fixed policy."""
    n = len(succ)
    lam_c = np.empty(len(cycles))
    for cid, cyc in enumerate(cycles):
        sw = pw[cyc].sum()
        sl = pl[cyc].sum()
        lam_c[cid] = sw / sl if sl > ell_min else -np.inf
    lam = lam_c[cyc_id]

    v = np.zeros(n)
    done = np.zeros(n, dtype=bool)
    for cid, cyc in enumerate(cycles):
        root = cyc[0]
        v[root] = 0.0
        done[root] = True
        lam_here = lam_c[cid]
        if not np.isfinite(lam_here):
            for node in cyc:
                v[node] = 0.0
                done[node] = True
            continue
        # walk the cycle backwards from the root: v(u) = w - lam*l + v(succ(u))
        order = cyc[1:][::-1]
        for u in order:
            v[u] = pw[u] - lam_here * pl[u] + v[succ[u]]
            done[u] = True
    # tree nodes in reverse flow order
    for u in range(n):
        if done[u]:
            continue
        chain = []
        x = u
        while not done[x]:
            chain.append(x)
            x = succ[x]
        for node in reversed(chain):
            lam_here = lam[node]
            if np.isfinite(lam_here):
                v[node] = pw[node] - lam_here * pl[node] + v[succ[node]]
            else:
                v[node] = 0.0
            done[node] = True
    return lam, v


def max_ratio_cycle_arrays(n_nodes, tails, heads, w, ell, tol=1e-4, ell_min=0.0):
    """Howard policy iteration; returns (lam, cycle node list, v, certified)."""
    if len(tails) == 0:
        return 0.0, [], np.zeros(n_nodes), True
    order = np.argsort(tails, kind="stable")
    tails = tails[order]
    heads = heads[order]
    w = w[order]
    ell = ell[order]
    starts = np.searchsorted(tails, np.arange(n_nodes + 1))
    if (starts[1:] == starts[:-1]).any():
        raise SolverDiverged("ratio graph has a node without outgoing edges")

    scale = max(np.abs(w).max(), 1e-300)
    eps_lam = 1e-13 * max(scale / max(ell.max(), 1e-300), 1.0)
    eps_v = 1e-13 * max(scale, 1.0) * 10

    # initial policy: heaviest edge per node among positive-length edges, so
    # no zero-length cycle can exist at the start (the hub, whose edges are
    # all zero-length, may take any of its edges)
    real = ell > 0.0
    order_real = np.flatnonzero(real)
    key = np.lexsort((-order_real, w[real], tails[real]))
    pi = np.full(n_nodes, -1, dtype=np.int64)
    pi[tails[real][key]] = order_real[key]
    missing = np.flatnonzero(pi < 0)
    if len(missing):
        first_edge = np.full(n_nodes, -1, dtype=np.int64)
        first_edge[tails[::-1]] = np.arange(len(tails))[::-1]
        pi[missing] = first_edge[missing]

    for _ in range(MAX_POLICY_ITERS):
        succ = heads[pi]
        pw = w[pi]
        pl = ell[pi]
        cyc_id, cycles = _policy_cycles(succ)
        lam, v = _values_for_policy(succ, pw, pl, cyc_id, cycles, ell_min)

        lam_h = lam[heads]
        with np.errstate(invalid="ignore"):
            cand = np.where(np.isfinite(lam_h), w - lam_h * ell + v[heads], -np.inf)
            lam_t = lam[tails]
            v_t = v[tails]
            better = (lam_h > lam_t + eps_lam) | (
                (np.abs(lam_h - lam_t) <= eps_lam) & (cand > v_t + eps_v)
            )
        # never close a two-edge zero-length cycle (e.g. node -> hub -> node)
        zero_len = ell <= 0.0
        if zero_len.any():
            head_pi = pi[heads]
            closes = zero_len & (heads[head_pi] == tails) & (ell[head_pi] <= 0.0)
            better &= ~closes
        if not better.any():
            break
        # best improving edge per node: maximize (lam_h, cand), prefer low index
        sel = np.flatnonzero(better)
        key = np.lexsort((-sel, cand[sel], lam_h[sel], tails[sel]))
        sel = sel[key]
        ts = tails[sel]
        last = np.flatnonzero(np.r_[ts[1:] != ts[:-1], True])
        pi[ts[last]] = sel[last]
    else:
        raise SolverDiverged("policy iteration did not terminate")

    finite = np.isfinite(lam)
    if not finite.any() or lam[finite].max() <= 0.0:
        return 0.0, [], v, True
    lam_star = float(lam[finite].max())

    # among optimal policy cycles: shortest length, then smallest node id
    best = None
    for cid, cyc in enumerate(cycles):
        sl = ell[pi[cyc]].sum()
        sw = w[pi[cyc]].sum()
        if sl <= ell_min:
            continue
        ratio = sw / sl
        if ratio >= lam_star - max(eps_lam, 1e-12 * abs(lam_star)):
            rank = (sl, min(cyc))
            if best is None or rank < best[0]:
                best = (rank, cyc)
    cycle = best[1] if best else []

    # certificate: one relaxation pass at lam* + tol finds no improving edge
    mod = w - (lam_star + tol) * ell + v[heads] - v[tails]
    certified = bool((mod <= eps_v + tol * 1e-6 + 1e-12 * scale).all())
    return lam_star, cycle, v, certified


def max_ratio_cycle(graph, tol=1e-4):
    """Maximum-ratio cycle of a RatioGraph: (value, cycle node ids)."""
    lam, cycle, _, certified = max_ratio_cycle_arrays(
        graph.n_nodes, graph.tails, graph.heads, graph.w, graph.ell,
        tol=tol, ell_min=1e-12,
    )
    graph.extras["certified"] = certified
    return lam, cycle


# ---------------------------------------------------------------------------
# curve extraction and the public search
# ---------------------------------------------------------------------------

def _cycle_to_curve(graph, cycle):
    """Convert a cycle (possibly through the hub) into a CurveCurrent.

    Hub cycles become boundary-anchored arcs; vertices in the boundary
    layer are projected onto the exact surface so arcs satisfy the
    class invariants.
    """
    if not cycle:
        return None
    cycle = list(cycle)
    if graph.hub in cycle:
        k = cycle.index(graph.hub)
        nodes = cycle[k + 1:] + cycle[:k]
        closed = False
    else:
        # deterministic starting point
        k = int(np.argmin(cycle))
        nodes = cycle[k:] + cycle[:k]
        closed = True
    verts = graph.coords[nodes].astype(float)
    if graph.mesh is not None:
        bsel = graph.is_boundary[nodes]
        if bsel.any():
            foot, _ = graph.mesh.shape_obj.closest_point(verts[bsel])
            verts[bsel] = foot
    return CurveCurrent(vertices=verts, closed=closed,
                        endpoints_on_boundary=not closed)


def norm_star(mesh, B0, tol=1e-4):
    """Critical-field constant of a solved screened field on a mesh.

    Returns (value, CurveCurrent); the value is the circulation-to-length
    ratio of the extracted curve recomputed with the midpoint rule, which
    agrees with the graph optimum to the discretization tolerance.
    """
    graph = build_ratio_graph(mesh, B0)
    lam, cycle = max_ratio_cycle(graph, tol=tol)
    if not cycle:
        return 0.0, None
    curve = _cycle_to_curve(graph, cycle)
    curve.check(mesh)
    value = line_integral(B0, curve) / curve.length()
    graph.extras["lambda_star"] = lam
    return value, curve


# ---------------------------------------------------------------------------
# meridian half-disc reduction for the ball
# ---------------------------------------------------------------------------

def halfdisc_search(R, resolution=128, tol=1e-4):
    """2D search over the meridian half-disc of the ball benchmark.

    Returns (value, vertices2d (m, 2) in the (x, z) plane, closed flag).
    """
    if R <= 0:
        raise NonPositiveRadius(f"ball radius must be > 0, got {R}")
    h2 = 2.0 * R / resolution
    xs = h2 * np.arange(0, int(np.floor(R / h2 + 1e-12)) + 2)
    zs = h2 * np.arange(-(int(np.floor(R / h2 + 1e-12)) + 1),
                        int(np.floor(R / h2 + 1e-12)) + 2)
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    inside = (X**2 + Z**2 < R**2)
    grown = np.zeros_like(inside)
    grown[:-1, :] |= inside[1:, :]
    grown[1:, :] |= inside[:-1, :]
    grown[:, :-1] |= inside[:, 1:]
    grown[:, 1:] |= inside[:, :-1]
    grown[1:, 1:] |= inside[:-1, :-1]
    grown[:-1, :-1] |= inside[1:, 1:]
    grown[1:, :-1] |= inside[:-1, 1:]
    grown[:-1, 1:] |= inside[1:, :-1]
    boundary = grown & ~inside & (X**2 + Z**2 >= R**2)
    node_mask = inside | boundary
    n = int(node_mask.sum())
    node_id = np.full(node_mask.shape, -1, dtype=np.int64)
    node_id[node_mask] = np.arange(n)

    pts3 = np.stack([X, np.zeros_like(X), Z], axis=-1).reshape(-1, 3)
    r3 = np.linalg.norm(pts3, axis=1)
    vals = np.zeros((len(pts3), 3))
    ok = r3 <= R
    vals[ok] = analytic_ball_B0(R, pts3[ok])
    vx = vals[:, 0].reshape(X.shape)
    vz = vals[:, 2].reshape(X.shape)

    tails, heads, w, ell = _build_edges(node_id, boundary, [vx, vz], _OFFSETS_2D, h2)
    hub = n
    is_bnd = boundary[node_mask]
    bids = np.flatnonzero(is_bnd)
    tails = np.concatenate([tails, bids, np.full(len(bids), hub)])
    heads = np.concatenate([heads, np.full(len(bids), hub), bids])
    w = np.concatenate([w, np.zeros(2 * len(bids))])
    ell = np.concatenate([ell, np.zeros(2 * len(bids))])

    lam, cycle, _, certified = max_ratio_cycle_arrays(
        n + 1, tails, heads, w, ell, tol=tol, ell_min=1e-12)
    if not cycle:
        return 0.0, np.zeros((0, 2)), False
    coords = np.stack([X[node_mask], Z[node_mask]], axis=1)
    cycle = list(cycle)
    if hub in cycle:
        k = cycle.index(hub)
        nodes = cycle[k + 1:] + cycle[:k]
        closed = False
    else:
        k = int(np.argmin(cycle))
        nodes = cycle[k:] + cycle[:k]
        closed = True
    verts = coords[nodes]
    onb = is_bnd[nodes]
    if onb.any():
        rad = np.linalg.norm(verts[onb], axis=1)
        verts[onb] *= (R / rad)[:, None]

    # recompute the ratio on the extracted polyline with the analytic field
    vv = verts if not closed else np.vstack([verts, verts[:1]])
    seg = vv[1:] - vv[:-1]
    mid = 0.5 * (vv[1:] + vv[:-1])
    mid3 = np.stack([mid[:, 0], np.zeros(len(mid)), mid[:, 1]], axis=1)
    rm = np.linalg.norm(mid3, axis=1)
    mid3[rm > R] *= (R / rm[rm > R])[:, None]
    f = analytic_ball_B0(R, mid3)
    value = float((f[:, 0] * seg[:, 0] + f[:, 2] * seg[:, 1]).sum()
                  / np.linalg.norm(seg, axis=1).sum())
    return value, verts, closed


def norm_star_halfdisc(R, resolution=128, tol=1e-4):
    """Value of the 2D meridian-reduction search."""
    value, _, _ = halfdisc_search(R, resolution, tol)
    return value
