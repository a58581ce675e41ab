"""Descent on the discrete Ginzburg-Landau energy and vortex experiments.

The objective is gl_energy: the physical energy in the working gauge,
smooth in (u, A').  Its gradient is assembled analytically edge by edge
and is verified against central finite differences in the tests.  Plain
gradient descent with Armijo backtracking keeps every accepted step a
descent step; an optional heavy-ball term (off by default) speeds up the
stiff sweeps.  A Coulomb projection (div A' = 0 at grid nodes, exact for
the staggered divergence) runs on a fixed schedule; it is a pure gauge
transformation and leaves every reported quantity unchanged.

Vortex seeding builds an order parameter whose plaquette winding is
2 pi exactly on the faces pierced by a prescribed curve: the phase is
half the solid angle subtended by the curve (closed through the far
exterior when it is a boundary-to-boundary arc), and the modulus ramps
linearly from the core.
"""

from dataclasses import dataclass, field as dfield

import numpy as np
from scipy.sparse import linalg as spla

from .errors import (
    CoreTooSmall,
    CurveOutsideDomain,
    LineSearchStalled,
    SolverDiverged,
    VortexPresent,
)
from .fields import ComplexField, VectorField, curl_arrays, curl_t_arrays, divergence, grad_arrays
from .glcore import (
    GLState,
    _bg_M_faces,
    _bg_beta,
    gl_energy,
    gl_total_energy,
    meissner_state,
    vorticity,
)
from .london import hc1_leading
from .normstar import CurveCurrent, norm_star


# ---------------------------------------------------------------------------
# options and helpers
# ---------------------------------------------------------------------------

@dataclass
class MinimizeOptions:
    max_iters: int = 2000
    grad_tol: float = 1e-6           # on the h^3-normalized RMS gradient
    step_rule: str = "backtracking"  # or "fixed"
    eta: float = 0.1                 # step for the fixed rule
    armijo_c1: float = 1e-4
    shrink: float = 0.5
    momentum: float = 0.0            # heavy-ball coefficient, off by default
    gauge_fix_every: int = 0         # 0 disables the periodic projection
    record_history: bool = False
    plateau_tol: float = 0.0         # early stop on relative energy stall
    plateau_window: int = 25

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be > 0")
        if self.step_rule == "fixed" and self.eta <= 0:
            raise ValueError("fixed step rule needs eta > 0")


def energy_gradient(state):
    """Gradient of gl_energy w.r.t. (u, A'): complex node array (the
    Wirtinger gradient 2 dE/d conj(u)) and three edge arrays."""
    mesh = state.mesh
    h = mesh.h
    h2 = h * h
    h3 = h2 * h
    u = state.u.values
    beta = _bg_beta(state) if state.hex > 0.0 else None
    du = np.zeros(mesh.nshape, dtype=complex)
    dA = [np.zeros_like(a) for a in state.A.comps]

    for ax in range(3):
        a = state.A.comps[ax] if beta is None else state.A.comps[ax] + state.hex * beta[ax]
        w = mesh.edge_weights[ax]
        sl_p = [slice(None)] * 3
        sl_m = [slice(None)] * 3
        sl_p[ax] = slice(1, None)
        sl_m[ax] = slice(0, -1)
        up = u[tuple(sl_m)]
        uq = u[tuple(sl_p)]
        link = np.exp(-1j * h * a)
        d = (uq * link - up) / h
        du[tuple(sl_m)] -= w * h2 * d
        du[tuple(sl_p)] += w * h2 * d * np.conj(link)
        dA[ax] += w * h3 * np.imag(np.conj(d) * uq * link)

    mod2 = u.real**2 + u.imag**2
    du += -(mesh.node_weights * h3 / state.eps**2) * (1.0 - mod2) * u

    curls = list(curl_arrays(state.A.comps, h))
    if state.hex > 0.0:
        Mf = _bg_M_faces(state)
        for ax in range(3):
            curls[ax] = curls[ax] + state.hex * Mf[ax]
    ct = curl_t_arrays(tuple(curls), h)
    for ax in range(3):
        dA[ax] += h3 * ct[ax]
    return du, tuple(dA)


def grad_rms(mesh, du, dA):
    """h^3-normalized RMS force; mesh-size independent stopping metric."""
    g2 = float((du.real**2 + du.imag**2).sum() + sum((a**2).sum() for a in dA))
    n = du.size + sum(a.size for a in dA)
    return np.sqrt(g2 / n) / mesh.h**3


def coulomb_project(state, tol=1e-8, maxiter=20_000):
    """Gauge transformation making div A' = 0 at every interior grid node
    (staggered divergence); returns the transformed state."""
    mesh = state.mesh
    h = mesh.h
    div = divergence(state.A).values
    free = np.zeros(mesh.nshape, dtype=bool)
    free[1:-1, 1:-1, 1:-1] = True
    fflat = np.flatnonzero(free.ravel())

    def lap(xv):
        p = np.zeros(mesh.nshape)
        p.ravel()[fflat] = xv
        out = 6.0 * p
        out[1:-1, 1:-1, 1:-1] -= (
            p[2:, 1:-1, 1:-1] + p[:-2, 1:-1, 1:-1]
            + p[1:-1, 2:, 1:-1] + p[1:-1, :-2, 1:-1]
            + p[1:-1, 1:-1, 2:] + p[1:-1, 1:-1, :-2]
        )
        return out.ravel()[fflat] / h**2

    rhs = div.ravel()[fflat]
    op = spla.LinearOperator((len(fflat), len(fflat)), matvec=lap, dtype=float)
    chi, info = spla.cg(op, rhs, rtol=tol, atol=0.0, maxiter=maxiter)
    if info != 0:
        raise SolverDiverged("gauge projection did not converge")
    chi_full = np.zeros(mesh.nshape)
    chi_full.ravel()[fflat] = chi
    g = grad_arrays(chi_full, h)
    u2 = ComplexField(mesh, state.u.values * np.exp(1j * chi_full))
    A2 = VectorField(mesh, "edge", tuple(a + gg for a, gg in zip(state.A.comps, g)))
    return GLState(mesh, u2, A2, state.eps, state.hex, state.meissner)


# ---------------------------------------------------------------------------
# descent
# ---------------------------------------------------------------------------

def minimize(state, opts=None):
    """Gradient descent with backtracking; returns (state, trace dict).

    The energy trace is nonincreasing by construction.  Termination: the
    normalized gradient drops below grad_tol, max_iters is reached, or the
    optional energy-plateau rule fires; the reason is reported in the
    trace.
    """
    opts = opts or MinimizeOptions()
    mesh = state.mesh
    s = state.copy()
    u = s.u.values
    A = [a.copy() for a in s.A.comps]

    def mk_state():
        return GLState(mesh, ComplexField(mesh, u), VectorField(mesh, "edge", tuple(A)),
                       s.eps, s.hex, s.meissner)

    energy = gl_energy(mk_state())
    history = [energy] if opts.record_history else None
    recent = [energy]
    step = opts.eta if opts.step_rule == "fixed" else 1.0
    mom_u = np.zeros_like(u)
    mom_A = [np.zeros_like(a) for a in A]
    reason = "max_iters"
    gnorm = np.inf
    iters = 0

    for it in range(opts.max_iters):
        iters = it + 1
        cur = mk_state()
        du, dA = energy_gradient(cur)
        gnorm = grad_rms(mesh, du, dA)
        if gnorm <= opts.grad_tol:
            reason = "grad_tol"
            iters = it
            break
        dir_u = -du + opts.momentum * mom_u
        dir_A = [-g + opts.momentum * m for g, m in zip(dA, mom_A)]
        slope = float(
            (du.real * dir_u.real + du.imag * dir_u.imag).sum()
            + sum((g * d).sum() for g, d in zip(dA, dir_A))
        )
        if slope >= 0.0:
            # momentum turned uphill: restart with plain steepest descent
            dir_u = -du
            dir_A = [-g for g in dA]
            slope = float(-(du.real**2 + du.imag**2).sum()
                          - sum((g**2).sum() for g in dA))

        if opts.step_rule == "fixed":
            t = opts.eta
            u = u + t * dir_u
            A = [a + t * d for a, d in zip(A, dir_A)]
            energy = gl_energy(mk_state())
        else:
            t = step * 2.0
            accepted = False
            for _ in range(60):
                u_try = u + t * dir_u
                A_try = [a + t * d for a, d in zip(A, dir_A)]
                e_try = gl_energy(GLState(mesh, ComplexField(mesh, u_try),
                                          VectorField(mesh, "edge", tuple(A_try)),
                                          s.eps, s.hex, s.meissner))
                if e_try <= energy + opts.armijo_c1 * t * slope:
                    accepted = True
                    break
                t *= opts.shrink
            if not accepted:
                if gnorm <= 10 * opts.grad_tol:
                    reason = "grad_tol"
                    break
                raise LineSearchStalled(
                    f"no descent step found at iteration {it} (grad {gnorm:.3e})"
                )
            mom_u = u_try - u
            mom_A = [at - a for at, a in zip(A_try, A)]
            u = u_try
            A = A_try
            energy = e_try
            step = t

        if history is not None:
            history.append(energy)
        recent.append(energy)
        if len(recent) > opts.plateau_window + 1:
            recent.pop(0)
        if opts.gauge_fix_every and (it + 1) % opts.gauge_fix_every == 0:
            fixed = coulomb_project(mk_state())
            u = fixed.u.values
            A = list(fixed.A.comps)
        if opts.plateau_tol and len(recent) > opts.plateau_window:
            if abs(recent[0] - energy) <= opts.plateau_tol * max(abs(energy), 1e-300):
                reason = "plateau"
                break

    out = mk_state()
    trace = {
        "energy": energy,
        "grad_norm": gnorm,
        "iterations": iters,
        "reason": reason,
    }
    if history is not None:
        trace["history"] = history
    return out, trace


# ---------------------------------------------------------------------------
# vortex seeding
# ---------------------------------------------------------------------------

def _solid_angle(pts, loop):
    """Solid angle subtended at each point by a closed polygonal loop,
    via a triangle fan and the standard tangent formula."""
    apex = loop.mean(axis=0)
    total = np.zeros(len(pts))
    nv = len(loop)
    for i in range(nv):
        a = loop[i]
        b = loop[(i + 1) % nv]
        r1 = apex[None, :] - pts
        r2 = a[None, :] - pts
        r3 = b[None, :] - pts
        n1 = np.linalg.norm(r1, axis=1)
        n2 = np.linalg.norm(r2, axis=1)
        n3 = np.linalg.norm(r3, axis=1)
        det = np.einsum("ij,ij->i", r1, np.cross(r2, r3))
        den = (
            n1 * n2 * n3
            + np.einsum("ij,ij->i", r1, r2) * n3
            + np.einsum("ij,ij->i", r2, r3) * n1
            + np.einsum("ij,ij->i", r3, r1) * n2
        )
        total += 2.0 * np.arctan2(det, den)
    return total


def _point_segment_distance(pts, a, b):
    ab = b - a
    den = float(ab @ ab)
    if den < 1e-300:
        return np.linalg.norm(pts - a[None, :], axis=1)
    t = np.clip(((pts - a[None, :]) @ ab) / den, 0.0, 1.0)
    proj = a[None, :] + t[:, None] * ab[None, :]
    return np.linalg.norm(pts - proj, axis=1)


def _close_through_exterior(mesh, verts):
    """Append a far-exterior return path to an arc, turning it into a loop
    whose extra legs stay well away from the domain."""
    shape = mesh.shape_obj
    diam = 2.0 * float(shape.half_extent().max())
    b0 = verts[0]
    b1 = verts[-1]
    n0 = shape.normal(b0[None, :])[0]
    n1 = shape.normal(b1[None, :])[0]
    out1 = b1 + 2.0 * diam * n1
    out0 = b0 + 2.0 * diam * n0
    chord = out0 - out1
    ax = int(np.argmin(np.abs(chord)))
    side = np.zeros(3)
    side[ax] = 4.0 * diam
    mid = 0.5 * (out0 + out1) + side
    return np.vstack([verts, out1, mid, out0])


def seed_vortex(mesh, curve, core_radius):
    """Order parameter with winding 2 pi around the prescribed curve.

    The phase is half the solid angle of the (exterior-closed) loop; the
    modulus is min(1, dist / core_radius) of the distance to the curve.
    """
    h = mesh.h
    if core_radius < 2.0 * h:
        raise CoreTooSmall(f"core_radius {core_radius} must be >= 2 h = {2 * h}")
    verts, closed, mult = (np.atleast_2d(np.asarray(curve.vertices, float)),
                           curve.closed, curve.multiplicity) \
        if hasattr(curve, "vertices") else (np.atleast_2d(np.asarray(curve, float)), False, 1)
    d = mesh.shape_obj.sdf(verts)
    if (d > h * np.sqrt(3.0) + 1e-12).any():
        raise CurveOutsideDomain("seed curve leaves the domain closure")

    loop = verts if closed else _close_through_exterior(mesh, verts)

    nodes = mesh.node_points(np.argwhere(np.ones(mesh.nshape, dtype=bool)))
    u = np.empty(len(nodes), dtype=complex)
    chunk = 200_000
    for lo in range(0, len(nodes), chunk):
        pts = nodes[lo:lo + chunk]
        theta = 0.5 * _solid_angle(pts, loop)
        dist = np.full(len(pts), np.inf)
        seg_v = np.vstack([verts, verts[:1]]) if closed else verts
        for i in range(len(seg_v) - 1):
            dist = np.minimum(dist, _point_segment_distance(pts, seg_v[i], seg_v[i + 1]))
        rho = np.minimum(1.0, dist / core_radius)
        u[lo:lo + chunk] = rho * np.exp(1j * mult * theta)
    return ComplexField(mesh, u.reshape(mesh.nshape))


def is_vortexless(state, min_u_threshold=0.5):
    """Machine-checkable certificate: all plaquette windings vanish and
    min |u| over the interior stays above the threshold."""
    vf = vorticity(state)
    quantized = all(
        np.abs(np.round(w / (2 * np.pi))).max() == 0 if w.size else True
        for w in vf.windings
    )
    min_u = float(np.abs(state.u.values)[state.mesh.inside].min())
    return bool(quantized and min_u >= min_u_threshold), min_u, vf


# ---------------------------------------------------------------------------
# critical-field sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    rows: list
    branch_rows: list
    hc1_bracket: tuple
    hc1_numeric: float
    hc1_leading_value: float
    warnings: list = dfield(default_factory=list)

    def as_dict(self):
        return {
            "rows": self.rows,
            "hc1_numeric_bracket": list(self.hc1_bracket),
            "hc1_numeric": self.hc1_numeric,
            "hc1_leading": self.hc1_leading_value,
            "ratio": (self.hc1_numeric / self.hc1_leading_value
                      if self.hc1_numeric and self.hc1_leading_value else None),
            "warnings": self.warnings,
        }


def perturbed_meissner(mesh, meissner, eps, hex, amplitude=0.05, seed=0):
    """Meissner start with a reproducible random perturbation."""
    rng = np.random.default_rng(seed)
    s = meissner_state(mesh, meissner, eps, hex)
    du = amplitude * (rng.standard_normal(mesh.nshape)
                      + 1j * rng.standard_normal(mesh.nshape))
    u = ComplexField(mesh, s.u.values + np.where(mesh.inside, du, 0.0))
    A = VectorField(mesh, "edge", tuple(
        amplitude * rng.standard_normal(a.shape) * w
        for a, w in zip(s.A.comps, [np.minimum(ew, 1.0) for ew in mesh.edge_weights])
    ))
    return GLState(mesh, u, A, eps, hex, meissner)


def hc1_sweep(mesh, meissner, eps, hex_list, opts=None, seed_curve=None,
              core_radius=None, norm_star_value=None):
    """Locate the numerical first critical field by energy crossover.

    For each applied strength: relax both the vortexless start and the
    seeded-vortex start (the extremal curve of the ratio search, nudged
    off the grid axes so the core does not sit on nodes), and record which
    basin wins.  The crossover is bracketed by the last strength whose
    winner is vortexless and the first whose winner carries vorticity.
    """
    hex_list = list(hex_list)
    if hex_list != sorted(hex_list):
        raise ValueError("hex_list must be ascending")
    opts = opts or MinimizeOptions()
    if seed_curve is None or norm_star_value is None:
        value, curve = norm_star(mesh, meissner.B0)
        seed_curve = seed_curve if seed_curve is not None else curve
        norm_star_value = norm_star_value if norm_star_value is not None else value
    if core_radius is None:
        core_radius = max(2.0 * mesh.h, eps)

    shift = np.array([mesh.h / 2.0, mesh.h / 2.0, 0.0])
    seed_verts = seed_curve.vertices + shift[None, :]
    seed_poly = CurveCurrent(seed_verts, closed=seed_curve.closed,
                             endpoints_on_boundary=seed_curve.endpoints_on_boundary)
    useed = seed_vortex(mesh, seed_poly, core_radius)

    hc1_lead = float(hc1_leading(eps, norm_star_value))
    rows = []
    branch_rows = []
    warnings = []
    last_vortexless = None
    first_vortex = None
    seeded_has_won = False
    for hx in hex_list:
        hx = float(hx)
        results = {}
        for label in ("meissner", "seeded"):
            if label == "meissner":
                s0 = meissner_state(mesh, meissner, eps, hx)
            else:
                s0 = GLState(mesh, ComplexField(mesh, useed.values.copy()),
                             VectorField.zeros(mesh, "edge"), eps, hx, meissner)
            term, trace = minimize(s0, opts)
            flag, min_u, vf = is_vortexless(term)
            rep = gl_total_energy(term)
            results[label] = {
                "hex": hx,
                "start": label,
                "energy": float(trace["energy"]),
                "total_energy": float(rep.total),
                "meissner_energy": float(hx**2 * meissner.J0),
                "vortex_mass": float(vf.total_mass()),
                "min_abs_u": float(min_u),
                "vortexless": bool(flag),
                "iterations": int(trace["iterations"]),
                "reason": trace["reason"],
            }
            branch_rows.append(results[label])
        winner = min(results.values(), key=lambda r: r["energy"])
        rows.append({
            "hex": hx,
            "winner": winner["start"],
            "total_energy": winner["total_energy"],
            "meissner_energy": winner["meissner_energy"],
            "vortex_mass": winner["vortex_mass"],
            "min_abs_u": winner["min_abs_u"],
            "vortexless": winner["vortexless"],
        })
        if winner["vortexless"]:
            if seeded_has_won and first_vortex is not None:
                warnings.append(
                    f"non-monotone crossover: vortexless winner at hex={hx} "
                    f"after vortex-favorable hex={first_vortex}"
                )
            last_vortexless = hx
        elif first_vortex is None:
            first_vortex = hx
            seeded_has_won = True
    bracket = (last_vortexless, first_vortex)
    hc1_numeric = None
    if last_vortexless is not None and first_vortex is not None and last_vortexless < first_vortex:
        hc1_numeric = 0.5 * (last_vortexless + first_vortex)
    return SweepResult(rows=rows, branch_rows=branch_rows, hc1_bracket=bracket,
                       hc1_numeric=hc1_numeric, hc1_leading_value=hc1_lead,
                       warnings=warnings)


# ---------------------------------------------------------------------------
# convexity diagnostic
# ---------------------------------------------------------------------------

def _unwrap_phase(u):
    """Single-valued phase of a nowhere-vanishing field on the box grid,
    from branch-resolved link differences integrated along axis sweeps."""
    thetas = []
    for ax in range(3):
        sl_p = [slice(None)] * 3
        sl_m = [slice(None)] * 3
        sl_p[ax] = slice(1, None)
        sl_m[ax] = slice(0, -1)
        thetas.append(np.angle(np.conj(u[tuple(sl_m)]) * u[tuple(sl_p)]))
    phi = np.zeros(u.shape)
    phi[:, 0, 0] = np.concatenate([[0.0], np.cumsum(thetas[0][:, 0, 0])])
    phi[:, 1:, 0] = phi[:, :1, 0] + np.cumsum(thetas[1][:, :, 0], axis=1)
    phi[:, :, 1:] = phi[:, :, :1] + np.cumsum(thetas[2], axis=2)
    phi += np.angle(u[0, 0, 0])
    return phi


def convexity_diagnostic(s1, s2, c=0.2):
    """Midpoint-convexity gap of the energy between two vortexless states
    in the modulus gauge: (E1 + E2)/2 - E(midpoint).  No sign is asserted."""
    for s in (s1, s2):
        min_u = float(np.abs(s.u.values)[s.mesh.inside].min())
        if min_u < c:
            raise VortexPresent(f"state has min |u| = {min_u:.3g} < {c}")
    mesh = s1.mesh

    def eta_gauge(s):
        phi = _unwrap_phase(s.u.values)
        g = grad_arrays(phi, mesh.h)
        eta = np.abs(s.u.values).astype(complex)
        A2 = tuple(a - gg for a, gg in zip(s.A.comps, g))
        return eta, A2

    e1, a1 = eta_gauge(s1)
    e2, a2 = eta_gauge(s2)

    def energy(eta, acomps):
        return gl_energy(GLState(mesh, ComplexField(mesh, eta),
                                 VectorField(mesh, "edge", acomps),
                                 s1.eps, s1.hex, s1.meissner))

    mid = energy(0.5 * (e1 + e2), tuple(0.5 * (x + y) for x, y in zip(a1, a2)))
    return 0.5 * (energy(e1, a1) + energy(e2, a2)) - mid
