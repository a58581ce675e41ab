import numpy as np
import pytest

from glmeissner.errors import MissingMeissnerData, VortexPresent, WrongStorage
from glmeissner.fields import ComplexField, VectorField, edge_shapes, grad_arrays
from glmeissner.glcore import (
    GLState,
    check_vorticity_bound,
    free_energy,
    gauge_transform,
    gl_energy,
    gl_total_energy,
    hodge_decompose,
    hodge_reconstruction_residual,
    meissner_state,
    pairing_with_field,
    supercurrent,
    vorticity,
)
from glmeissner.london import solve_london, uniform_field
from glmeissner.mesh import build_mesh

RNG = np.random.default_rng(41)


def random_state(mesh, md, eps=0.3, hex=1.5, amp=0.5):
    u = ComplexField(mesh, 1.0 + amp * (RNG.normal(size=mesh.nshape)
                                        + 1j * RNG.normal(size=mesh.nshape)))
    A = VectorField(mesh, "edge",
                    tuple(amp * RNG.normal(size=s) for s in edge_shapes(mesh.nshape)))
    return GLState(mesh, u, A, eps, hex, md)


# -- free energy ------------------------------------------------------------------

def test_free_energy_trivial_state(ball8, london8):
    s = meissner_state(ball8, london8, 0.3, 0.0)
    assert free_energy(s) == 0.0


def test_free_energy_zero_modulus(ball8):
    s = GLState(ball8, ComplexField(ball8, np.zeros(ball8.nshape, complex)),
                VectorField.zeros(ball8, "edge"), 0.3, 0.0)
    assert free_energy(s) == pytest.approx(ball8.volume / (4 * 0.3**2))


def test_free_energy_matches_straight_loop_oracle(ball8, london8):
    # independent scalar reimplementation with explicit loops on a tiny mesh
    mesh = build_mesh({"shape": "box", "a": 1, "b": 1, "c": 1}, 0.34, pad=1)
    u = ComplexField(mesh, RNG.normal(size=mesh.nshape)
                     + 1j * RNG.normal(size=mesh.nshape))
    A = VectorField(mesh, "edge",
                    tuple(RNG.normal(size=s) for s in edge_shapes(mesh.nshape)))
    eps = 0.4
    s = GLState(mesh, u, A, eps, 0.0)
    fast = free_energy(s)

    h = mesh.h
    h3 = h**3
    slow = 0.0
    nx, ny, nz = mesh.nshape
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                w = mesh.node_weights[i, j, k]
                slow += w * h3 * (1 - abs(u.values[i, j, k]) ** 2) ** 2 / (4 * eps**2)
    for ax in range(3):
        wts = mesh.edge_weights[ax]
        comp = A.comps[ax]
        for idx in np.ndindex(comp.shape):
            q = list(idx)
            q[ax] += 1
            d = (u.values[tuple(q)] * np.exp(-1j * h * comp[idx])
                 - u.values[idx]) / h
            slow += 0.5 * wts[idx] * h3 * abs(d) ** 2
    from glmeissner.fields import curl_arrays
    curls = curl_arrays(A.comps, h)
    for ax in range(3):
        wf = mesh.face_weights[ax]
        for idx in np.ndindex(curls[ax].shape):
            slow += 0.5 * wf[idx] * h3 * curls[ax][idx] ** 2
    assert abs(fast - slow) <= 1e-12 * max(abs(slow), 1.0)


# -- report -----------------------------------------------------------------------

def test_meissner_state_total_exact(ball8, london8):
    s = meissner_state(ball8, london8, 0.3, 2.0)
    rep = gl_total_energy(s)
    assert rep.total == 4.0 * london8.J0
    assert rep.free_energy == 0.0
    assert rep.vorticity_term == 0.0
    assert rep.R0 == 0.0


def test_hex_zero_report(ball8, london8):
    s = random_state(ball8, london8, hex=0.0)
    rep = gl_total_energy(s)
    assert rep.meissner_term == 0.0 and rep.vorticity_term == 0.0 and rep.R0 == 0.0
    assert rep.total == pytest.approx(rep.free_energy + rep.field_outside)


def test_unit_modulus_r0_zero(ball8, london8):
    phase = RNG.normal(size=ball8.nshape)
    s = GLState(ball8, ComplexField(ball8, np.exp(1j * phase)),
                VectorField.zeros(ball8, "edge"), 0.3, 1.5, london8)
    # |exp(i phase)|^2 - 1 is zero to rounding
    assert abs(gl_total_energy(s).R0) < 1e-14


def test_report_identity_bit_exact(ball8, london8):
    rep = gl_total_energy(random_state(ball8, london8))
    assert rep.total == (rep.meissner_term + rep.free_energy + rep.field_outside
                         + rep.vorticity_term + rep.R0)
    assert rep.free_energy >= 0 and rep.potential >= 0


def test_report_requires_meissner(ball8):
    u = ComplexField.ones(ball8)
    with pytest.raises(MissingMeissnerData):
        GLState(ball8, u, VectorField.zeros(ball8, "edge"), 0.3, 1.0, None)


def test_gauge_invariance_full_report(ball8, london8):
    s = random_state(ball8, london8)
    chi = RNG.normal(size=ball8.nshape)
    s2 = gauge_transform(s, chi)
    r1 = gl_total_energy(s)
    r2 = gl_total_energy(s2)
    for key, v1 in r1.as_dict().items():
        v2 = r2.as_dict()[key]
        assert abs(v1 - v2) <= 1e-12 * max(abs(v1), 1.0), key
    assert abs(gl_energy(s) - gl_energy(s2)) <= 1e-12 * abs(gl_energy(s))
    assert abs(free_energy(s) - free_energy(s2)) <= 1e-12 * free_energy(s)


def test_r0_cauchy_schwarz_chain(ball8, london8):
    # |R0| <= eps hex^2 sqrt(E(|u|)) sqrt(int |curl B0|^4)
    from glmeissner.fields import integrate_slot
    s = random_state(ball8, london8, eps=0.2, hex=1.7, amp=0.3)
    rep = gl_total_energy(s)
    mod = np.abs(s.u.values)
    grads = grad_arrays(mod, ball8.h)
    e_mod = sum(0.5 * (w * g**2).sum() * ball8.h**3
                for w, g in zip(ball8.edge_weights, grads))
    e_mod += integrate_slot(ball8, (1 - mod**2) ** 2, "node") / (4 * s.eps**2)
    c4 = integrate_slot(
        ball8, sum(c**2 for c in london8.curlB0.comps) ** 2, "node")
    bound = s.eps * s.hex**2 * np.sqrt(e_mod) * np.sqrt(c4)
    assert abs(rep.R0) <= bound * (1 + 1e-9)


# -- vorticity ----------------------------------------------------------------------

def test_vorticity_trivial(ball8, london8):
    s = meissner_state(ball8, london8, 0.3, 1.0)
    vf = vorticity(s)
    assert max(np.abs(w).max() for w in vf.windings) < 1e-12


def test_vorticity_degree_one(ball8):
    x, y, _ = ball8.grid_points()
    zx = x + ball8.h / 2
    zy = y + ball8.h / 2
    rho = np.sqrt(zx**2 + zy**2) * np.ones(ball8.nshape)
    u = ComplexField(ball8, np.minimum(1.0, rho / 0.2)
                     * np.exp(1j * np.arctan2(zy, zx)) * np.ones(ball8.nshape))
    s = GLState(ball8, u, VectorField.zeros(ball8, "edge"), 0.3, 0.0)
    vf = vorticity(s)
    wz = np.round(vf.windings[2] / (2 * np.pi))
    # one pierced z-face per layer
    assert (np.abs(wz).sum(axis=(0, 1)) == 1).all()
    assert np.abs(vf.cube_sums()).max() < 1e-12
    assert vf.n_zero_faces() == 0


def test_vorticity_gauge_invariance(ball8, london8):
    s = random_state(ball8, london8)
    chi = RNG.normal(size=ball8.nshape)
    v1 = vorticity(s)
    v2 = vorticity(gauge_transform(s, chi))
    for a, b in zip(v1.windings, v2.windings):
        assert np.abs(a - b).max() < 1e-10


def test_vorticity_closedness_random_states(ball8, london8):
    for _ in range(3):
        vf = vorticity(random_state(ball8, london8, amp=1.0))
        assert np.abs(vf.cube_sums()).max() < 1e-9
        # quantization away from zeros
        for w, z in zip(vf.windings, vf.zero_faces):
            q = w / (2 * np.pi)
            assert np.abs(q[~z] - np.round(q[~z])).max() < 1e-9


def test_vorticity_zero_face_reporting(ball8):
    u = ComplexField.ones(ball8)
    u.values[4, 4, 4] = 0.0
    s = GLState(ball8, u, VectorField.zeros(ball8, "edge"), 0.3, 0.0)
    vf = vorticity(s)
    assert vf.n_zero_faces() == 12  # faces having that node as a corner


# -- supercurrent ---------------------------------------------------------------------

def test_supercurrent_trivial(ball8):
    s = GLState(ball8, ComplexField.ones(ball8), VectorField.zeros(ball8, "edge"),
                0.3, 0.0)
    j = supercurrent(s)
    assert max(np.abs(c).max() for c in j.comps) == 0.0


def test_supercurrent_plane_wave(ball8):
    k = 1.1
    x = ball8.axes[0][:, None, None]
    u = ComplexField(ball8, np.exp(1j * k * x) * np.ones(ball8.nshape))
    s = GLState(ball8, u, VectorField.zeros(ball8, "edge"), 0.3, 0.0)
    j = supercurrent(s)
    assert np.abs(j.comps[0] - np.sin(k * ball8.h) / ball8.h).max() < 1e-12


def test_supercurrent_pairing_gauge_invariant(ball8, london8):
    # paired against div-free fields tangent to the surface, the current+A
    # combination is gauge invariant
    from glmeissner.glcore import default_test_fields
    from glmeissner.fields import curl_t_arrays
    s = random_state(ball8, london8)
    chi = RNG.normal(size=ball8.nshape)
    s2 = gauge_transform(s, chi)
    phi = default_test_fields(ball8, count=3)
    for f in phi:
        cphi = curl_t_arrays(f.comps, ball8.h)

        def pairing(state):
            j = supercurrent(state)
            return sum(((j.comps[ax] + state.A.comps[ax]) * cphi[ax]
                        * ball8.edge_weights[ax]).sum() for ax in range(3))

        assert abs(pairing(s) - pairing(s2)) < 1e-9 * max(abs(pairing(s)), 1.0)


# -- hodge decomposition -----------------------------------------------------------------

def test_hodge_pure_gradient(ball8):
    svals = RNG.normal(size=ball8.nshape)
    A = VectorField(ball8, "edge", grad_arrays(svals, ball8.h))
    B, phi = hodge_decompose(A, tol=1e-10)
    assert hodge_reconstruction_residual(A, B, phi) < 1e-8
    assert max(np.abs(c).max() for c in B.comps) < 1e-8
    # phi matches s - mean(s) on the interior
    inner = ball8.inside
    diff = phi.values[inner] - (svals[inner] - svals[inner].mean())
    assert np.abs(diff - diff.mean()).max() < 1e-7


def test_hodge_pure_curl(ball8):
    # W supported on interior faces is the discrete form of W x nu = 0
    from glmeissner.fields import curl_t_arrays, face_shapes
    from glmeissner.glcore import _interior_complex
    _, _, fmasks = _interior_complex(ball8)
    W = tuple(np.where(m, RNG.normal(size=s), 0.0)
              for m, s in zip(fmasks, face_shapes(ball8.nshape)))
    A = VectorField(ball8, "edge", curl_t_arrays(W, ball8.h))
    B, phi = hodge_decompose(A, tol=1e-10)
    assert np.abs(phi.values).max() < 1e-7


def test_hodge_random_field(ball8):
    A = VectorField(ball8, "edge",
                    tuple(RNG.normal(size=s) for s in edge_shapes(ball8.nshape)))
    B, phi = hodge_decompose(A, tol=1e-10)
    assert hodge_reconstruction_residual(A, B, phi) < 1e-6
    assert abs(phi.values[ball8.inside].mean()) < 1e-10
    # the two parts are orthogonal
    from glmeissner.fields import curl_t_arrays
    from glmeissner.glcore import _interior_complex
    _, emasks, _ = _interior_complex(ball8)
    cb = curl_t_arrays(B.comps, ball8.h)
    gp = grad_arrays(phi.values, ball8.h)
    dot = sum((np.where(m, a, 0) * np.where(m, b, 0)).sum()
              for m, a, b in zip(emasks, cb, gp))
    na = np.sqrt(sum((np.where(m, a, 0) ** 2).sum() for m, a in zip(emasks, cb)))
    nb = np.sqrt(sum((np.where(m, b, 0) ** 2).sum() for m, b in zip(emasks, gp)))
    assert abs(dot) <= 1e-8 * max(na * nb, 1e-30)
    with pytest.raises(WrongStorage):
        hodge_decompose(VectorField.zeros(ball8, "node"))


# -- vorticity bound ------------------------------------------------------------------

def smooth_vortexless_state(mesh, eps):
    x, y, z = mesh.grid_points()
    g = np.exp(-(x**2 + y**2 + z**2)) * np.ones(mesh.nshape)
    u = ComplexField(mesh, (1 - eps**2 * g) * np.exp(1j * 0.6 * np.sin(x)
                                                     * np.ones(mesh.nshape)))
    return GLState(mesh, u, VectorField.zeros(mesh, "edge"), eps, 0.0)


def test_vorticity_bound_trivial(ball8):
    s = GLState(ball8, ComplexField.ones(ball8), VectorField.zeros(ball8, "edge"),
                0.3, 0.0)
    rep = check_vorticity_bound(s)
    assert rep["max_ratio"] < 1e-9


def test_vorticity_bound_stable_under_refinement():
    ratios = []
    for n in (8, 16):
        mesh = build_mesh({"shape": "ball", "R": 1.0}, 1.0 / n, pad=1)
        rep = check_vorticity_bound(smooth_vortexless_state(mesh, 0.3))
        ratios.append(rep["max_ratio"])
    assert all(np.isfinite(r) for r in ratios)
    assert ratios[1] <= 2.0 * ratios[0] + 0.05


def test_vorticity_bound_vortex_present(ball8):
    x, y, _ = ball8.grid_points()
    rho = np.sqrt(x**2 + y**2) * np.ones(ball8.nshape)
    u = ComplexField(ball8, np.minimum(1, rho / 0.3)
                     * np.exp(1j * np.arctan2(y, x + 1e-300)) * np.ones(ball8.nshape))
    s = GLState(ball8, u, VectorField.zeros(ball8, "edge"), 0.3, 0.0)
    with pytest.raises(VortexPresent):
        check_vorticity_bound(s)


# -- splitting consistency ----------------------------------------------------------

def test_splitting_residual_decreases():
    from glmeissner.fields import ComplexField as CF
    res = []
    hs = []
    for n in (8, 16):
        mesh = build_mesh({"shape": "ball", "R": 1.0}, 1.0 / n, pad=2)
        md = solve_london(mesh, uniform_field(mesh, (0, 0, 1)), tol=1e-10)
        x, y, z = mesh.grid_points()
        r2 = (x**2 + y**2 + z**2) * np.ones(mesh.nshape)
        bump = np.maximum(0.0, 1.0 - r2 / 0.49) ** 2
        psi = 0.8 * bump * np.sin(2 * x + y) * np.ones(mesh.nshape)
        s = GLState(mesh, CF(mesh, np.exp(1j * psi)),
                    VectorField.zeros(mesh, "edge"), 0.35, 1.2, md)
        res.append(abs(gl_total_energy(s).total - gl_energy(s)))
        hs.append(mesh.h)
    assert res[1] < res[0] / 2.5
