"""Surface reconstruction: frames, factorized sphere maps, unrolling.

The distinguished-point evaluations have closed-form anchors: the
t -> 0 transport limit is an explicit diagonal loop, the base point
maps to a phase times e1, and after alignment the cap centers sit on
the coordinate axes with phase i.  Everything else is checked through
the structural invariants: unitarized monodromy, seam closure, factor
single-valuedness, deck equivariance and the finite group order.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import minlag.loopalg as la
import minlag.monodromy as mono
import minlag.potential as pt
import minlag.reconstruct as rc
import minlag.solver as sv

LAM54 = la.sample_grid(54)


@pytest.fixture(scope="session")
def field_k20(record_k20):
    # disc n_t = 20 keeps the deck rotation w -> exp(2 pi i/k) w on-grid
    charts = [rc.base_chart(n_r=3, n_t=6)] + \
             [rc.disc_chart(j, n_r=2, n_t=20) for j in (1, 2, 3)]
    return rc.base_frame(record_k20, lam=LAM54, charts=charts, fit_bw=10)


@pytest.fixture(scope="session")
def disc_samples_k20(field_k20):
    return {j: rc.surface_samples(field_k20, ("disc", j)) for j in (1, 2, 3)}


@pytest.fixture(scope="session")
def aligned_k20(field_k20, disc_samples_k20):
    base = rc.surface_samples(field_k20, ("base",))
    al = rc.align_transform(field_k20, disc_samples_k20)
    return al, rc.apply_alignment(base, al), \
        {j: rc.apply_alignment(disc_samples_k20[j], al) for j in (1, 2, 3)}


@pytest.fixture(scope="session")
def field_k40(family_k40):
    charts = [rc.disc_chart(j, n_r=2, n_t=6) for j in (1, 2, 3)]
    return rc.base_frame(family_k40[-1], lam=LAM54, charts=charts, fit_bw=10)


# ---------------------------------------------------------------------------
# closed-form anchor: the t -> 0 transport is an explicit diagonal loop

def test_small_t_transport_matches_diagonal_form():
    # limit frame diag(1, (2x)^{1/3}, (2x)^{-1/3}), identity at x = 1/2,
    # holomorphic around x = 1; the deviation is linear in t
    lam = np.exp(1j * np.array([0.3, 1.1, 2.7]))
    targets = (0.9 + 0.4j, 0.5 + 0.5j, 1.2 + 0.35j)
    sup = {}
    for t in (1e-3, 1e-4):
        eta = pt.eta_potential(t, sv.INIT_A, sv.INIT_B, sv.INIT_C)
        worst = 0.0
        for x in targets:
            path = [mono.Line(0.5, 0.5 + 0.35j), mono.Line(0.5 + 0.35j, x)]
            psi = mono.transport(eta, path, lam)
            w = (2.0 * x) ** (1.0 / 3.0)
            ref = np.diag([1.0, w, 1.0 / w])
            worst = max(worst, float(np.abs(psi - ref).max()))
        assert worst < 3.0 * t
        assert worst > 0.05 * t
        sup[t] = worst
    assert sup[1e-3] / sup[1e-4] == pytest.approx(10.0, rel=0.2)


# ---------------------------------------------------------------------------
# frame field invariants

def test_unitarized_monodromy_on_circle(field_k20):
    Ci = field_k20.C_inv
    for j in (1, 2, 3):
        U = np.linalg.solve(Ci, field_k20.mon[j] @ Ci)
        defect = np.abs(U @ U.conj().swapaxes(1, 2) - np.eye(3)).max()
        assert defect < 1e-8


def test_spanning_tree_independence(field_k20):
    # reach four base nodes through an inner arc detour instead of the
    # straight spoke; the region swept is puncture free, so the frames
    # must agree
    rec = field_k20.rec
    pot = pt.cube_potential(rec.t, *rec.coeffs())
    ch = field_k20.charts[("base",)]
    r, th = ch.radii(), ch.angles()
    for m in (0, 2, 3, 5):
        node = m * ch.n_r + (ch.n_r - 1)
        detour = [mono.Line(0.0, r[0] * np.exp(1j * th[0])),
                  mono.Arc(0.0, r[0], th[0], th[m]),
                  mono.Line(r[0] * np.exp(1j * th[m]),
                            r[-1] * np.exp(1j * th[m]))]
        psi = mono.transport(pot, detour, field_k20.lam)
        assert np.abs(psi - field_k20.frames[("base",)][node]).max() < 1e-8


def test_disc_seam_closes_at_sym_point(field_k20):
    for j in (1, 2, 3):
        assert field_k20.seam[j] < 1e-6


def test_holonomy_power_is_identity(field_k20):
    for j in (1, 2, 3):
        assert rc.holonomy_defect(field_k20, j) < 1e-6


def test_positive_factor_single_valued(field_k20):
    assert rc.b_factor_defect(field_k20, 1) < 1e-7


def test_lambda_grid_rejects_degenerate_sizes(record_k20):
    for n in (60, 132):
        with pytest.raises(rc.ReconstructError):
            rc.base_frame(record_k20, lam=la.sample_grid(n))


def test_disc_charts_require_rational_t(record_k20):
    from dataclasses import replace
    rec = replace(record_k20, t=record_k20.t * 1.002)
    with pytest.raises(rc.ReconstructError):
        rc.base_frame(rec, lam=LAM54, charts=[rc.disc_chart(1)])


# ---------------------------------------------------------------------------
# surface samples

def test_origin_lies_on_first_axis(field_k20):
    s = rc.origin_sample(field_k20)
    # the base point is fixed by the order-three rotation, whose
    # computed representation fixes the first axis
    assert abs(s.fhat[1]) < 1e-8
    assert abs(s.fhat[2]) < 1e-8
    assert abs(np.linalg.norm(s.fhat) - 1.0) < 1e-9


def test_samples_on_unit_sphere(field_k20, disc_samples_k20):
    samples = rc.surface_samples(field_k20, ("base",))
    samples += [s for ss in disc_samples_k20.values() for s in ss]
    for s in samples:
        assert abs(np.linalg.norm(s.fhat) - 1.0) < 1e-9
        assert s.defects["fit_tail"] < 1e-6


def test_masked_node_rejected():
    # a dense unit-radius ring puts nodes inside the avoidance margin;
    # the check fires before any frame data is touched
    ch = rc.DomainChart("base", 0, 0, n_r=1, n_t=192, r_max=1.0)
    bad = np.flatnonzero(~ch.valid())
    assert bad.size > 0
    dummy = rc.FrameField(rec=None, k=20, lam=LAM54, fit_bw=10, rtol=1e-12,
                          C_inv=np.empty(0), mon={}, charts={("base",): ch},
                          frames={})
    with pytest.raises(rc.ReconstructError):
        rc.surface_point(dummy, ("base",), int(bad[0]))


# ---------------------------------------------------------------------------
# symmetry representation

def test_sym_monodromy_matches_finite_model(record_k20):
    sym = rc.sym_monodromy(record_k20)
    assert sym.branch == "plus"
    assert sym.trace_defect < 1e-6
    assert sym.order_defect < 1e-7
    assert sym.conj_defect < 1e-8
    X, Y, Z = sym.traces
    assert abs(X) < 1e-6 and abs(Y) < 1e-6
    assert Z == pytest.approx(sv.sym_trace_target(record_k20.t, "plus"),
                              abs=1e-6)
    # the conjugator intertwines two unitary irreducibles, so it is
    # unitary once the determinant is normalized
    Q = sym.conjugator
    assert np.abs(Q @ Q.conj().T - np.eye(3)).max() < 1e-8


def test_sym_monodromy_rejects_off_locus_data(record_k20):
    from dataclasses import replace
    rec = replace(record_k20, a=record_k20.a * 1.01)
    with pytest.raises(rc.ReconstructError):
        rc.sym_monodromy(rec)


def test_group_closure_order():
    G = rc.group_elements(12)
    assert G.shape == (432, 3, 3)
    assert np.abs(G @ G.conj().swapaxes(1, 2) - np.eye(3)).max() < 1e-12
    # closed under multiplication: a random product lands in the set
    rng = np.random.default_rng(7)
    for _ in range(20):
        a, b = rng.integers(0, len(G), size=2)
        prod = G[a] @ G[b]
        assert np.abs(G - prod).max(axis=(1, 2)).min() < 1e-9


def test_group_order_matches_bfs(record_k20):
    sym = rc.sym_monodromy(record_k20)
    assert mono.group_order(sym.m0, sym.m1) == 3 * 20 * 20


# ---------------------------------------------------------------------------
# alignment

def test_alignment_caps_on_axes(field_k20, disc_samples_k20):
    al = rc.align_transform(field_k20, disc_samples_k20)
    A = al.matrix
    assert np.abs(A @ A.conj().T - np.eye(3)).max() < 1e-12
    assert abs(np.linalg.det(A) - 1.0) < 1e-12
    assert any(abs(al.omega - rc.ZETA ** m) < 1e-12 for m in range(3))
    for cap, axis in enumerate(al.perm):
        v = A @ al.cap_centers[cap]
        v = v / np.linalg.norm(v)
        target = np.zeros(3, dtype=complex)
        target[axis] = 1j
        assert np.linalg.norm(v - target) < 0.15


def test_aligned_origin_near_symmetric_point(field_k20, disc_samples_k20):
    al = rc.align_transform(field_k20, disc_samples_k20)
    s = rc.apply_alignment([rc.origin_sample(field_k20)], al)[0]
    target = 1j / np.sqrt(3.0) * np.ones(3)
    assert np.linalg.norm(s.fhat - target) < 0.15


def test_alignment_sharper_at_higher_order(field_k40):
    # cap estimates tighten as the punctures shrink
    disc = {j: rc.surface_samples(field_k40, ("disc", j)) for j in (1, 2, 3)}
    al = rc.align_transform(field_k40, disc)
    v = al.matrix @ al.cap_centers[0]
    v = v / np.linalg.norm(v)
    assert np.linalg.norm(v - np.array([1j, 0, 0])) < 0.15
    s = rc.apply_alignment([rc.origin_sample(field_k40)], al)[0]
    assert np.linalg.norm(s.fhat - 1j / np.sqrt(3.0) * np.ones(3)) < 0.15


# ---------------------------------------------------------------------------
# deck equivariance and unrolling

def _fit_deck_element(samples, ch, shift):
    """Least squares g with fhat(rotated node) = g fhat(node)."""
    by_node = {s.node: s for s in samples}
    src, dst = [], []
    for s in samples:
        m, i = divmod(s.node, ch.n_r)
        other = ((m + shift) % ch.n_t) * ch.n_r + i
        if other in by_node:
            src.append(s.fhat)
            dst.append(by_node[other].fhat)
    X = np.array(src)
    Y = np.array(dst)
    g, *_ = np.linalg.lstsq(X, Y, rcond=None)
    g = g.T
    return g, float(np.abs(X @ g.T - Y).max()), len(src)


def test_deck_equivariance_base(field_k20, aligned_k20):
    # one matrix maps every sample to its rotated-node sample
    _, base, _ = aligned_k20
    ch = field_k20.charts[("base",)]
    g, res, n = _fit_deck_element(base, ch, ch.n_t // 3)
    assert n >= 18
    assert res < 1e-6
    assert np.abs(g @ g.conj().T - np.eye(3)).max() < 1e-6
    assert np.abs(np.linalg.matrix_power(g, 3) - np.eye(3)).max() < 1e-6
    # after alignment that matrix lies in the finite model group
    G = rc.group_elements(field_k20.k)
    assert np.abs(G - g).max(axis=(1, 2)).min() < 1e-6


def test_deck_equivariance_disc(field_k20, aligned_k20):
    _, _, disc = aligned_k20
    k = field_k20.k
    ch = field_k20.charts[("disc", 1)]
    g, res, n = _fit_deck_element(disc[1], ch, ch.n_t // k)
    assert n == len(disc[1])
    assert res < 1e-6
    assert np.abs(g @ g.conj().T - np.eye(3)).max() < 1e-6
    assert np.abs(np.linalg.matrix_power(g, k) - np.eye(3)).max() < 1e-5
    G = rc.group_elements(k)
    assert np.abs(G - g).max(axis=(1, 2)).min() < 1e-6


def test_unroll_generic_orbit_is_free(aligned_k20, field_k20):
    _, base, _ = aligned_k20
    k = field_k20.k
    mesh = rc.unroll([base[0]], k)
    assert mesh.n_images == 3 * k * k
    assert mesh.n_duplicates == 0
    assert mesh.points.shape == (3 * k * k, 3)
    assert np.abs(np.linalg.norm(mesh.points, axis=1) - 1.0).max() < 1e-9


def test_unroll_merges_rotation_images(aligned_k20, field_k20):
    _, base, _ = aligned_k20
    ch = field_k20.charts[("base",)]
    k = field_k20.k
    s = base[0]
    m, i = divmod(s.node, ch.n_r)
    other = ((m + ch.n_t // 3) % ch.n_t) * ch.n_r + i
    mate = next(x for x in base if x.node == other)
    mesh = rc.unroll([s, mate], k)
    # the two nodes are deck images of one surface point, so their
    # orbits coincide
    assert mesh.n_images == 2 * 3 * k * k
    assert mesh.points.shape[0] == 3 * k * k
    assert mesh.n_duplicates == 3 * k * k


def test_unroll_counts_consistent(aligned_k20, field_k20):
    _, base, disc = aligned_k20
    k = field_k20.k
    fund = base + [s for ss in disc.values() for s in ss]
    mesh = rc.unroll(fund, k)
    assert mesh.n_images == 3 * k * k * len(fund)
    assert mesh.points.shape[0] == mesh.n_images - mesh.n_duplicates
    assert mesh.points.shape[0] < mesh.n_images  # seams really merge
    assert np.abs(np.linalg.norm(mesh.points, axis=1) - 1.0).max() < 1e-9
    assert mesh.group_index.shape == mesh.sample_index.shape \
        == (mesh.points.shape[0],)


# ---------------------------------------------------------------------------
# chart geometry

@given(n_r=st.integers(1, 6), n_t=st.sampled_from([3, 6, 9, 12]))
@settings(max_examples=25, deadline=None)
def test_base_chart_grid_properties(n_r, n_t):
    ch = rc.base_chart(n_r=n_r, n_t=n_t)
    z = ch.nodes()
    ok = ch.valid()
    assert z.shape == (n_r * n_t,) == ok.shape
    for m in range(3):
        assert np.all(np.abs(z[ok] - rc.ZETA ** m) >= rc.AVOID)
    for quad in ch.faces():
        assert len(quad) == 4
        assert all(0 <= q < z.size and ok[q] for q in quad)


@given(j=st.integers(1, 3), n_r=st.integers(1, 5), n_t=st.integers(3, 10))
@settings(max_examples=25, deadline=None)
def test_disc_chart_grid_properties(j, n_r, n_t):
    ch = rc.disc_chart(j, n_r=n_r, n_t=n_t)
    w = ch.nodes()
    assert np.all(ch.valid())
    assert np.abs(w).max() == pytest.approx(ch.r_max)
    assert np.abs(w).min() == pytest.approx(ch.r_max / n_r)


def test_chart_validation_errors():
    with pytest.raises(rc.ReconstructError):
        rc.base_chart(n_t=7)
    with pytest.raises(rc.ReconstructError):
        rc.disc_chart(4)


# ---------------------------------------------------------------------------
# mesh export

def test_csv_round_trip_bitwise(field_k20, tmp_path):
    samples = rc.surface_samples(field_k20, ("base",))
    p1 = tmp_path / "mesh.csv"
    p2 = tmp_path / "mesh2.csv"
    rc.export_mesh(str(p1), samples)
    back = rc.read_mesh(str(p1))
    assert len(back) == len(samples)
    rc.export_mesh(str(p2), back)
    assert p1.read_bytes() == p2.read_bytes()
    for a, b in zip(samples, back):
        assert a.fhat[0] == b.fhat[0]
        assert a.coord == b.coord
        assert a.defects["sphere"] == b.defects["sphere"]


def test_obj_vertex_and_face_counts(field_k20, tmp_path):
    ch = field_k20.charts[("base",)]
    samples = rc.surface_samples(field_k20, ("base",))
    p = tmp_path / "mesh.obj"
    rc.export_mesh(str(p), samples, chart=ch)
    lines = p.read_text().splitlines()
    nv = sum(1 for ln in lines if ln.startswith("v "))
    nf = sum(1 for ln in lines if ln.startswith("f "))
    assert nv == len(samples)
    assert nf == len(ch.faces())
    for ln in lines:
        if ln.startswith("f "):
            idx = [int(tok) for tok in ln.split()[1:]]
            assert len(idx) == 4
            assert all(1 <= i <= nv for i in idx)


def test_obj_rejects_bad_projection(field_k20, tmp_path):
    samples = rc.surface_samples(field_k20, ("base",), nodes=[0])
    with pytest.raises(ValueError):
        rc.export_mesh(str(tmp_path / "m.obj"), samples,
                       projection=np.ones((3, 6)))
    with pytest.raises(ValueError):
        rc.export_mesh(str(tmp_path / "m.obj"), samples,
                       projection=np.eye(3))


def test_read_mesh_rejects_foreign_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,y,z\n1,2,3\n")
    with pytest.raises(ValueError):
        rc.read_mesh(str(p))
