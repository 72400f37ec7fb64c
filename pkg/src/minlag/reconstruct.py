"""Surface reconstruction from a verified coefficient record.

The pipeline runs entirely in the cube coordinate z (punctures at the
cube roots of unity, regular base point z = 0).  A frame Psi is parallel
transported from the base point along spanning trees of polar charts,
once per point of a unit-circle lambda grid.  The puncture monodromies
around z = 1 and z = zeta are unitarized pointwise in lambda; the
resulting family C makes Omega = Psi C^{-1} a loop with unitary
monodromy, so its positive/unitary factorization Omega = B F yields a
well defined sphere map

    fhat = F(lam0)^{-1} e1,   lam0 = exp(i pi / 6),

single valued on the surface and equivariant under the deck group.
Charts come in two kinds: one polar chart in z around the base point and
one polar chart per puncture in the k-fold cover coordinate w with
z = zeta^{j-1} - w^k.  Evaluation at lam0 always goes through Fourier
summation of fitted loop coefficients; lam0 itself is never a sample
point (the unitarizer degenerates on the twist orbit of lam0, see
base_frame).
"""

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from . import iwasawa as iw
from . import loopalg as la
from . import monodromy as mono
from . import potential as pt
from .potential import ZETA
from .solver import _thread_count

LAM0 = la.SYM_POINT

E1 = np.array([1.0, 0.0, 0.0], dtype=complex)

# minimum distance kept between base-chart nodes and the punctures
AVOID = 0.02


class ReconstructError(RuntimeError):
    """Chart layout, grid choice, or a post condition failed."""


# ---------------------------------------------------------------------------
# charts

@dataclass(frozen=True)
class DomainChart:
    """Polar node grid in a local coordinate.

    kind "base": coordinate is z itself, nodes r_i exp(i th_m) with the
    angles offset half a step so spokes pass between the punctures.
    kind "disc": coordinate is w with z = zeta^{j-1} - w^k; the full
    w-disc covers the z-disc of radius r_max^k k-fold, one angular
    sector per sheet.  Radii are r_max * (i+1)/n_r, so the innermost
    ring sits at r_max/n_r and the origin (frame branch point for
    discs) is excluded.
    """

    kind: str
    j: int = 0
    l: int = 1
    n_r: int = 24
    n_t: int = 48
    r_max: float = 1.6

    def radii(self):
        return self.r_max * np.arange(1, self.n_r + 1) / self.n_r

    def angles(self):
        th = 2.0 * np.pi * np.arange(self.n_t) / self.n_t
        if self.kind == "base":
            th = th + np.pi / self.n_t
        return th

    def nodes(self):
        """Complex node coordinates, index m * n_r + i (spoke major)."""
        r = self.radii()
        th = self.angles()
        return (np.exp(1j * th)[:, None] * r[None, :]).ravel()

    def valid(self):
        """Mask of nodes kept for surface evaluation.

        Base-chart nodes too close to a puncture are dropped; every
        disc node is valid.
        """
        z = self.nodes()
        if self.kind != "base":
            return np.ones(z.size, dtype=bool)
        keep = np.ones(z.size, dtype=bool)
        for m in range(3):
            keep &= np.abs(z - ZETA ** m) >= AVOID
        return keep

    def faces(self):
        """Quad connectivity as node-index 4-tuples.

        Angular wrap quads are included; for the base chart, wrap and
        puncture-sector quads at radius >= 0.95 are skipped because the
        frame jumps by a puncture monodromy across the cut behind each
        puncture (that region belongs to the disc charts).
        """
        ok = self.valid()
        th = self.angles()
        r = self.radii()
        step = 2.0 * np.pi / self.n_t
        cut_angles = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
        out = []
        for m in range(self.n_t):
            mn = (m + 1) % self.n_t
            lo = th[m]
            crosses = any((c - lo) % (2.0 * np.pi) < step
                          for c in cut_angles)
            for i in range(self.n_r - 1):
                quad = (m * self.n_r + i, m * self.n_r + i + 1,
                        mn * self.n_r + i + 1, mn * self.n_r + i)
                if not all(ok[q] for q in quad):
                    continue
                if self.kind == "base" and crosses and r[i + 1] >= 0.95:
                    continue
                out.append(quad)
        return out


def base_chart(n_r=24, n_t=48, r_max=1.6):
    if n_t % 3:
        raise ReconstructError("base chart needs n_t divisible by 3")
    return DomainChart("base", 0, 0, n_r, n_t, r_max)


def disc_chart(j, n_r=24, n_t=48, w_max=0.97):
    if j not in (1, 2, 3):
        raise ReconstructError("disc chart index j must be 1, 2 or 3")
    return DomainChart("disc", j, 1, n_r, n_t, w_max)


def delta_loop(j, radius=0.5):
    """Loop from the base point once around the puncture zeta^{j-1}."""
    ctr = ZETA ** (j - 1)
    ph = np.angle(ctr) + np.pi
    start = ctr + radius * np.exp(1j * ph)
    return [mono.Line(0.0, start),
            mono.Arc(ctr, radius, ph, ph + 2.0 * np.pi),
            mono.Line(start, 0.0)]


# ---------------------------------------------------------------------------
# frame field

@dataclass
class FrameField:
    """Transported frames and the unitarizing family for one record."""

    rec: object
    k: int
    lam: np.ndarray
    fit_bw: int
    rtol: float
    C_inv: np.ndarray            # (n_lam, 3, 3)
    mon: dict                    # j -> delta_j monodromy samples
    charts: dict                 # key -> DomainChart
    frames: dict                 # key -> (n_nodes, n_lam, 3, 3)
    conn: dict = field(default_factory=dict)   # j -> connector frame
    seam: dict = field(default_factory=dict)   # j -> ring closure at lam0


def _check_grid(lam):
    lam = np.asarray(lam, dtype=complex)
    n = lam.size
    if n % 6:
        raise ReconstructError("lambda grid size must be divisible by 6")
    if (n // 6) % 2 == 0:
        # grids with n = 0 mod 12 contain the twist orbit of lam0, where
        # the puncture pair is simultaneously diagonalizable and no
        # unique invariant form exists
        raise ReconstructError(
            "lambda grid size n must have n/6 odd (n = %d hits the "
            "degenerate circle points exp(i(2m+1)pi/6))" % n)
    if np.abs(np.abs(lam) - 1.0).max() > 1e-13:
        raise ReconstructError("lambda samples must lie on the unit circle")
    return lam


def _eval_at_sym(samples, bw):
    coeffs = la.loop_from_samples(samples, bw)
    return la.eval_loop(coeffs, np.array([LAM0]))[0]


def base_frame(rec, lam=None, charts=None, fit_bw=14, rtol=1e-12,
               threads=None):
    """Transport frames over the given charts and unitarize the monodromy.

    Returns a FrameField holding, per chart node, the frame samples on
    the lambda grid, plus the pointwise unitarizer family C^{-1} of the
    two puncture monodromies, the monodromy samples themselves, and the
    disc seam defects (ring transport around the full w-disc compared
    with its start, evaluated at lam0 where the k-th monodromy power is
    the identity).
    """
    lam = _check_grid(la.sample_grid(90) if lam is None else lam)
    if threads is None:
        threads = _thread_count()
    k = int(round(1.0 / rec.t))
    if charts is None:
        charts = [base_chart()] + [disc_chart(j) for j in (1, 2, 3)]
    chart_map = {}
    for ch in charts:
        key = ("base",) if ch.kind == "base" else ("disc", ch.j)
        if key in chart_map:
            raise ReconstructError("duplicate chart %r" % (key,))
        chart_map[key] = ch
    if any(ch.kind == "disc" for ch in charts) and abs(rec.t * k - 1.0) > 1e-9:
        raise ReconstructError(
            "disc charts need t = 1/k exactly (got t = %r)" % rec.t)

    coeffs = rec.coeffs()
    pot = pt.cube_potential(rec.t, *coeffs)

    mon = {j: mono.transport(pot, delta_loop(j), lam, rtol=rtol)
           for j in (1, 2, 3)}
    C_inv = np.empty_like(mon[1])
    for i in range(lam.size):
        try:
            C = iw.pointwise_unitarizer(mon[1][i], mon[2][i])
        except iw.UnitarizeError as exc:
            raise ReconstructError(
                "unitarizer failed at lambda = %r: %s" % (lam[i], exc))
        C_inv[i] = np.linalg.inv(C)

    frames = {}
    conn = {}
    seam = {}

    def base_spoke(args):
        ch, th = args
        r = ch.radii()
        pts = np.concatenate(([0.0], r)) * np.exp(1j * th)
        path = [mono.Line(pts[i], pts[i + 1]) for i in range(len(r))]
        return mono.transport(pot, path, lam, rtol=rtol, checkpoints=True)

    def disc_spoke(args):
        dpot, ch, th, y0 = args
        r = ch.radii()[::-1]  # outermost first; y0 is the ring frame there
        pts = r * np.exp(1j * th)
        path = [mono.Line(pts[i], pts[i + 1]) for i in range(len(r) - 1)]
        marks = mono.transport(dpot, path, lam, y0=y0, rtol=rtol,
                               checkpoints=True)
        return [y0] + marks

    pool = ThreadPoolExecutor(max_workers=threads)
    try:
        for key, ch in chart_map.items():
            n_nodes = ch.n_r * ch.n_t
            psi = np.empty((n_nodes, lam.size, 3, 3), dtype=complex)
            th = ch.angles()
            if ch.kind == "base":
                spokes = pool.map(base_spoke, [(ch, t) for t in th])
                for m, marks in enumerate(spokes):
                    for i in range(ch.n_r):
                        psi[m * ch.n_r + i] = marks[i]
            else:
                jj = ch.j
                dpot = pt.disc_potential(jj, k, rec.t, *coeffs)
                ctr = ZETA ** (jj - 1)
                w0 = ch.r_max
                psi_conn = mono.transport(
                    pot, mono.Line(0.0, ctr - w0 ** k), lam, rtol=rtol)
                conn[jj] = psi_conn
                # outer ring sweep in w, one extra piece closing the circle
                ring_path = [mono.Arc(0.0, w0, th[m],
                                      th[m + 1] if m + 1 < ch.n_t
                                      else 2.0 * np.pi)
                             for m in range(ch.n_t)]
                marks = mono.transport(dpot, ring_path, lam, y0=psi_conn,
                                       rtol=rtol, checkpoints=True)
                ring = [psi_conn] + marks[:-1]
                closed = marks[-1]
                seam[jj] = float(np.linalg.norm(
                    _eval_at_sym(closed, fit_bw)
                    - _eval_at_sym(psi_conn, fit_bw), 2))
                spokes = pool.map(
                    disc_spoke,
                    [(dpot, ch, th[m], ring[m]) for m in range(ch.n_t)])
                for m, spoke in enumerate(spokes):
                    # spoke is outermost..innermost; node index wants
                    # ascending radius
                    for i in range(ch.n_r):
                        psi[m * ch.n_r + i] = spoke[ch.n_r - 1 - i]
            frames[key] = psi
    finally:
        pool.shutdown()

    return FrameField(rec=rec, k=k, lam=lam, fit_bw=fit_bw, rtol=rtol,
                      C_inv=C_inv, mon=mon, charts=chart_map, frames=frames,
                      conn=conn, seam=seam)


# ---------------------------------------------------------------------------
# surface evaluation

@dataclass
class SurfaceSample:
    """One evaluated surface point with its measured defects.

    defects carries sphere (unit norm), the factorization product,
    unitary, positivity and twist defects, and the Fourier fit tail.
    The legendrian and phase entries start as nan; they are filled by
    mesh-level differential checks which need neighboring samples.
    """

    kind: str
    j: int
    l: int
    node: int
    coord: complex
    fhat: np.ndarray
    defects: dict

    def r6(self):
        f = self.fhat
        return np.array([f[0].real, f[0].imag, f[1].real, f[1].imag,
                         f[2].real, f[2].imag])


def _factor_omega(omega_samples, bw):
    coeffs = la.loop_from_samples(omega_samples, bw)
    tail = la.fourier_tail(omega_samples, bw)
    fac = iw.iwasawa(coeffs)
    F0 = la.eval_loop(fac.F, np.array([LAM0]))[0]
    fhat = np.linalg.solve(F0, E1)
    return fhat, fac, tail


def _make_sample(field_, kind, j, l, node, coord, psi):
    omega = psi @ field_.C_inv
    fhat, fac, tail = _factor_omega(omega, field_.fit_bw)
    sphere = abs(np.linalg.norm(fhat) - 1.0)
    if sphere > 1e-6:
        raise ReconstructError(
            "surface point off the sphere by %.2e at node %d" % (sphere, node))
    defects = dict(fac.defects)
    defects["sphere"] = sphere
    defects["fit_tail"] = tail
    defects.setdefault("legendrian", float("nan"))
    defects.setdefault("phase", float("nan"))
    return SurfaceSample(kind=kind, j=j, l=l, node=node, coord=coord,
                         fhat=fhat, defects=defects)


def surface_point(field_, key, node):
    """Evaluate fhat at one chart node of a FrameField."""
    ch = field_.charts[key]
    coord = ch.nodes()[node]
    if not ch.valid()[node]:
        raise ReconstructError("node %d is masked out" % node)
    return _make_sample(field_, ch.kind, ch.j, ch.l, node, coord,
                        field_.frames[key][node])


def origin_sample(field_):
    """fhat at the base point z = 0, where the frame is the identity."""
    psi = np.broadcast_to(np.eye(3, dtype=complex),
                          (field_.lam.size, 3, 3))
    return _make_sample(field_, "base", 0, 1, -1, 0j, psi)


def surface_samples(field_, key, nodes=None, threads=None):
    """Evaluate fhat over chart nodes, factorizations run concurrently."""
    ch = field_.charts[key]
    if nodes is None:
        nodes = np.flatnonzero(ch.valid())
    if threads is None:
        threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda n: surface_point(field_, key, n),
                                 nodes))
    return [surface_point(field_, key, n) for n in nodes]


# ---------------------------------------------------------------------------
# closure diagnostics

def monodromy_at_sym(field_, j):
    """Puncture monodromy evaluated at lam0 by Fourier summation."""
    return _eval_at_sym(field_.mon[j], field_.fit_bw)


def holonomy_defect(field_, j):
    """|M_j(lam0)^k - Id|; vanishes when the surface closes up."""
    U = monodromy_at_sym(field_, j)
    return float(np.linalg.norm(
        np.linalg.matrix_power(U, field_.k) - np.eye(3), 2))


def b_factor_defect(field_, j):
    """Difference of the positive factors before and after one loop.

    Omega and Omega * M_j have the same positive factor because the
    unitarized monodromy is absorbed by F; the sup-norm difference of
    the two fitted B coefficient arrays measures how well the
    factorization realizes that.
    """
    if j not in field_.conn:
        raise ReconstructError("no disc chart was built for j = %d" % j)
    psi = field_.conn[j]
    om0 = psi @ field_.C_inv
    om1 = psi @ field_.mon[j] @ field_.C_inv
    f0 = iw.iwasawa(la.loop_from_samples(om0, field_.fit_bw))
    f1 = iw.iwasawa(la.loop_from_samples(om1, field_.fit_bw))
    d = f0.B - f1.B
    return float(la.op_norms(d).max())


# ---------------------------------------------------------------------------
# symmetry representation

@dataclass
class SymmetryData:
    """Unitarized puncture pair conjugated onto the finite model."""

    m0: np.ndarray
    m1: np.ndarray
    conjugator: np.ndarray
    branch: str
    traces: tuple
    trace_defect: float
    conj_defect: float
    order_defect: float


def _least_squares_conjugator(pairs):
    """Solve m Q = Q g for all (m, g) pairs, smallest singular vector."""
    eye = np.eye(3)
    rows = [np.kron(eye, m) - np.kron(g.T, eye) for m, g in pairs]
    K = np.vstack(rows)
    _, s, vh = np.linalg.svd(K)
    q = vh[-1].conj().reshape(3, 3, order="F")
    det = np.linalg.det(q)
    q = q / det ** (1.0 / 3.0)
    return q, float(s[-1])


def sym_monodromy(rec, rtol=1e-12):
    """Unitarize the monodromy pair at lam0 and match the finite model.

    The pair (M0, M1) is transported at the single circle point lam0,
    unitarized, compared against the model trace coordinates for both
    branches, and conjugated onto the model generators by a least
    squares intertwiner.  A trace mismatch beyond 1e-5 raises.
    """
    lam = np.array([LAM0])
    m0, m1, _ = mono.monodromies(rec.t, *rec.coeffs(), lam=lam, rtol=rtol)
    try:
        C = iw.pointwise_unitarizer(m0[0], m1[0])
    except iw.UnitarizeError as exc:
        raise ReconstructError("monodromy pair is not unitarizable: %s" % exc)
    Ci = np.linalg.inv(C)
    m0u = C @ m0[0] @ Ci
    m1u = C @ m1[0] @ Ci

    X, Y, Z, _ = mono.trace_coordinates(m0u, m1u)
    best = None
    for branch, tsgn in (("plus", rec.t), ("minus", -rec.t)):
        tgt = mono.model_traces(tsgn)
        d = max(abs(X - tgt[0]), abs(Y - tgt[1]), abs(Z - tgt[2]))
        if best is None or d < best[1]:
            best = (branch, d, tsgn)
    branch, trace_defect, tsgn = best
    if trace_defect > 1e-5:
        raise ReconstructError(
            "trace coordinates do not match the finite model "
            "(defect %.2e)" % trace_defect)

    g0, g1, _ = mono.finite_rep(tsgn)
    Q, _ = _least_squares_conjugator([(m0u, g0), (m1u, g1)])
    conj_defect = max(
        float(np.linalg.norm(m0u @ Q - Q @ g0, 2)),
        float(np.linalg.norm(m1u @ Q - Q @ g1, 2)))

    k = int(round(1.0 / rec.t))
    order_defect = max(
        float(np.linalg.norm(np.linalg.matrix_power(m0u, 3) - np.eye(3), 2)),
        float(np.linalg.norm(np.linalg.matrix_power(m1u, k) - np.eye(3), 2)))
    return SymmetryData(m0=m0u, m1=m1u, conjugator=Q, branch=branch,
                        traces=(X, Y, Z), trace_defect=trace_defect,
                        conj_defect=conj_defect, order_defect=order_defect)


def group_elements(k):
    """All 3 k^2 elements of the finite monodromy group at t = 1/k."""
    g0, g1, _ = mono.finite_rep(1.0 / k)
    out = mono.group_closure([g0, g1], cap=4 * 3 * k * k)
    if len(out) != 3 * k * k:
        raise ReconstructError(
            "group closure found %d elements, expected %d"
            % (len(out), 3 * k * k))
    return out


# ---------------------------------------------------------------------------
# alignment and unrolling

@dataclass
class Alignment:
    """SU(3) change of frame mapping cap centers onto coordinate axes."""

    matrix: np.ndarray
    omega: complex
    perm: tuple
    cap_centers: np.ndarray
    score: float


def _inner_ring_mean(samples, chart):
    r_in = chart.r_max / chart.n_r
    vals = [s.fhat for s in samples if abs(abs(s.coord) - r_in) < 1e-12]
    if not vals:
        raise ReconstructError("no innermost ring samples in chart")
    return np.mean(vals, axis=0)


def align_transform(field_, disc_samples):
    """Compute the SU(3) alignment from innermost ring cap estimates.

    disc_samples maps j -> samples of disc chart j covering at least the
    innermost ring.  The three ring means approximate the cap centers;
    after Gram-Schmidt they are rotated onto the coordinate axes with
    phases +i, the determinant phase is distributed as a cube root, and
    the central element omega in {1, zeta, zeta^2} is chosen to bring
    the first cap center closest to i e1.  Axis assignment tries the
    identity permutation first and falls back to swapping axes 2 and 3,
    scored by compatibility with the order-three model rotation.
    """
    v = [_inner_ring_mean(disc_samples[j], field_.charts[("disc", j)])
         for j in (1, 2, 3)]
    # Gram-Schmidt; the caps are near orthogonal so this is well posed
    u = []
    for x in v:
        y = x.astype(complex)
        for e in u:
            y = y - np.vdot(e, y) * e
        u.append(y / np.linalg.norm(y))
    g0, _, _ = mono.finite_rep(1.0 / field_.k)
    sig_inv = g0  # the model rotation sends axis j to axis j+1

    best = None
    for perm in ((0, 1, 2), (0, 2, 1)):
        R = np.zeros((3, 3), dtype=complex)
        for cap, axis in enumerate(perm):
            R[axis] = u[cap].conj()
        w = [R @ x for x in v]
        d = np.ones(3, dtype=complex)
        for cap, axis in enumerate(perm):
            ph = w[cap][axis]
            d[axis] = 1j * np.conj(ph) / abs(ph)
        Q = np.diag(d) @ R
        Q = Q / np.linalg.det(Q) ** (1.0 / 3.0)
        # correct assignment makes the caps cycle under the model rotation
        score = sum(
            np.linalg.norm(Q @ v[c2] - sig_inv @ (Q @ v[c1]))
            for c1, c2 in ((0, 1), (1, 2)))
        if best is None or score < best[0]:
            best = (score, perm, Q)
    score, perm, Q = best

    w1 = Q @ (v[0] / np.linalg.norm(v[0]))
    roots = ZETA ** np.arange(3)
    target = 1j * E1
    omega = roots[int(np.argmin(
        [np.linalg.norm(r * w1 - target) for r in roots]))]
    return Alignment(matrix=omega * Q, omega=omega, perm=perm,
                     cap_centers=np.array(v), score=float(score))


def apply_alignment(samples, alignment):
    A = alignment.matrix
    return [replace(s, fhat=A @ s.fhat) for s in samples]


@dataclass
class UnrolledMesh:
    """Deck orbit of a fundamental set of samples, seams merged."""

    points: np.ndarray         # (n_points, 3) complex
    group_index: np.ndarray
    sample_index: np.ndarray
    n_images: int
    n_duplicates: int


def unroll(samples, k, tol=1e-6):
    """Apply all deck transforms and merge coincident points.

    The group acts on fhat values through the inverse representation;
    since the element set is closed under inversion the orbit is built
    by plain left multiplication.  Points closer than tol are merged
    (keeping the first representative), which glues the chart overlaps
    and the disc seams.
    """
    G = group_elements(k)
    P = np.array([s.fhat for s in samples])
    images = np.einsum("gab,nb->gna", G, P).reshape(-1, 3)
    gi, si = np.divmod(np.arange(images.shape[0]), P.shape[0])
    flat = np.column_stack([images.real, images.imag])
    tree = cKDTree(flat)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    parent = np.arange(images.shape[0])

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(images.shape[0])])
    keep = np.flatnonzero(roots == np.arange(images.shape[0]))
    return UnrolledMesh(points=images[keep], group_index=gi[keep],
                        sample_index=si[keep], n_images=images.shape[0],
                        n_duplicates=int(images.shape[0] - keep.size))


# ---------------------------------------------------------------------------
# mesh export

CSV_HEADER = ["chart", "j", "l", "u1", "u2", "re1", "im1", "re2", "im2",
              "re3", "im3", "sphere_defect", "legendrian_defect"]

# default projection keeps the three real parts
DEFAULT_PROJECTION = np.array([
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
])


def export_mesh(path, samples, chart=None, projection=None):
    """Write samples as .csv (full data) or .obj (projected geometry).

    CSV columns follow CSV_HEADER; floats are written with repr so a
    read/write cycle is bitwise stable.  OBJ vertices are the image of
    the R^6 coordinates under a 3x6 projection whose rows must be
    orthonormal; faces come from the chart connectivity when a chart is
    given, restricted to quads whose corners were all sampled.
    """
    ext = os.path.splitext(path)[1].lower()
    if ext == ".csv":
        _write_csv(path, samples)
    elif ext == ".obj":
        _write_obj(path, samples, chart, projection)
    else:
        raise ValueError("unsupported mesh extension %r" % ext)


def _write_csv(path, samples):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for s in samples:
            f = s.fhat
            w.writerow([s.kind, s.j, s.l,
                        repr(float(s.coord.real)), repr(float(s.coord.imag)),
                        repr(float(f[0].real)), repr(float(f[0].imag)),
                        repr(float(f[1].real)), repr(float(f[1].imag)),
                        repr(float(f[2].real)), repr(float(f[2].imag)),
                        repr(float(s.defects.get("sphere", float("nan")))),
                        repr(float(s.defects.get("legendrian",
                                                 float("nan"))))])


def read_mesh(path):
    """Read a CSV mesh back into SurfaceSample objects."""
    out = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != CSV_HEADER:
            raise ValueError("unrecognized mesh header %r" % header)
        for row in r:
            kind, j, l = row[0], int(row[1]), int(row[2])
            vals = [float(x) for x in row[3:]]
            fhat = np.array([complex(vals[2], vals[3]),
                             complex(vals[4], vals[5]),
                             complex(vals[6], vals[7])])
            out.append(SurfaceSample(
                kind=kind, j=j, l=l, node=-1,
                coord=complex(vals[0], vals[1]), fhat=fhat,
                defects={"sphere": vals[8], "legendrian": vals[9]}))
    return out


def _write_obj(path, samples, chart, projection):
    P = DEFAULT_PROJECTION if projection is None else np.asarray(projection,
                                                                 dtype=float)
    if P.shape != (3, 6):
        raise ValueError("projection must be a 3x6 matrix")
    if np.linalg.norm(P @ P.T - np.eye(3)) > 1e-10:
        raise ValueError("projection rows must be orthonormal")
    rows = {}
    lines = ["# unit sphere mesh, %d vertices" % len(samples)]
    for i, s in enumerate(samples):
        v = P @ s.r6()
        rows[s.node] = i
        lines.append("v %r %r %r" % (float(v[0]), float(v[1]), float(v[2])))
    if chart is not None:
        for quad in chart.faces():
            if all(q in rows for q in quad):
                lines.append("f " + " ".join(
                    str(rows[q] + 1) for q in quad))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
