import numpy as np
import pytest

from minlag import loopalg as la
from minlag import potential as pt

# central values of the degenerate family
A0 = 1 / np.sqrt(6.0)
B0 = -1 / np.sqrt(6.0)
C0 = 1 / np.sqrt(3.0)

RNG = np.random.default_rng(42)


def random_series(rng, n=3, scale=0.1):
    c = np.zeros(n)
    c[0] = rng.uniform(0.2, 0.8)
    c[1:] = scale * rng.standard_normal(n - 1)
    return c


def random_lam(rng, n=5):
    return np.exp(2j * np.pi * rng.uniform(size=n)) * rng.uniform(0.85, 1.15, size=n)


class TestScalarValue:
    def test_constant(self):
        lam = random_lam(RNG)
        v = pt.scalar_value(0.7, lam)
        assert v.shape == lam.shape
        assert np.allclose(v, 0.7)

    def test_mu_polynomial(self):
        lam = random_lam(RNG)
        coeffs = np.array([1.0, -0.3, 0.05])
        mu = lam ** 6
        want = 1.0 - 0.3 * mu + 0.05 * mu ** 2
        assert np.allclose(pt.scalar_value(coeffs, lam), want)

    def test_batched(self):
        lam = random_lam(RNG, 4)
        tab = RNG.standard_normal((6, 2))
        got = pt.scalar_value(tab, lam)
        assert got.shape == (6, 4)
        assert np.allclose(got[2], tab[2, 0] + tab[2, 1] * lam ** 6)


class TestResidueMatrices:
    def test_r0_spectrum_fixed(self):
        lam = random_lam(RNG)
        r0, _, _ = pt.residue_matrices(0.13, random_series(RNG), random_series(RNG),
                                       random_series(RNG), lam)
        ev = np.sort_complex(np.linalg.eigvals(r0))
        want = np.sort_complex(np.array([-1 / 3, 0, 1 / 3], dtype=complex))
        assert np.abs(ev - want).max() < 1e-12

    def test_r1_spectrum_on_constraint(self):
        # eigenvalues (t, 0, -t) iff 4ab - c^2 = -1
        t = 0.21
        lam = random_lam(RNG)
        _, r1, _ = pt.residue_matrices(t, A0, B0, C0, lam)
        ev = np.sort(np.linalg.eigvals(r1).real, axis=-1)
        assert np.abs(np.linalg.eigvals(r1).imag).max() < 1e-12
        assert np.abs(ev - np.array([-t, 0, t])).max() < 1e-12

    def test_residues_sum_to_zero(self):
        lam = random_lam(RNG)
        r0, r1, rinf = pt.residue_matrices(0.2, A0, B0, C0, lam)
        assert np.abs(r0 + r1 + rinf).max() == 0.0

    def test_traceless(self):
        lam = random_lam(RNG)
        for r in pt.residue_matrices(0.17, random_series(RNG), random_series(RNG),
                                     random_series(RNG), lam):
            assert np.abs(np.trace(r, axis1=-2, axis2=-1)).max() < 1e-14


class TestEta:
    def test_t_zero_at_base(self):
        pot = pt.eta_potential(0.0, A0, B0, C0)
        val = pot(0.5, np.array([1.0 + 0j]))[0]
        assert np.allclose(val, np.diag([0, -2 / 3, 2 / 3]), atol=1e-14)

    def test_t_zero_at_two(self):
        pot = pt.eta_potential(0.0, A0, B0, C0)
        val = pot(2.0, np.array([1.0 + 0j]))[0]
        assert np.allclose(val, 0.5 * np.diag([0, -1 / 3, 1 / 3]), atol=1e-14)

    def test_contour_residues(self):
        t = 0.11
        a, b, c = (random_series(RNG) for _ in range(3))
        lam = np.array([0.93 * np.exp(0.4j)])
        pot = pt.eta_potential(t, a, b, c)
        r0, r1, _ = pt.residue_matrices(t, a, b, c, lam)
        got0 = pt.contour_residue(lambda z: pot(z, lam), 0.0, radius=1e-2, n=64)
        got1 = pt.contour_residue(lambda z: pot(z, lam), 1.0, radius=1e-2, n=64)
        assert np.abs(got0 - r0).max() < 1e-10
        assert np.abs(got1 - r1).max() < 1e-10


class TestGaugedForms:
    def setup_method(self):
        self.t = 0.09
        self.a, self.b, self.c = (random_series(RNG) for _ in range(3))
        self.lam = random_lam(RNG, 4)

    def test_dpw_closed_form_matches_gauge_action(self):
        eta = pt.eta_potential(self.t, self.a, self.b, self.c)
        built = pt.gauge_transform(eta, pt.dpw_gauge, pt.dpw_gauge_deriv)
        closed = pt.dpw_potential(self.t, self.a, self.b, self.c)
        for z in (0.3 + 0.2j, -0.8 + 1.1j, 2.4 - 0.5j):
            assert np.abs(built(z, self.lam) - closed(z, self.lam)).max() < 1e-12

    def test_cube_pullback_matches(self):
        dpw = pt.dpw_potential(self.t, self.a, self.b, self.c)
        built = pt.pullback(dpw, lambda z: z ** 3, lambda z: 3 * z ** 2)
        closed = pt.cube_pullback_potential(self.t, self.a, self.b, self.c)
        for z in (0.4 + 0.1j, 1.3 - 0.7j):
            assert np.abs(built(z, self.lam) - closed(z, self.lam)).max() < 1e-12

    def test_cube_potential_matches_gauge_action(self):
        pulled = pt.cube_pullback_potential(self.t, self.a, self.b, self.c)
        built = pt.gauge_transform(pulled, pt.cube_gauge, pt.cube_gauge_deriv)
        closed = pt.cube_potential(self.t, self.a, self.b, self.c)
        for z in (0.25 - 0.45j, -1.2 + 0.3j):
            assert np.abs(built(z, self.lam) - closed(z, self.lam)).max() < 1e-11

    def test_cube_potential_regular_at_origin(self):
        closed = pt.cube_potential(self.t, self.a, self.b, self.c)
        v0 = closed(0.0, self.lam)
        assert np.isfinite(v0).all()
        # diagonal vanishes at z = 0
        assert np.abs(v0[..., 1, 1]).max() < 1e-14

    def test_infinity_form_matches_gauge_action(self):
        pulled = pt.cube_pullback_potential(self.t, self.a, self.b, self.c)
        built = pt.gauge_transform(pulled, pt.infinity_gauge, pt.infinity_gauge_deriv)
        closed = pt.cube_potential_infinity(self.t, self.a, self.b, self.c)
        for z in (1.7 + 0.9j, -2.2 + 0.4j):
            assert np.abs(built(z, self.lam) - closed(z, self.lam)).max() < 1e-11

    def test_infinity_form_decays(self):
        closed = pt.cube_potential_infinity(self.t, self.a, self.b, self.c)
        # value times z^2 of the nu-chart Jacobian stays finite as nu -> 0
        nu = 1e-6
        val = closed(1.0 / nu, self.lam) * (-1.0 / nu ** 2)
        assert np.isfinite(val).all()
        assert np.abs(val).max() < 50.0

    def test_twisted_in_lambda(self):
        # the gauged forms take values in the twisted algebra
        for factory in (pt.dpw_potential, pt.cube_potential,
                        pt.cube_potential_infinity):
            closed = factory(self.t, self.a, self.b, self.c)
            n = la.grid_size(2)
            grid = la.sample_grid(n)
            vals = closed(0.37 + 0.61j, grid)
            coeffs = la.loop_from_samples(vals, 2)
            assert la.twist_defect(coeffs, kind="algebra") < 1e-10

    def test_fuchsian_form_is_not_twisted(self):
        eta = pt.eta_potential(self.t, self.a, self.b, self.c)
        n = la.grid_size(3)
        vals = eta(0.37 + 0.61j, la.sample_grid(n))
        coeffs = la.loop_from_samples(vals, 3)
        assert la.twist_defect(coeffs, kind="algebra") > 1e-3


class TestPunctureChart:
    def test_pullback_matches_closed_form(self):
        k = 5
        a, b, c = (random_series(RNG) for _ in range(3))
        lam = random_lam(RNG, 3)
        dpw = pt.dpw_potential(1.0 / k, a, b, c)
        built = pt.pullback(dpw, lambda w: w ** k + 1, lambda w: k * w ** (k - 1))
        closed = pt.puncture_pullback_potential(k, a, b, c)
        for w in (0.4 + 0.2j, -0.3 + 0.6j):
            assert np.abs(built(w, lam) - closed(w, lam)).max() < 1e-12

    def test_disc_potential_pole_structure(self):
        # local residue at the disc center has eigenvalues (1, 0, -1):
        # the order-k chart multiplies the Fuchsian exponents (t, 0, -t) by k
        k = 6
        pot = pt.disc_potential(1, k, 1.0 / k, A0, B0, C0)
        lam = np.array([np.exp(0.31j)])
        res = pt.contour_residue(lambda w: pot(w, lam)[0], 0.0,
                                 radius=0.3, n=256)
        ev = np.sort(np.linalg.eigvals(res).real)
        assert np.abs(np.linalg.eigvals(res).imag).max() < 1e-9
        assert np.abs(ev - np.array([-1.0, 0.0, 1.0])).max() < 1e-9

    def test_puncture_gauge_unimodular(self):
        k = 7
        g = pt.puncture_gauge(k, A0, C0)
        lam = random_lam(RNG, 4)
        for w in (0.3 + 0.1j, 0.9 - 0.2j):
            det = np.linalg.det(g(w, lam))
            assert np.abs(det - 1.0).max() < 1e-12

    def test_higgs_nilpotency(self):
        for k in (4, 5, 9):
            phi = pt.higgs_at_puncture(0.0, k, A0, C0)
            assert np.abs(phi @ phi).max() > 0.05
            assert np.abs(phi @ phi @ phi).max() < 1e-15

    def test_higgs_square_nonzero_requires_k_ge_4(self):
        phi = pt.higgs_at_puncture(0.0, 4, A0, C0)
        # w^{k-3} entry vanishes at the origin for k >= 4
        assert abs(phi[1, 2]) < 1e-15


class TestMobius:
    def test_distinguished_points(self):
        assert abs(pt.mobius(0.0) - la.ZETA ** 2) < 1e-13
        assert abs(pt.mobius(1.0) - 1.0) < 1e-13
        assert abs(pt.mobius(1e9) - la.ZETA) < 1e-8

    def test_is_moebius(self):
        # cross ratio preserved
        z = np.array([0.1, 0.4 + 0.2j, -1.3, 2.2 - 0.1j])
        w = pt.mobius(z)

        def cr(p):
            return ((p[0] - p[2]) * (p[1] - p[3])) / ((p[1] - p[2]) * (p[0] - p[3]))

        assert abs(cr(z) - cr(w)) < 1e-12
