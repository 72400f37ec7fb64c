"""Meromorphic connection forms for the surface family.

All potentials are represented by closures pot(z, lam) returning the value
of the dz-coefficient with shape batch + lam.shape + (3, 3).  The scalar
inputs a, b, c may be plain numbers or coefficient arrays of polynomials in
mu = lambda^6 (last axis = mu powers; leading axes become batch axes).

The Fuchsian form eta lives on the thrice punctured sphere with poles at
0, 1, infinity.  The cube-cover form (cube_potential) is the gauged pullback
under z -> z^3; it is regular at z = 0 and is the one used for frame
transport during reconstruction.
"""

import numpy as np

from .loopalg import ZETA


def scalar_value(f, lam):
    """Evaluate a mu-polynomial (mu = lam^6) or pass a constant through."""
    lam = np.asarray(lam, dtype=complex)
    f = np.asarray(f, dtype=complex)
    if f.ndim == 0:
        return np.broadcast_to(f, lam.shape).copy()
    powers = lam[None, ...] ** (6 * np.arange(f.shape[-1])[(slice(None),) + (None,) * lam.ndim])
    return np.tensordot(f, powers, axes=(-1, 0))


def mat3(entries):
    """Stack a 3x3 nested list of broadcastable arrays into (..., 3, 3)."""
    flat = [np.asarray(e, dtype=complex) for row in entries for e in row]
    shape = np.broadcast_shapes(*[f.shape for f in flat])
    out = np.empty(shape + (3, 3), dtype=complex)
    for idx, f in enumerate(flat):
        out[..., idx // 3, idx % 3] = np.broadcast_to(f, shape)
    return out


# ---------------------------------------------------------------------------
# Fuchsian data

def residue_matrices(t, a, b, c, lam):
    """Residues (R0, R1, Rinf) of the Fuchsian form at 0, 1, infinity."""
    lam = np.asarray(lam, dtype=complex)
    av, bv, cv = (scalar_value(f, lam) for f in (a, b, c))
    l3 = lam ** 3
    zero = np.zeros_like(av)
    one = np.ones_like(av)
    p = t * (av + l3 * bv)          # recurring combinations
    q = t * (1j * l3 * bv - 1j * av)
    r0 = mat3([[zero, -p / l3, zero],
               [zero, -one / 3, zero],
               [q, 1j * cv * t, one / 3]])
    r1 = mat3([[zero, p / l3, q / l3],
               [-p, zero, 1j * cv * t],
               [-q, -1j * cv * t, zero]])
    return r0, r1, -r0 - r1


def eta_potential(t, a, b, c):
    """Fuchsian form value eta(z, lam); poles at z = 0 and z = 1.

    A pole whose residue vanishes identically (e.g. z = 1 at t = 0) is
    treated as removable so paths may touch it.
    """
    def pot(z, lam):
        r0, r1, _ = residue_matrices(t, a, b, c, lam)
        out = np.zeros_like(r0)
        for r, d in ((r0, z), (r1, z - 1.0)):
            if np.ndim(z) == 0 and d == 0 and not r.any():
                continue
            out = out + r / d
        return out
    return pot


# ---------------------------------------------------------------------------
# gauges and combinators

def dpw_gauge(z, lam):
    lam = np.asarray(lam, dtype=complex)
    zero = np.zeros_like(lam)
    one = np.ones_like(lam)
    return mat3([[1 / lam, zero, zero],
                 [zero, lam, 1j * z * one],
                 [zero, zero, one]])


def dpw_gauge_deriv(z, lam):
    lam = np.asarray(lam, dtype=complex)
    zero = np.zeros_like(lam)
    return mat3([[zero, zero, zero],
                 [zero, zero, 1j * np.ones_like(lam)],
                 [zero, zero, zero]])


def cube_gauge(z, lam):
    """diag(1, z, 1/z); removes the apparent singularity at z = 0."""
    lam = np.asarray(lam, dtype=complex)
    zero = np.zeros_like(lam)
    one = np.ones_like(lam)
    return mat3([[one, zero, zero],
                 [zero, z * one, zero],
                 [zero, zero, one / z]])


def cube_gauge_deriv(z, lam):
    lam = np.asarray(lam, dtype=complex)
    zero = np.zeros_like(lam)
    one = np.ones_like(lam)
    return mat3([[zero, zero, zero],
                 [zero, one, zero],
                 [zero, zero, -one / z ** 2]])


def infinity_gauge(z, lam):
    """Gauge making the cube-cover form regular at z = infinity."""
    lam = np.asarray(lam, dtype=complex)
    zero = np.zeros_like(lam)
    one = np.ones_like(lam)
    return mat3([[one, zero, zero],
                 [zero, -1j * z ** 2 * one, zero],
                 [zero, lam / z, 1j / z ** 2 * one]])


def infinity_gauge_deriv(z, lam):
    lam = np.asarray(lam, dtype=complex)
    zero = np.zeros_like(lam)
    one = np.ones_like(lam)
    return mat3([[zero, zero, zero],
                 [zero, -2j * z * one, zero],
                 [zero, -lam / z ** 2, -2j / z ** 3 * one]])


def gauge_transform(pot, g, dg):
    """pot.g = g^{-1} pot g + g^{-1} g'; frames transform as g^{-1} Psi."""
    def out(z, lam):
        gv = g(z, lam)
        gi = np.linalg.inv(gv)
        return gi @ pot(z, lam) @ gv + gi @ dg(z, lam)
    return out


def pullback(pot, phi, dphi):
    """Reparametrize a form by w -> phi(w): value pot(phi(w)) * phi'(w)."""
    def out(w, lam):
        return pot(phi(w), lam) * dphi(w)
    return out


# ---------------------------------------------------------------------------
# closed forms of the gauged potentials

def dpw_potential(t, a, b, c):
    """The DPW gauge applied to eta, as a closed form."""
    def pot(z, lam):
        lam = np.asarray(lam, dtype=complex)
        av, bv, cv = (scalar_value(f, lam) for f in (a, b, c))
        l3 = lam ** 3
        zero = np.zeros_like(av)
        return mat3([
            [zero,
             t * (av + l3 * bv) / (lam * (z - 1) * z),
             2j * lam * bv * t / (z - 1)],
            [-2 * lam * bv * t / (z - 1),
             (1 - z * (1 + 3 * cv * t)) / (3 * (z - 1) * z),
             1j * (1 - 3 * cv * t) / (3 * lam)],
            [1j * t * (av - l3 * bv) / (lam * (z - 1) * z),
             1j * cv * lam * t / (z - z ** 2),
             -(1 - z * (1 + 3 * cv * t)) / (3 * (z - 1) * z)],
        ])
    return pot


def cube_pullback_potential(t, a, b, c):
    """Pullback of the DPW form under z -> z^3, as a closed form."""
    def pot(z, lam):
        lam = np.asarray(lam, dtype=complex)
        av, bv, cv = (scalar_value(f, lam) for f in (a, b, c))
        l3 = lam ** 3
        z3 = z ** 3
        return mat3([
            [np.zeros_like(av),
             3 * t * (av + l3 * bv) / (lam * z * (z3 - 1)),
             6j * lam * bv * t * z ** 2 / (z3 - 1)],
            [-6 * lam * bv * t * z ** 2 / (z3 - 1),
             (1 - z3 * (1 + 3 * cv * t)) / (z * (z3 - 1)),
             1j * z ** 2 * (1 - 3 * cv * t) / lam],
            [3j * t * (av - l3 * bv) / (lam * z * (z3 - 1)),
             3j * cv * lam * t / (z - z ** 4),
             -(1 - z3 * (1 + 3 * cv * t)) / (z * (z3 - 1))],
        ])
    return pot


def cube_potential(t, a, b, c):
    """Cube-cover reconstruction potential, regular at z = 0.

    Singularities sit at the cube roots of unity only; this is the global
    form transported during surface reconstruction.
    """
    def pot(z, lam):
        lam = np.asarray(lam, dtype=complex)
        av, bv, cv = (scalar_value(f, lam) for f in (a, b, c))
        l3 = lam ** 3
        d = z ** 3 - 1
        return mat3([
            [np.zeros_like(av),
             3 * t * (av + l3 * bv) / (lam * d),
             6j * lam * bv * t * z / d],
            [-6 * lam * bv * t * z / d,
             -3 * cv * t * z ** 2 / d,
             1j * (1 - 3 * cv * t) / lam],
            [3j * t * (av - l3 * bv) / (lam * d),
             -3j * cv * lam * t * z / d,
             3 * cv * t * z ** 2 / d],
        ])
    return pot


def cube_potential_infinity(t, a, b, c):
    """Cube-cover form in the infinity gauge; decays at z = infinity."""
    def pot(z, lam):
        lam = np.asarray(lam, dtype=complex)
        av, bv, cv = (scalar_value(f, lam) for f in (a, b, c))
        l3 = lam ** 3
        d = z ** 3 - 1
        return mat3([
            [np.zeros_like(av),
             3j * t * z * (l3 * bv - av) / (lam * d),
             -6 * lam * bv * t / d],
            [-6j * lam * bv * t / d,
             3 * cv * t / (z - z ** 4),
             1j * (3 * cv * t - 1) / (lam * z ** 2)],
            [3 * t * z * (av + l3 * bv) / (lam * d),
             -3j * cv * lam * t / d,
             -3 * cv * t / (z - z ** 4)],
        ])
    return pot


def disc_map(j, k):
    """Chart w -> z = zeta^{j-1} - w^k onto a cube-cover disc, with derivative."""
    center = ZETA ** (j - 1)

    def phi(w):
        return center - w ** k

    def dphi(w):
        return -k * w ** (k - 1)

    return phi, dphi


def disc_potential(j, k, t, a, b, c):
    """Cube-cover form pulled back to the disc chart at zeta^{j-1}.

    Written with the w^k pole factor cancelled analytically: near w = 0
    the substitution z = zeta^{j-1} - w^k makes z^3 - 1 underflow long
    before w does, so the naive composition loses the pole.  Here
    z^3 - 1 = -w^k q(w) with q regular and nonvanishing on the chart,
    and dz/(z^3 - 1) = k dw/(w q).
    """
    ctr = ZETA ** (j - 1)
    o1, o2 = (ZETA ** m for m in range(3) if m != (j - 1) % 3)

    def pot(w, lam):
        lam = np.asarray(lam, dtype=complex)
        av, bv, cv = (scalar_value(f, lam) for f in (a, b, c))
        l3 = lam ** 3
        wk = w ** k
        z = ctr - wk
        q = (ctr - o1 - wk) * (ctr - o2 - wk)
        s = k / (w * q)
        dz = -k * w ** (k - 1)
        return mat3([
            [np.zeros_like(av),
             3 * t * (av + l3 * bv) * s / lam,
             6j * lam * bv * t * z * s],
            [-6 * lam * bv * t * z * s,
             -3 * cv * t * z ** 2 * s,
             1j * (1 - 3 * cv * t) * dz / lam],
            [3j * t * (av - l3 * bv) * s / lam,
             -3j * cv * lam * t * z * s,
             3 * cv * t * z ** 2 * s],
        ])
    return pot


def puncture_pullback_potential(k, a, b, c):
    """Pullback of the DPW form under w -> w^k + 1 at t = 1/k, closed form.

    This is the local model of the potential at the order-k puncture used by
    the energy residue computation.
    """
    def pot(w, lam):
        lam = np.asarray(lam, dtype=complex)
        av, bv, cv = (scalar_value(f, lam) for f in (a, b, c))
        l3 = lam ** 3
        wk = w ** k
        return mat3([
            [np.zeros_like(av),
             (av + l3 * bv) / (lam * w * (wk + 1)),
             2j * lam * bv / w],
            [-2 * lam * bv / w,
             (-k * wk / (wk + 1) - 3 * cv) / (3 * w),
             1j * (k - 3 * cv) * w ** (k - 1) / (3 * lam)],
            [1j * (av - l3 * bv) / (lam * w * (wk + 1)),
             -1j * cv * lam / (w ** (k + 1) + w),
             (k * wk / (wk + 1) + 3 * cv) / (3 * w)],
        ])
    return pot


def puncture_gauge(k, a, c):
    """Unimodular gauge regularizing the order-k puncture chart at w = 0."""
    def g(w, lam):
        lam = np.asarray(lam, dtype=complex)
        av = scalar_value(a, lam)
        cv = scalar_value(c, lam)
        l3 = lam ** 3
        u = w - 1.0
        one = np.ones_like(av)
        return mat3([
            [one,
             (1 - cv) * lam ** 2 * u / (2 * av * w),
             -1j * (cv - 1) * lam * u / (av * w)],
            [(cv - 1) * lam * u / av,
             (4 * av ** 2 * w ** 2 - (cv - 1) ** 2 * l3 * u ** 2) / (4 * av ** 2 * w),
             -1j * (cv - 1) ** 2 * lam ** 2 * u ** 2 / (2 * av ** 2 * w)],
            [1j * (cv - 1) * lam ** 2 * u / (2 * av),
             1j * lam * u * (4 * av ** 2 * (w + 1) - (cv - 1) ** 2 * l3 * u) / (8 * av ** 2 * w),
             (4 * av ** 2 + (cv - 1) ** 2 * l3 * u ** 2) / (4 * av ** 2 * w)],
        ])
    return g


def higgs_at_puncture(w, k, a, c, lam=None):
    """Nilpotent-limit field of the order-k puncture; cube vanishes at w=0."""
    if lam is None:
        av = complex(np.asarray(a).reshape(-1)[0])
        cv = complex(np.asarray(c).reshape(-1)[0])
    else:
        av = scalar_value(a, lam)
        cv = scalar_value(c, lam)
    wk = w ** k
    zero = np.zeros_like(av * w)
    return mat3([
        [zero, av / (wk + 1), zero],
        [zero, zero, (1j / 3) * (k - 3 * cv) * w ** (k - 3)],
        [1j * av / (wk + 1), zero, zero],
    ])


def mobius(z):
    """Moebius map sending 0, 1, infinity to zeta^2, 1, zeta."""
    s3 = np.sqrt(3.0)
    z = np.asarray(z, dtype=complex)
    return (2j * z - 1j + s3) / ((s3 - 1j) * z + 2j)


def contour_residue(fn, center, radius=1e-2, n=64):
    """Residue of a matrix- or scalar-valued function by circle quadrature."""
    theta = 2j * np.pi * np.arange(n) / n
    pts = center + radius * np.exp(theta)
    vals = np.stack([np.asarray(fn(p)) * (p - center) for p in pts])
    return vals.mean(axis=0)
