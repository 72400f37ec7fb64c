"""Relative SL(3,C) character variety of the thrice-punctured sphere.

Trace coordinates (X, Y, Z) of the two generating monodromies satisfy a
single polynomial relation which is quadratic in Z.  This module evaluates
that relation, extracts the two Z-roots, locates the reducible locus,
classifies points of the real locus into connected components, and exports
the component boundary curves.

Conventions: X = tr(M1 M0^-1), Y = tr(M1^-1 M0), Z = tr(M1 M0 M1^-1 M0^-1)
and Ztilde = tr(M0 M1 M0^-1 M1^-1), with t in (0, 1/3) the local exponent
of the monodromy around the puncture at 1.
"""

import csv

import numpy as np

SQRT_CLAMP = -1e-12


def _cosines(t):
    w = 2.0 * np.pi * t
    return np.cos(w), np.cos(2.0 * w), np.cos(3.0 * w), np.cos(4.0 * w)


def lawton_P(x, y, z, t):
    """Defining polynomial of the relative character variety."""
    c2, c4, c6, _ = _cosines(t)
    return (2.0 * (2.0 * c2 + c4) * (x * y - z) + 4.0 * c6
            + x ** 3 - x * y * (z + 3.0) + y ** 3 + z ** 2 + 5.0)


def root_sum(x, y, t):
    """Sum of the two Z-roots over a fixed (X, Y)."""
    c2, c4, _, _ = _cosines(t)
    return 4.0 * c2 + 2.0 * c4 + x * y


def discriminant(x, y, t):
    """Discriminant of the defining polynomial as a quadratic in Z."""
    c2, c4, c6, _ = _cosines(t)
    return (root_sum(x, y, t) ** 2
            - 4.0 * (2.0 * x * y * (2.0 * c2 + c4) + 4.0 * c6
                     + x ** 3 - 3.0 * x * y + y ** 3 + 5.0))


def z_roots(x, y, t):
    """Both Z-roots over a given (X, Y).

    The root with the smaller imaginary part comes first (ties broken by
    the real part), so for X = Y = 0 the first entry is the commutator
    trace of the distinguished unitary representation and the second that
    of its contragredient.
    """
    s = complex(root_sum(x, y, t))
    r = np.sqrt(np.complex128(discriminant(x, y, t)))
    za, zb = 0.5 * (s - r), 0.5 * (s + r)
    if (za.imag, za.real) <= (zb.imag, zb.real):
        return za, zb
    return zb, za


def other_root(x, y, z, t):
    """The second Z-root determined by (X, Y) and one known root."""
    return root_sum(x, y, t) - z


def discriminant_real(a_coord, b_coord, t):
    """Discriminant on the real locus X = A + iB, Y = A - iB."""
    A = np.asarray(a_coord, dtype=float)
    B = np.asarray(b_coord, dtype=float)
    c2, c4, c6, c8 = _cosines(t)
    r2 = A * A + B * B
    return (-8.0 * c2 * (r2 - 1.0) - 4.0 * c4 * (r2 - 2.0) - 8.0 * c6
            + 2.0 * c8 + A ** 4 - 8.0 * A ** 3 + 12.0 * A ** 2
            + 2.0 * (A * (A + 12.0) + 6.0) * B ** 2 + B ** 4 - 10.0)


def _clamped_sqrt(v):
    # Arguments slightly below zero come from rounding on the boundary
    # curves; anything below SQRT_CLAMP is genuinely outside the domain.
    v = np.asarray(v, dtype=float)
    return np.where(v >= SQRT_CLAMP, np.sqrt(np.maximum(v, 0.0)), np.nan)


def boundary_b(a_coord, t):
    """Nonnegative boundary branches (B1, B2) of the real discriminant.

    The zero level of discriminant_real at fixed A consists of up to four
    B-values: B1 <= B2 returned here and their mirror images -B1, -B2.
    Entries are nan where the branch does not exist.
    """
    A = np.asarray(a_coord, dtype=float)
    c2, c4, _, _ = _cosines(t)
    h = _clamped_sqrt((A + 1.0 - c2) ** 2 * (4.0 * c2 + 2.0 * A + 5.0))
    r = 4.0 * c2 + 2.0 * c4 - A * A - 12.0 * A - 6.0
    return _clamped_sqrt(r - 4.0 * h), _clamped_sqrt(r + 4.0 * h)


def reducible_points(t):
    """Trace coordinates of the three reducible (singular) points."""
    s2 = np.sin(np.pi * t) ** 2
    z = -2.0 * np.cos(2.0 * np.pi * t) + 2.0 * np.cos(4.0 * np.pi * t) + 3.0
    x1 = 4.0 * s2
    x2 = -2j * (np.sqrt(3.0) - 1j) * s2
    y2 = 2j * (np.sqrt(3.0) + 1j) * s2
    return ((x1 + 0j, x1 + 0j, z + 0j), (x2, y2, z + 0j), (y2, x2, z + 0j))


def component_ranges(t):
    """A-intervals of the four components of the real locus.

    "u_split" is the part of C_u where the band has two lobes separated by
    a positive-discriminant gap; "u_full" is the single-band part ending at
    the reducible corner A = 4 sin^2(pi t).
    """
    c2 = np.cos(2.0 * np.pi * t)
    half = np.pi * t / 2.0
    corner = 4.0 * np.sin(np.pi * t) ** 2
    return {
        "minus1": (-2.0 * c2 - 2.5, c2 - 1.0),
        "u_split": (c2 - 1.0, -8.0 * np.sin(half) ** 2 * np.cos(np.pi * t)),
        "u_full": (-8.0 * np.sin(half) ** 2 * np.cos(np.pi * t), corner),
        "plus": (corner, 8.0 * np.cos(half) ** 2 * np.cos(np.pi * t)),
    }


def unitarity_defect(x, y, z, ztilde):
    """Deviation from the necessary unitarizability conditions.

    Zero iff conj(X) = Y and conj(Z) = Ztilde.  Accepts arrays.
    """
    return np.abs(np.conj(x) - y) + np.abs(np.conj(z) - ztilde)


def classify(x, y, z, t, tol=1e-6):
    """Total classification of a trace point.

    Returns one of "C_u", "C_plus", "C_minus1_plus", "C_minus1_minus",
    "reducible", "off_real_locus".  Points failing the real-locus test,
    and real-locus points outside every component band, get the last
    label.
    """
    x, y, z = complex(x), complex(y), complex(z)
    for p in reducible_points(t):
        if max(abs(x - p[0]), abs(y - p[1]), abs(z - p[2])) < tol:
            return "reducible"
    if abs(np.conj(x) - y) > tol:
        return "off_real_locus"
    if abs(np.conj(z) - other_root(x, y, z, t)) > tol:
        return "off_real_locus"

    A = 0.5 * (x + y).real
    B = 0.5 * (x - y).imag
    b1, b2 = (float(v) for v in boundary_b(A, t))
    rng = component_ranges(t)
    slack = 1e-9

    def in_range(key):
        lo, hi = rng[key]
        return lo - slack <= A <= hi + slack

    def in_band(lo, hi):
        if np.isnan(lo) or np.isnan(hi):
            return False
        return lo - slack <= B <= hi + slack

    if in_range("u_split") and (in_band(b1, b2) or in_band(-b2, -b1)):
        return "C_u"
    if in_range("u_full") and in_band(-b2, b2):
        return "C_u"
    if in_range("minus1"):
        if in_band(b1, b2):
            return "C_minus1_plus"
        if in_band(-b2, -b1):
            return "C_minus1_minus"
    if in_range("plus") and in_band(-b2, b2):
        return "C_plus"
    return "off_real_locus"


def write_boundary_csv(path, t, n_samples=600):
    """Write the zero level of the real discriminant as boundary curves.

    Columns A, B, branch with branch in {B1, B2, B3, B4}.  The A-grid
    covers the window spanned by the four components; grid points where a
    branch does not exist are omitted.
    """
    rng = component_ranges(t)
    grid = np.linspace(rng["minus1"][0], rng["plus"][1], n_samples)
    b1, b2 = boundary_b(grid, t)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["A", "B", "branch"])
        for name, vals in (("B1", b1), ("B2", b2), ("B3", -b1), ("B4", -b2)):
            for av, bv in zip(grid, vals):
                if np.isfinite(bv):
                    writer.writerow([f"{av:.12g}", f"{bv:.12g}", name])
    return path
