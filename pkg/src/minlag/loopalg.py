"""Order-six twisted loop algebra and loop group utilities.

Loops are stored as Laurent coefficient arrays.  A scalar loop is a complex
array c of odd length 2M+1 holding coefficients of lambda^m for
m = -M..M (index i maps to m = i - M).  A matrix loop is an array of shape
(2M+1, 3, 3) with the same index convention.  Sampling happens on grids
lam_j = r * exp(2 pi i j / n) with 6 | n so that the twist rotation
lambda -> xi*lambda is a plain index shift.
"""

import numpy as np

ZETA = np.exp(2j * np.pi / 3)          # primitive cube root of unity
XI = np.exp(1j * np.pi / 3)            # twist rotation, order six
SYM_POINT = np.exp(1j * np.pi / 6)     # evaluation point for unitary frames

# Conjugator defining the twist involution on 3x3 loops.
TWIST_CONJUGATOR = np.array(
    [[-1, 0, 0],
     [0, 0, 1j * ZETA ** 2],
     [0, 1j * ZETA, 0]], dtype=complex)
_TWIST_INV = np.linalg.inv(TWIST_CONJUGATOR)

# Conjugator mapping upper triangular matrices to the solvable normal form
# [[d1,0,x],[y,d2,z],[0,0,d3]] used to normalize positive loop factors.
SOLVABLE_CONJUGATOR = np.array(
    [[0, 1j, 0],
     [1j, 0, 0],
     [0, 0, -1]], dtype=complex)

TOL_ALG = 1e-12
TOL_TRUNC = 1e-10
DEFAULT_TRUNC = 12
ANNULUS_RADIUS = 1.2


def grid_size(bandwidth):
    """Canonical sample count for loops of the given coefficient bandwidth."""
    return 6 * (4 * int(bandwidth) + 1)


def sample_grid(n, radius=1.0):
    if n % 6 != 0:
        raise ValueError("sample count must be divisible by 6")
    return radius * np.exp(2j * np.pi * np.arange(n) / n)


# ---------------------------------------------------------------------------
# scalar loops

def eval_scalar(coeffs, lam):
    """Evaluate sum_m c_m lam^m for a centered coefficient array."""
    c = np.asarray(coeffs)
    m = np.arange(len(c)) - (len(c) // 2)
    lam = np.asarray(lam, dtype=complex)
    return (c * lam[..., None] ** m).sum(axis=-1)


def star_scalar(coeffs):
    """Involution c_m -> conj(c_{-m})."""
    return np.conj(np.asarray(coeffs))[::-1]


def positive_part(coeffs):
    """Keep coefficients with index m >= 1 only."""
    c = np.array(coeffs, dtype=complex)
    mid = len(c) // 2
    c[: mid + 1] = 0.0
    return c


def pad_scalar(coeffs, bandwidth):
    c = np.asarray(coeffs, dtype=complex)
    mid = len(c) // 2
    if bandwidth < mid:
        raise ValueError("cannot shrink without truncation")
    out = np.zeros(2 * bandwidth + 1, dtype=complex)
    out[bandwidth - mid: bandwidth + mid + 1] = c
    return out


def mul_scalar(a, b):
    return np.convolve(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


# ---------------------------------------------------------------------------
# matrix loops

def eval_loop(coeffs, lam):
    """Evaluate a matrix loop at points lam; returns shape lam.shape+(3,3)."""
    C = np.asarray(coeffs)
    M = len(C) // 2
    lam = np.asarray(lam, dtype=complex)
    powers = lam[..., None] ** (np.arange(len(C)) - M)
    return np.tensordot(powers, C, axes=(-1, 0))


def samples_from_loop(coeffs, n, radius=1.0):
    return eval_loop(coeffs, sample_grid(n, radius))


def loop_from_samples(values, bandwidth, radius=1.0):
    """Fit Laurent coefficients m = -bandwidth..bandwidth from grid samples.

    values has shape (n, 3, 3) over the canonical grid of size n.  The grid
    must satisfy n >= 2*bandwidth+1; aliasing outside the band is the
    caller's responsibility (see fourier_tail).
    """
    vals = np.asarray(values, dtype=complex)
    n = vals.shape[0]
    M = int(bandwidth)
    if n < 2 * M + 1:
        raise ValueError("grid too small for requested bandwidth")
    spec = np.fft.fft(vals, axis=0) / n
    idx = (np.arange(-M, M + 1)) % n
    coeffs = spec[idx]
    if radius != 1.0:
        coeffs = coeffs * radius ** (-np.arange(-M, M + 1, dtype=float))[:, None, None]
    return coeffs


def fourier_tail(values, bandwidth):
    """Relative spectral mass outside the coefficient band, from samples."""
    vals = np.asarray(values, dtype=complex)
    n = vals.shape[0]
    spec = np.fft.fft(vals, axis=0) / n
    mag = np.sqrt((np.abs(spec) ** 2).sum(axis=(-2, -1)))
    M = int(bandwidth)
    keep = np.zeros(n, dtype=bool)
    keep[(np.arange(-M, M + 1)) % n] = True
    total = mag.sum()
    if total == 0.0:
        return 0.0
    return mag[~keep].sum() / total


def dagger_loop(coeffs):
    """Adjoint loop F^dagger(lam) = F(1/conj(lam))^H at coefficient level."""
    C = np.asarray(coeffs)
    return np.conj(C[::-1]).transpose(0, 2, 1)


def op_norms(mats):
    """Spectral norms of a batch of matrices (largest singular values)."""
    return np.linalg.svd(np.asarray(mats), compute_uv=False)[..., 0]


def loop_norm(coeffs, n=None):
    """Sup of the operator norm over the unit circle plus the Fourier l1 norm.

    Returns (sup_norm, fourier_l1).  The second value dominates the first and
    controls evaluation on annuli.
    """
    C = np.asarray(coeffs)
    M = len(C) // 2
    if n is None:
        n = grid_size(max(M, 1)) if M else 6
    vals = samples_from_loop(C, n)
    sup = op_norms(vals).max()
    ell1 = op_norms(C).sum()
    return float(sup), float(ell1)


# ---------------------------------------------------------------------------
# twist structure

def hat_tau_group(g):
    """Group twist g -> a^{-1} (g^{-1})^T a, batched over leading axes."""
    g = np.asarray(g, dtype=complex)
    ginv_t = np.linalg.inv(g).swapaxes(-1, -2)
    return _TWIST_INV @ ginv_t @ TWIST_CONJUGATOR


def hat_tau_algebra(A):
    """Algebra twist A -> -a^{-1} A^T a, batched over leading axes."""
    A = np.asarray(A, dtype=complex)
    return -_TWIST_INV @ A.swapaxes(-1, -2) @ TWIST_CONJUGATOR


def twist_defect(coeffs, kind="group", n=None, radius=1.0):
    """Sup over a circle of || tau(F(lam)) - F(xi lam) ||_2.

    kind selects the group or algebra involution.  Loops fixed by the twist
    return 0 up to rounding; the defect is an operator norm so it is
    meaningful for non-invertible algebra elements as well.
    """
    C = np.asarray(coeffs)
    M = len(C) // 2
    if n is None:
        n = grid_size(max(M, 1))
    vals = samples_from_loop(C, n, radius)
    shifted = np.roll(vals, -n // 6, axis=0)  # F(xi * lam_j) = vals[j + n/6]
    if kind == "group":
        tw = hat_tau_group(vals)
    elif kind == "algebra":
        tw = hat_tau_algebra(vals)
    else:
        raise ValueError("kind must be 'group' or 'algebra'")
    return float(op_norms(tw - shifted).max())


def unitary_defect(coeffs, n=None):
    """Sup over the unit circle of || F(lam) F(lam)^H - Id ||_2."""
    C = np.asarray(coeffs)
    M = len(C) // 2
    if n is None:
        n = grid_size(max(M, 1))
    vals = samples_from_loop(C, n)
    prod = vals @ np.conj(vals).swapaxes(-1, -2)
    return float(op_norms(prod - np.eye(3)).max())


def graded_projector(A, d):
    """Project constant matrices onto the xi^d eigenspace of the twist."""
    A = np.asarray(A, dtype=complex)
    out = np.zeros_like(A)
    cur = A
    for j in range(6):
        out = out + XI ** (-d * j) * cur
        cur = hat_tau_algebra(cur)
    return out / 6.0


def twist_project(coeffs):
    """Project a matrix loop onto the twisted subalgebra coefficientwise.

    The lam^m coefficient is forced into the xi^m eigenspace.
    """
    C = np.asarray(coeffs, dtype=complex)
    M = len(C) // 2
    out = np.empty_like(C)
    for i in range(len(C)):
        out[i] = graded_projector(C[i], (i - M) % 6)
    return out


def eigenspace_defect(A, d):
    """Distance of a constant matrix from the xi^d twist eigenspace."""
    A = np.asarray(A, dtype=complex)
    r = hat_tau_algebra(A) - XI ** d * A
    return float(np.linalg.norm(r))
