"""Loop group Iwasawa factorization through matrix spectral factorization.

Splits an invertible matrix loop Omega into B * F where B extends
holomorphically to the unit disk (nonnegative Laurent indices, constant
term normalized inside a solvable subgroup) and F is unitary on the unit
circle.  The positive factor comes from factorizing the Hermitian loop
G = Omega * dagger(Omega): a Bauer block-Toeplitz Cholesky supplies the
initial guess, Wilson's Newton iteration refines it to machine precision.

The constant-term convention follows loopalg.SOLVABLE_CONJUGATOR: B(0)
lies in c . Upper+ . c^-1, the conjugated upper triangular subgroup with
positive real diagonal.  Plain upper triangular normalization would not
commute with the order-six twist, so twisted input loops would lose
their twist in the factors.
"""

from dataclasses import dataclass

import numpy as np

from . import loopalg as la
from .loopalg import SOLVABLE_CONJUGATOR

TOL_IW = 1e-9
_WILSON_TOL = 1e-12
_WILSON_MAX = 50
_MAX_DOUBLINGS = 3

_C = SOLVABLE_CONJUGATOR
_CH = SOLVABLE_CONJUGATOR.conj().T  # unitary, so this is the inverse


class FactorizationError(RuntimeError):
    """Spectral factorization or constant-term normalization failed."""


class UnitarizeError(RuntimeError):
    """No unique positive invariant Hermitian form exists."""


@dataclass
class IwasawaFactors:
    """Positive and unitary factors with their measured defects.

    B and F are centered Laurent coefficient arrays; B has exactly zero
    coefficients at negative indices.  defects holds sup norms over the
    unit circle: product |BF - Omega|, unitary |F F^H - Id|, positivity
    (deviation of B(0) from the solvable normal form), and twist (max of
    the two factor twist defects; only meaningful for twisted input).
    """

    B: np.ndarray
    F: np.ndarray
    defects: dict


def _mul_loop(A, B):
    """Exact coefficient product of two matrix loops."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    m = len(A) // 2 + len(B) // 2
    n = 6 * (m + 1)
    lam = la.sample_grid(n)
    vals = la.eval_loop(A, lam) @ la.eval_loop(B, lam)
    return la.loop_from_samples(vals, m)


def _eval_analytic(coeffs, lam):
    """Evaluate an analytic (nonnegative-index) coefficient stack."""
    powers = lam[..., None] ** np.arange(len(coeffs))
    return np.tensordot(powers, np.asarray(coeffs), axes=(-1, 0))


def _bauer(G, K):
    """Cholesky of the block Toeplitz section; last block row -> factor.

    The (i, j) block is the lambda^(i-j) coefficient of G.  The bottom
    row of the lower Cholesky factor approximates the spectral factor
    coefficients B_j at block column N - j, converging geometrically in
    the section size.
    """
    m = len(G) // 2
    nblk = 2 * K + 1
    T = np.zeros((3 * nblk, 3 * nblk), dtype=complex)
    for off in range(-m, m + 1):
        blk = G[m + off]
        for i in range(max(0, off), min(nblk, nblk + off)):
            j = i - off
            T[3 * i: 3 * i + 3, 3 * j: 3 * j + 3] = blk
    try:
        L = np.linalg.cholesky(T)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            "block Toeplitz section is not positive definite") from exc
    N = nblk - 1
    out = np.empty((K + 1, 3, 3), dtype=complex)
    for j in range(K + 1):
        out[j] = L[3 * N: 3 * N + 3, 3 * (N - j): 3 * (N - j) + 3]
    return out


def _wilson(psi, G, K):
    """Newton refinement psi <- psi * [psi^-1 G psi^-H + Id]_+ .

    [.]_+ keeps nonnegative Fourier indices with half weight on index 0,
    the unique splitting making the fixed point satisfy psi psi^H = G.
    """
    n = la.grid_size(K)
    lam = la.sample_grid(n)
    Gs = la.eval_loop(G, lam)
    eye = np.eye(3)
    for _ in range(_WILSON_MAX):
        Ps = _eval_analytic(psi, lam)
        Pinv = np.linalg.inv(Ps)
        W = Pinv @ Gs @ Pinv.conj().swapaxes(-1, -2) + eye
        spec = np.fft.fft(W, axis=0)[: K + 1] / n
        spec[0] *= 0.5
        prod = Ps @ _eval_analytic(spec, lam)
        new = np.fft.fft(prod, axis=0)[: K + 1] / n
        rel = np.abs(new - psi).max() / np.abs(psi).max()
        psi = new
        if rel < _WILSON_TOL:
            break
    return psi


def _lower_fix(psi):
    """Rotate so the constant term is lower triangular, positive diagonal."""
    q, r = np.linalg.qr(psi[0].conj().T)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))[None, :]
    return psi @ q


def spectral_factorize(G, tol=TOL_IW):
    """Analytic factor B with B(lam) B(lam)^H = G(lam) on the circle.

    G is a centered coefficient array of a Hermitian positive definite
    loop.  The output bandwidth starts at twice the input bandwidth plus
    eight and doubles when the factorization defect stays above tol
    (analytic factors of analytic loops have geometrically decaying
    coefficients, so a modest band almost always suffices).  Returns a
    centered array whose negative-index blocks are exactly zero and
    whose constant term is lower triangular with positive diagonal.
    """
    G = np.asarray(G, dtype=complex)
    if G.ndim != 3 or len(G) % 2 != 1 or G.shape[1:] != (3, 3):
        raise ValueError("expected a centered (2M+1, 3, 3) coefficient array")
    G = 0.5 * (G + la.dagger_loop(G))
    K = 2 * (len(G) // 2) + 8
    defect = np.inf
    for _ in range(_MAX_DOUBLINGS + 1):
        psi = _lower_fix(_wilson(_bauer(G, K), G, K))
        lam = la.sample_grid(la.grid_size(K))
        Bs = _eval_analytic(psi, lam)
        Gs = la.eval_loop(G, lam)
        defect = la.op_norms(Bs @ Bs.conj().swapaxes(-1, -2) - Gs).max()
        if defect <= tol:
            out = np.zeros((2 * K + 1, 3, 3), dtype=complex)
            out[K:] = psi
            return out
        K *= 2
    raise FactorizationError(
        f"factorization defect {defect:.3e} exceeds {tol:.1e} "
        f"after {_MAX_DOUBLINGS} bandwidth doublings")


def _normal_form_residual(b0):
    """Distance of a constant term from the solvable normal form."""
    u = _CH @ b0 @ _C
    d = np.diagonal(u)
    off = np.abs(np.tril(u, -1)).sum()
    return float(off + np.abs(d.imag).sum() + max(0.0, -d.real.min()))


def iwasawa(Omega, tol=TOL_IW):
    """Factor a matrix loop as B * F, positive times unitary.

    Omega is a centered coefficient array, invertible on the circle.
    B(0) is normalized into the conjugated solvable subgroup by a
    constant QR rotation that F absorbs, so the pair is unique.
    """
    Om = np.asarray(Omega, dtype=complex)
    G = _mul_loop(Om, la.dagger_loop(Om))
    Bt = spectral_factorize(G, tol)
    Kb = len(Bt) // 2
    b0 = Bt[Kb]
    Q = _CH @ b0 @ _C
    if abs(np.linalg.det(Q)) < 1e-300:
        raise FactorizationError("normalization failed: B(0) singular")
    q, r = np.linalg.qr(np.linalg.inv(Q))
    d = np.diagonal(r)
    q = q * (d / np.abs(d))[None, :]
    k = _C @ q @ _CH
    B = Bt @ k

    Kf = Kb + len(Om) // 2
    lam = la.sample_grid(la.grid_size(max(Kf, 1)))
    Bs = la.eval_loop(B, lam)
    F = la.loop_from_samples(np.linalg.solve(Bs, la.eval_loop(Om, lam)), Kf)
    Fs = la.eval_loop(F, lam)

    defects = {
        "product": float(la.op_norms(Bs @ Fs - la.eval_loop(Om, lam)).max()),
        "unitary": float(la.op_norms(
            Fs @ Fs.conj().swapaxes(-1, -2) - np.eye(3)).max()),
        "positivity": _normal_form_residual(B[Kb]),
        "twist": float(max(la.twist_defect(B), la.twist_defect(F))),
    }
    return IwasawaFactors(B=B, F=F, defects=defects)


# ---------------------------------------------------------------------------
# pointwise unitarizer

def _hermitian_basis():
    out = np.zeros((9, 3, 3), dtype=complex)
    for i in range(3):
        out[i, i, i] = 1.0
    idx = 3
    for i, j in ((0, 1), (0, 2), (1, 2)):
        out[idx, i, j] = out[idx, j, i] = 1.0
        out[idx + 1, i, j] = 1j
        out[idx + 1, j, i] = -1j
        idx += 2
    return out


_HBASIS = _hermitian_basis()


def _herm_vec(h):
    """Real coordinates of a Hermitian matrix (diagonal, then off pairs)."""
    return np.array([
        h[0, 0].real, h[1, 1].real, h[2, 2].real,
        h[0, 1].real, h[0, 1].imag,
        h[0, 2].real, h[0, 2].imag,
        h[1, 2].real, h[1, 2].imag,
    ])


def pointwise_unitarizer(m0, m1, null_tol=1e-6, sep_tol=1e-4):
    """Constant C with C m0 C^-1 and C m1 C^-1 unitary.

    Solves m^H H m = H over the nine-dimensional real space of Hermitian
    forms by SVD null-space extraction.  The null space must be exactly
    one-dimensional (irreducible unitarizable pair) and the form must be
    definite; H is then normalized to det 1 and split as H = C^H C with
    C in the conjugated solvable subgroup.
    """
    m0 = np.asarray(m0, dtype=complex)
    m1 = np.asarray(m1, dtype=complex)
    A = np.empty((18, 9))
    for a, m in enumerate((m0, m1)):
        mh = m.conj().T
        for b in range(9):
            A[9 * a: 9 * a + 9, b] = _herm_vec(mh @ _HBASIS[b] @ m - _HBASIS[b])
    _, s, vt = np.linalg.svd(A)
    if s[-1] > null_tol * s[0]:
        raise UnitarizeError(
            "null space dimension != 1: no invariant Hermitian form "
            f"(smallest singular value ratio {s[-1] / s[0]:.2e})")
    if s[-2] < sep_tol * s[0]:
        raise UnitarizeError(
            "null space dimension != 1: invariant form is not unique "
            "(reducible representation)")
    H = np.tensordot(vt[-1], _HBASIS, axes=(0, 0))
    H = 0.5 * (H + H.conj().T)
    w = np.linalg.eigvalsh(H)
    if w[0] * w[-1] <= 0:
        raise UnitarizeError(
            "invariant form is not definite (mixed signature): "
            "representation is not unitarizable")
    if w[-1] < 0:
        H = -H
    H = H / np.linalg.det(H).real ** (1.0 / 3.0)
    lower = np.linalg.cholesky(_CH @ H @ _C)
    return _C @ lower.conj().T @ _CH
