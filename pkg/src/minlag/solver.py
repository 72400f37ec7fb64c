"""Gauss-Newton closing of the unitarization and Sym-point conditions.

The unknowns are the real mu-polynomial coefficients (mu = lambda^6) of
the three scalar functions a, b, c entering the Fuchsian form.  The
residual stacks four blocks:

  F: positive-order coefficients of A - A*   (A = (X + Y)/2 averages)
  G: positive-order coefficients of B - B*   (B read off lam^3-shifted)
  H: coefficients of 4ab - c^2 + 1, exact polynomial arithmetic
  S: Re A(lam_0) at the Sym point lam_0 = exp(pi i / 6)

where (.)* flips mu -> 1/mu with conjugate coefficients.  F and G vanish
iff the trace averages are symmetric under that flip, H normalizes the
local class of the order-three monodromies, and S closes the surface at
the Sym point.  For t > 0 the raw residual is solved; dividing F, G, S
by t^2 (the "hatted" scaling) is exposed for small-t diagnostics only.

Records are persisted in a line-oriented ``key = value`` text format.
"""

import datetime
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import charvar as cv
from . import monodromy as mono
from . import potential as pt
from .loopalg import SYM_POINT

INIT_A = 1.0 / np.sqrt(6.0)
INIT_B = -1.0 / np.sqrt(6.0)
INIT_C = 1.0 / np.sqrt(3.0)

FORMAT_VERSION = "1"
ACCEPT_TOL = 1e-10
STEP_TOL = 1e-13
NONVANISH_TOL = 1e-6

FILE_KEYS = ("format_version", "t", "branch", "N", "a_coeffs", "b_coeffs",
             "c_coeffs", "residual_sup", "ode_tol", "lambda_samples",
             "timestamp")


class SolverError(RuntimeError):
    pass


class Divergence(SolverError):
    """Residual increased on three consecutive damped steps."""


class StepUnderflow(SolverError):
    """Continuation step fell below the minimum increment."""


class VanishingCoefficient(SolverError):
    """a or c has a zero on the sample grid of the closed unit disk."""


class FileFormatError(ValueError):
    """Malformed, incomplete, or version-incompatible solution file."""


# ---------------------------------------------------------------------------
# initial data and residual assembly

def init_coeffs(n, branch="plus"):
    """Degenerate-limit initial data padded to n mu-coefficients."""
    if branch not in ("plus", "minus"):
        raise ValueError(f"unknown branch: {branch!r}")
    a = np.zeros(n)
    b = np.zeros(n)
    c = np.zeros(n)
    a[0] = INIT_A
    b[0] = INIT_B
    c[0] = INIT_C if branch == "plus" else -INIT_C
    return a, b, c


def pack(a, b, c):
    return np.concatenate([np.asarray(a, float), np.asarray(b, float),
                           np.asarray(c, float)])


def unpack(x):
    n = len(x) // 3
    return x[:n], x[n:2 * n], x[2 * n:]


def h_series(a, b, c):
    """Full coefficient list of 4ab - c^2 + 1 (length 2n - 1)."""
    h = 4.0 * np.convolve(a, b) - np.convolve(c, c)
    h[0] += 1.0
    return h


@dataclass
class ResidualVector:
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    S: float
    defects: dict = field(default_factory=dict)

    def vector(self):
        return np.concatenate([self.F, self.G, self.H, [self.S]])

    @property
    def sup_norm(self):
        return float(np.abs(self.vector()).max())


def _thread_count():
    try:
        return max(1, int(os.environ.get("FERMAT_THREADS", "1")))
    except ValueError:
        return 1


def _pair_transport(pot, lam, rtol):
    """Monodromies around 0 and 1; the two loops run independently."""
    jobs = ((pot, mono.loop_zero(), lam), (pot, mono.loop_one(), lam))
    if _thread_count() > 1:
        with ThreadPoolExecutor(max_workers=2) as ex:
            futs = [ex.submit(mono.transport, *j, rtol=rtol) for j in jobs]
            return [f.result() for f in futs]
    return [mono.transport(*j, rtol=rtol) for j in jobs]


def _trace_coefficients(t, a_rows, b_rows, c_rows, n_mu, rtol):
    """Laurent coefficients of the trace averages, batched over rows.

    Returns (A_coeffs, B_coeffs, orders, defects) where the coefficient
    arrays have shape rows x n_mu indexed by orders, and defects bounds
    the imaginary mass discarded from each.
    """
    lam = mono.spectral_samples(n_mu)
    pot = pt.eta_potential(t, a_rows, b_rows, c_rows)
    m0, m1 = _pair_transport(pot, lam, rtol)
    x, y, _, _ = mono.trace_coordinates(m0, m1)
    a_samp = 0.5 * (x + y)
    b_samp = lam ** 3 * 0.5j * (y - x)

    half = n_mu // 2
    idx = np.arange(n_mu)
    orders = ((idx + half) % n_mu) - half
    out = []
    defects = {}
    for name, samp in (("A", a_samp), ("B", b_samp)):
        spec = np.fft.fft(samp, axis=-1) / n_mu
        co = np.empty_like(spec)
        co[..., orders + half] = spec[..., idx]
        out.append(co.real.copy())
        defects[name + "_imag"] = float(np.abs(co.imag).max())
    return out[0], out[1], np.arange(-half, n_mu - half), defects


def _assemble(t, a_co, b_co, x_rows, hatted):
    """Residual rows from trace coefficients and coefficient rows."""
    n = x_rows.shape[-1] // 3
    c0 = a_co.shape[-1] // 2
    f_blk = a_co[..., c0 + 1:c0 + n + 1] - a_co[..., c0 - 1:c0 - n - 1:-1]
    g_blk = b_co[..., c0 + 1:c0 + n + 1] - b_co[..., c0:c0 - n:-1]
    signs = (-1.0) ** np.abs(np.arange(-c0, a_co.shape[-1] - c0))
    s_blk = (a_co * signs).sum(axis=-1)[..., None]
    h_blk = np.stack([h_series(*unpack(row))[:n] for row in
                      np.atleast_2d(x_rows)])
    h_blk = h_blk.reshape(f_blk.shape)
    if hatted:
        scale = 1.0 / t ** 2
        f_blk, g_blk, s_blk = (scale * v for v in (f_blk, g_blk, s_blk))
    return np.concatenate([f_blk, g_blk, h_blk, s_blk], axis=-1)


def residual(t, a, b, c, rtol=1e-12, hatted=False):
    """Closing-condition residual at coefficient data (a, b, c)."""
    if t <= 0.0:
        raise ValueError("t must be positive; the degenerate system is "
                         "handled by the limit diagnostics only")
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    c = np.asarray(c, float)
    n = len(a)
    a_co, b_co, orders, defects = _trace_coefficients(
        t, a[None, :], b[None, :], c[None, :], 4 * n, rtol)
    row = _assemble(t, a_co, b_co, pack(a, b, c)[None, :], hatted)[0]
    h_full = h_series(a, b, c)
    defects["H_tail"] = float(np.abs(h_full[n:]).max()) if n > 1 else 0.0
    tail = np.abs(orders) > n
    defects["A_tail"] = float(np.abs(a_co[0, tail]).max())
    defects["B_tail"] = float(np.abs(b_co[0, tail]).max())
    return ResidualVector(F=row[:n], G=row[n:2 * n], H=row[2 * n:3 * n],
                          S=float(row[3 * n]), defects=defects)


def residual_and_jacobian(t, x, rtol=1e-12, hatted=False, h_scale=1e-6):
    """Residual and forward-difference Jacobian in one batched transport.

    Column steps are h_scale * max(1, |coefficient|).  Row 0 of the
    transported batch is the base point; columns follow in coefficient
    order a_0..a_{n-1}, b_..., c_....
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    x = np.asarray(x, float)
    m = len(x)
    n = m // 3
    steps = h_scale * np.maximum(1.0, np.abs(x))
    rows = np.tile(x, (m + 1, 1))
    rows[1:] += np.diag(steps)
    a_rows, b_rows, c_rows = rows[:, :n], rows[:, n:2 * n], rows[:, 2 * n:]
    a_co, b_co, _, defects = _trace_coefficients(
        t, a_rows, b_rows, c_rows, 4 * n, rtol)
    res = _assemble(t, a_co, b_co, rows, hatted)
    jac = (res[1:] - res[0]).T / steps
    return res[0], jac, defects


def jacobian(t, x, rtol=1e-12, hatted=False, h_scale=1e-6):
    """Forward-difference Jacobian of the stacked residual, (3n+1) x 3n."""
    return residual_and_jacobian(t, x, rtol, hatted, h_scale)[1]


# ---------------------------------------------------------------------------
# records

@dataclass
class SolutionRecord:
    t: float
    branch: str
    n_coeffs: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    residual_sup: float
    ode_tol: float
    lambda_samples: int
    timestamp: str
    norms: dict = field(default_factory=dict)
    verification: dict = field(default_factory=dict)

    def coeffs(self):
        return self.a, self.b, self.c


def _branch_of(c_coeffs):
    return "plus" if c_coeffs[0] > 0 else "minus"


def sym_trace_target(t, branch):
    """Commutator trace of the closed system at the Sym point."""
    z = 2.0 * np.exp(-2j * np.pi * t) + np.exp(4j * np.pi * t)
    return z if branch == "plus" else np.conj(z)


def nonvanishing_check(a, c, tol=NONVANISH_TOL):
    """Min |a(lam)|, |c(lam)| over a 24-point grid of the closed disk."""
    radii = np.array([0.25, 0.5, 0.75, 1.0])
    angles = np.exp(1j * np.pi * (2 * np.arange(6) + 1) / 6.0)
    lam = (radii[:, None] * angles[None, :]).ravel()
    mins = []
    for f in (a, c):
        vals = pt.scalar_value(np.asarray(f, complex), lam)
        mins.append(float(np.abs(vals).min()))
    if min(mins) < tol:
        raise VanishingCoefficient(
            f"coefficient function vanishes on the disk grid: "
            f"min |a| = {mins[0]:.3e}, min |c| = {mins[1]:.3e}")
    return {"a_min": mins[0], "c_min": mins[1]}


def verify_record(rec, n_fresh=48, rtol=1e-12):
    """Independent checks at fresh unit-circle samples.

    Uses full-circle lambda samples distinct from the solving grid,
    evaluates the unitarizability defect and component label at each, and
    checks the Sym-point closing values.
    """
    lam = np.exp(2j * np.pi * (np.arange(n_fresh) + 0.37) / n_fresh)
    lam = np.append(lam, SYM_POINT)
    pot = pt.eta_potential(rec.t, rec.a, rec.b, rec.c)
    m0, m1 = _pair_transport(pot, lam, rtol)
    x, y, z, zt = mono.trace_coordinates(m0, m1)

    defect = cv.unitarity_defect(x[:-1], y[:-1], z[:-1], zt[:-1])
    labels = {cv.classify(x[i], y[i], z[i], rec.t)
              for i in range(n_fresh)}
    b_sym = 0.5j * (y[-1] - x[-1])
    out = {
        "unitarity_sup": float(defect.max()),
        "labels": sorted(labels),
        "sym_X": float(abs(x[-1])),
        "sym_Y": float(abs(y[-1])),
        "sym_B": float(abs(b_sym)),
        "sym_Z_err": float(abs(z[-1] - sym_trace_target(rec.t, rec.branch))),
        "lawton_sup": float(np.abs(cv.lawton_P(x, y, z, rec.t)).max()),
    }
    return out


# ---------------------------------------------------------------------------
# Gauss-Newton and continuation

def solve_at(t, init, accept_tol=ACCEPT_TOL, rtol=1e-12, max_iter=30,
             verify=True):
    """Damped Gauss-Newton for the closing conditions at fixed t.

    init is a coefficient triple (a, b, c).  The (3n+1) x 3n least-squares
    steps use a QR factorization; backtracking halves the step up to eight
    times on an increase of the residual 2-norm.  Raises Divergence after
    three consecutive damped steps that still increased the norm.
    """
    x = pack(*init)
    n = len(x) // 3
    increases = 0
    defects = {}
    sup = np.inf
    converged = False
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        r, jac, defects = residual_and_jacobian(t, x, rtol=rtol)
        sup = float(np.abs(r).max())
        if sup < accept_tol:
            converged = True
            break
        step, *_ = scipy.linalg.lstsq(jac, -r, lapack_driver="gelsy")
        if float(np.abs(step).max()) < STEP_TOL:
            converged = True
            break
        base = float(np.linalg.norm(r))
        alpha = 1.0
        trial = None
        trial_norm = np.inf
        for _ in range(9):
            cand = x + alpha * step
            rc = residual(t, *unpack(cand), rtol=rtol)
            norm = float(np.linalg.norm(rc.vector()))
            if norm < base:
                trial, trial_sup = cand, rc.sup_norm
                break
            if norm < trial_norm:
                trial, trial_norm, trial_sup = cand, norm, rc.sup_norm
            alpha *= 0.5
        else:
            increases += 1
            if increases >= 3:
                raise Divergence(
                    f"residual increased on {increases} consecutive damped "
                    f"steps at t = {t:.6g}")
            x = trial
            sup = trial_sup
            continue
        increases = 0
        x = trial
        sup = trial_sup
    if not converged and not sup < accept_tol:
        raise Divergence(f"no convergence in {max_iter} iterations at "
                         f"t = {t:.6g} (residual sup {sup:.3e})")

    a, b, c = unpack(x)
    rec = SolutionRecord(
        t=float(t), branch=_branch_of(c), n_coeffs=n,
        a=a.copy(), b=b.copy(), c=c.copy(),
        residual_sup=sup, ode_tol=rtol, lambda_samples=4 * n,
        timestamp=datetime.datetime.now(datetime.timezone.utc)
        .strftime("%Y-%m-%dT%H:%M:%SZ"),
        norms=dict(defects, iterations=iterations))
    rec.norms.update(nonvanishing_check(a, c))
    if verify:
        rec.verification = verify_record(rec, rtol=rtol)
    return rec


def continuation(t_target, steps=None, branch="plus", n_coeffs=12,
                 accept_tol=ACCEPT_TOL, rtol=1e-12, t_start=1e-3,
                 growth=1.4, verify_final=True, callback=None):
    """Warm-started family of solutions from t_start up to t_target.

    Returns every accepted record in order of increasing t.  The step is
    adaptive: grown by the growth factor on success, halved on divergence,
    error below 1e-6 increments.  steps, when given, fixes the initial
    increment to (t_target - t_start)/steps; growth=1.0 marches uniformly.
    """
    if not 0.0 < t_target < 1.0 / 3.0:
        raise ValueError("t_target must lie in (0, 1/3)")
    records = []
    cur = solve_at(t_start, init_coeffs(n_coeffs, branch),
                   accept_tol=accept_tol, rtol=rtol, verify=False)
    records.append(cur)
    if callback:
        callback(cur)
    dt = (t_target - t_start) / steps if steps else 8e-3
    guess = pack(*cur.coeffs())
    prev = None
    while cur.t < t_target - 1e-14:
        tn = min(cur.t + dt, t_target)
        if prev is not None and prev.t < cur.t:
            # secant predictor along the family
            w = (tn - cur.t) / (cur.t - prev.t)
            guess = pack(*cur.coeffs()) * (1 + w) - pack(*prev.coeffs()) * w
        else:
            guess = pack(*cur.coeffs())
        try:
            nxt = solve_at(tn, unpack(guess), accept_tol=accept_tol,
                           rtol=rtol,
                           verify=verify_final and tn >= t_target - 1e-14)
        except SolverError:
            dt *= 0.5
            if dt < 1e-6:
                raise StepUnderflow(
                    f"continuation step underflow near t = {cur.t:.6g}")
            continue
        prev, cur = cur, nxt
        records.append(cur)
        if callback:
            callback(cur)
        dt *= growth
    return records


# ---------------------------------------------------------------------------
# persistence

def _fmt_value(v):
    if isinstance(v, np.ndarray):
        return ", ".join(f"{float(e):.17g}" for e in v)
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def save(rec, path):
    """Write a record as line-oriented ``key = value`` text."""
    values = {
        "format_version": FORMAT_VERSION,
        "t": rec.t,
        "branch": rec.branch,
        "N": rec.n_coeffs,
        "a_coeffs": rec.a,
        "b_coeffs": rec.b,
        "c_coeffs": rec.c,
        "residual_sup": rec.residual_sup,
        "ode_tol": rec.ode_tol,
        "lambda_samples": rec.lambda_samples,
        "timestamp": rec.timestamp,
    }
    with open(path, "w") as fh:
        for key in FILE_KEYS:
            fh.write(f"{key} = {_fmt_value(values[key])}\n")
    return path


def parse_kv(text):
    """Parse ``key = value`` lines; later duplicates win, # comments."""
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FileFormatError(f"not a key = value line: {line!r}")
        key, _, val = line.partition("=")
        out[key.strip()] = val.strip()
    return out


def _floats(s):
    return np.array([float(p) for p in s.split(",")]) if s else np.array([])


def load(path):
    """Read a record saved by save(); validates version and fields."""
    with open(path) as fh:
        kv = parse_kv(fh.read())
    if kv.get("format_version") != FORMAT_VERSION:
        raise FileFormatError(
            f"unsupported format_version: {kv.get('format_version')!r} "
            f"(expected {FORMAT_VERSION})")
    for key in FILE_KEYS:
        if key not in kv:
            raise FileFormatError(f"missing field: {key}")
    a = _floats(kv["a_coeffs"])
    b = _floats(kv["b_coeffs"])
    c = _floats(kv["c_coeffs"])
    n = int(kv["N"])
    if not len(a) == len(b) == len(c) == n:
        raise FileFormatError("coefficient vector lengths disagree with N")
    return SolutionRecord(
        t=float(kv["t"]), branch=kv["branch"], n_coeffs=n, a=a, b=b, c=c,
        residual_sup=float(kv["residual_sup"]), ode_tol=float(kv["ode_tol"]),
        lambda_samples=int(kv["lambda_samples"]), timestamp=kv["timestamp"])
