"""Moment generating function of the limit law by ODE shooting.

With ``eta = 2 lambda`` the transform is ``Phi(lambda) = g(start) / g(inf)``
where ``g`` solves

    g'' - 2 V'(x) g' + eta g = 0.

Odd d: ``g(-inf) = 1`` and ``start = -inf``.  Even d: ``g(0) = 1, g'(0) = 0``.

The damping coefficient ``-2V'`` grows like ``|x|^{d-1}`` which makes the
first-order system stiff; it is integrated with the three-stage Radau IIA
collocation method (order 5, L-stable), vectorized over many ``eta`` at
once.  The state is renormalized every step and the scale factors are summed
in log space, so ``log g(inf)`` stays finite even where ``g(inf)`` itself
would overflow (``lambda = -800`` gives ``log g ~ 900``).

Boundary data at large ``|x|`` come from the formal solution of the Riccati
equation for ``w = g'/g``:

    w' + w^2 - 2V' w + eta = 0,   w = sum_k a_k x^{-k},

which yields ``log g(x) = log g(+-inf) + psi(x)`` with
``psi(x) = sum_{k>=2} a_k x^{1-k} / (1 - k)``.  The sum is truncated where
its terms stop decreasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .potentials import ModelSpec

__all__ = [
    "ShootControls",
    "TransformEval",
    "riccati_coefficients",
    "series_log_and_slope",
    "radau_march",
    "build_grid",
    "shoot_g",
    "shoot_log_g_batch",
    "phi",
    "log_phi",
    "phi_on_imaginary_axis",
]

_S6 = math.sqrt(6.0)
RADAU_C = np.array([(4.0 - _S6) / 10.0, (4.0 + _S6) / 10.0, 1.0])
RADAU_A = np.array([
    [(88.0 - 7.0 * _S6) / 360.0, (296.0 - 169.0 * _S6) / 1800.0, (-2.0 + 3.0 * _S6) / 225.0],
    [(296.0 + 169.0 * _S6) / 1800.0, (88.0 + 7.0 * _S6) / 360.0, (-2.0 - 3.0 * _S6) / 225.0],
    [(16.0 - _S6) / 36.0, (16.0 + _S6) / 36.0, 1.0 / 9.0],
])
RADAU_ORDER = 5


@dataclass(frozen=True)
class ShootControls:
    """Integration window and step controls.

    ``x_left`` / ``x_right`` of ``None`` select the defaults (-30 for odd d;
    12 for d = 3, 8 for d >= 4).  Both ends widen automatically to
    ``widen * |eta|^{1/d}``.  ``h0`` is the base step; the local step is
    ``h0 / (1 + |slow rate|)``.  With ``refine`` the shot is repeated at
    ``h0 / 2`` and the two results are Richardson-combined.
    """

    x_left: float | None = None
    x_right: float | None = None
    h0: float = 0.05
    widen: float = 4.0
    refine: bool = True
    max_terms: int = 80
    chunk: int = 256

    def window(self, model: ModelSpec, eta_abs_max: float) -> tuple[float, float]:
        reach = self.widen * eta_abs_max ** (1.0 / model.d)
        xr = self.x_right if self.x_right is not None else (12.0 if model.d == 3 else 8.0)
        xr = max(xr, reach)
        if model.odd:
            xl = self.x_left if self.x_left is not None else -30.0
            xl = min(xl, -reach)
        else:
            xl = 0.0
        return xl, xr


@dataclass
class TransformEval:
    """Result of one shot at a single eta."""

    model: ModelSpec
    eta: complex
    g_start: complex
    log_g_infinity: complex
    x_left: float
    x_right: float
    err_estimate: float
    converged: bool
    grid: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    g_grid: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    @property
    def g_infinity(self) -> complex:
        return complex(np.exp(self.log_g_infinity))

    @property
    def log_phi(self) -> complex:
        return -self.log_g_infinity

    @property
    def phi(self) -> complex:
        return complex(np.exp(-self.log_g_infinity))


# ---------------------------------------------------------------------------
# formal Riccati series
# ---------------------------------------------------------------------------

def riccati_coefficients(p_coeffs, r_coeffs, n_terms: int) -> np.ndarray:
    """Coefficients a_1..a_N of the formal solution w = sum a_k x^{-k} of

        w' + w^2 + p(x) w + r(x) = 0,

    with ``p`` a polynomial of degree m >= 1 (ascending coefficients) and
    ``r`` a polynomial of degree < m whose coefficients may be arrays (one
    entry per parameter value).  Returns shape ``(N + 1, ...)`` with row 0
    unused (zero).
    """
    p = [complex(c) for c in p_coeffs]
    m = len(p) - 1
    while m > 0 and p[m] == 0:
        m -= 1
    if m < 1:
        raise ValueError("p must have degree >= 1")
    r = [np.asarray(c, dtype=complex) for c in r_coeffs]
    if len(r) - 1 >= m and any(np.any(rc != 0) for rc in r[m:]):
        raise ValueError("deg r must be below deg p")
    shape = np.broadcast(*r).shape if r else ()
    a = np.zeros((n_terms + 1,) + shape, dtype=complex)
    # equation at power x^{-n}: sum_j p_j a_{n+j} - (n-1) a_{n-1} + sum_{i+k=n} a_i a_k + r_{-n} = 0
    for n in range(1 - m, n_terms - m + 1):
        top = n + m
        if top < 1:
            continue
        acc = np.zeros(shape, dtype=complex)
        for j in range(m):
            idx = n + j
            if 1 <= idx <= n_terms:
                acc = acc + p[j] * a[idx]
        if 1 <= n - 1:
            acc = acc - (n - 1) * a[n - 1]
        for i in range(1, n):
            acc = acc + a[i] * a[n - i]
        if n <= 0 and -n < len(r):
            acc = acc + r[-n]
        a[top] = -acc / p[m]
    return a


def series_log_and_slope(a: np.ndarray, x: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate psi(x) = a_1 log|x| + sum_{k>=2} a_k x^{1-k}/(1-k) and w(x).

    Each parameter column is truncated at its smallest term.  Returns
    (psi, w, size of the first omitted term).
    """
    n_terms = a.shape[0] - 1
    flat = a.reshape(n_terms + 1, -1)
    ncol = flat.shape[1]
    k = np.arange(2, n_terms + 1)[:, None]
    terms_psi = flat[2:] * float(x) ** (1 - k) / (1 - k)
    terms_w = flat[2:] * float(x) ** (-k)
    size = np.abs(terms_psi) + np.abs(terms_w) * abs(x)
    # optimal truncation: keep every term before the smallest non-zero one
    ranked = np.where(size > 0, size, np.inf)
    cut = np.argmin(ranked, axis=0)
    smallest = ranked[cut, np.arange(ncol)]
    all_zero = ~np.isfinite(smallest)
    cut = np.where(all_zero, size.shape[0], cut)
    keep = np.arange(size.shape[0])[:, None] < cut[None, :]
    psi = flat[1] * math.log(abs(x)) + np.sum(np.where(keep, terms_psi, 0.0), axis=0)
    w = flat[1] / x + np.sum(np.where(keep, terms_w, 0.0), axis=0)
    omitted = np.where(all_zero, 0.0, smallest)
    return psi.reshape(a.shape[1:]), w.reshape(a.shape[1:]), omitted.reshape(a.shape[1:])


def _damping_coeffs(model: ModelSpec) -> np.ndarray:
    """-2V' as ascending polynomial coefficients."""
    return -2.0 * model.v_prime_coeffs()


# ---------------------------------------------------------------------------
# batched Radau IIA
# ---------------------------------------------------------------------------

def _slow_rate(p: np.ndarray, c: np.ndarray) -> np.ndarray:
    """|smaller root| of r^2 + p r + c = 0, elementwise, computed without cancellation."""
    p = p + 0j
    disc = np.sqrt(p * p - 4.0 * c + 0j)
    big = -0.5 * (p + np.where(np.real(p * np.conj(disc)) >= 0, disc, -disc))
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.where(np.abs(big) > 0, c / big, 0.0)
    return np.abs(small)


def _polyval_batch(x, coeffs):
    """Evaluate a polynomial whose coefficients may be per-batch arrays."""
    x = np.asarray(x, dtype=float)
    acc = 0.0
    for j in range(len(coeffs) - 1, -1, -1):
        acc = acc * (x[..., None] if x.ndim else x) + np.asarray(coeffs[j])
    return acc


def build_grid(p_coeffs, r_coeffs, x0: float, x1: float, h0: float) -> np.ndarray:
    """Nodes from x0 to x1 with local step h0 / (1 + |slow rate|).

    ``x1 < x0`` gives a decreasing grid for backward marching.
    """
    probe = np.linspace(x0, x1, 4001)
    p = np.polynomial.polynomial.polyval(probe, p_coeffs)
    c = _polyval_batch(probe, r_coeffs)
    if np.ndim(c) == 1:
        c = c[:, None]
    rate = _slow_rate(p[:, None], c).max(axis=1)
    density = (1.0 + rate) / h0
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.abs(np.diff(probe)))])
    n = max(int(math.ceil(cum[-1])), 8)
    return np.interp(np.linspace(0.0, cum[-1], n + 1), cum, probe)


def radau_march(xs: np.ndarray, p_coeffs, r_coeffs, y0: np.ndarray, keep: bool = False):
    """March y'' + p(x) y' + r(x) y = 0 over ``xs`` for a batch of problems.

    ``p_coeffs`` are shared real polynomial coefficients; ``r_coeffs`` may hold
    one array entry per batch member.  ``y0`` has shape (M, 2) holding (y, y').
    Returns the renormalized end state, the accumulated log scale and, with
    ``keep``, the history of scaled states and log scales at every node.
    """
    y = np.array(y0, dtype=complex)
    M = y.shape[0]
    nrm = np.abs(y).max(axis=1)
    nrm[nrm == 0] = 1.0
    y /= nrm[:, None]
    logs = np.log(nrm)
    states = [y.copy()] if keep else None
    scales = [logs.copy()] if keep else None
    mat = np.zeros((M, 6, 6), dtype=complex)
    for i in range(3):
        mat[:, 2 * i, 2 * i] = 1.0
    for n in range(xs.shape[0] - 1):
        h = xs[n + 1] - xs[n]
        xj = xs[n] + RADAU_C * h
        pj = np.polynomial.polynomial.polyval(xj, p_coeffs)
        rj = [np.broadcast_to(_polyval_batch(xj[j], r_coeffs), (M,)) for j in range(3)]
        for i in range(3):
            for j in range(3):
                a = h * RADAU_A[i, j]
                dij = 1.0 if i == j else 0.0
                mat[:, 2 * i, 2 * j + 1] = -a
                mat[:, 2 * i + 1, 2 * j] = a * rj[j]
                mat[:, 2 * i + 1, 2 * j + 1] = dij + a * pj[j]
        rhs = np.concatenate([y, y, y], axis=1)
        k = np.linalg.solve(mat, rhs[..., None])[..., 0]
        y = k[:, 4:6]
        nrm = np.abs(y).max(axis=1)
        nrm[nrm == 0] = 1.0
        y = y / nrm[:, None]
        logs = logs + np.log(nrm)
        if keep:
            states.append(y.copy())
            scales.append(logs.copy())
    if keep:
        return y, logs, np.array(states), np.array(scales)
    return y, logs, None, None


def _single_pass(model: ModelSpec, etas: np.ndarray, controls: ShootControls, h0: float, keep: bool = False):
    eta_max = float(np.max(np.abs(etas))) if etas.size else 0.0
    xl, xr = controls.window(model, eta_max)
    pc = _damping_coeffs(model)
    coeffs = riccati_coefficients(pc, [etas], controls.max_terms)
    if model.odd:
        psi_l, w_l, om_l = series_log_and_slope(coeffs, xl)
        g0 = np.exp(psi_l)
        dg0 = w_l * g0
        x_start = xl
    else:
        g0 = np.ones_like(etas)
        dg0 = np.zeros_like(etas)
        om_l = np.zeros(etas.shape)
        x_start = 0.0
    xs = build_grid(pc, [etas], x_start, xr, h0)
    y, logs, states, scales = radau_march(xs, pc, [etas], np.stack([g0, dg0], axis=1), keep=keep)
    psi_r, w_r, om_r = series_log_and_slope(coeffs, xr)
    log_g_xr = logs + np.log(y[:, 0].astype(complex))
    log_ginf = log_g_xr - psi_r
    return dict(log_ginf=log_ginf, xl=x_start, xr=xr, series_err=om_l + om_r,
                xs=xs, states=states, scales=scales)


def shoot_log_g_batch(model: ModelSpec, etas, controls: ShootControls | None = None):
    """log g(inf) for many eta at once.  Returns (log_g, err_estimate, converged)."""
    controls = controls or ShootControls()
    etas = np.atleast_1d(np.asarray(etas, dtype=complex))
    out = np.empty(etas.shape, dtype=complex)
    err = np.empty(etas.shape)
    conv = np.empty(etas.shape, dtype=bool)
    order = np.argsort(np.abs(etas))
    for start in range(0, etas.size, controls.chunk):
        idx = order[start:start + controls.chunk]
        block = etas[idx]
        coarse = _single_pass(model, block, controls, controls.h0)
        lg = coarse["log_ginf"]
        e = coarse["series_err"].copy()
        if controls.refine:
            fine = _single_pass(model, block, controls, 0.5 * controls.h0)
            diff = fine["log_ginf"] - lg
            lg = fine["log_ginf"] + diff / (2**RADAU_ORDER - 1)
            e = e + np.abs(diff)
        out[idx] = lg
        err[idx] = e
        real_axis = np.abs(block.imag) == 0
        ok = np.isfinite(lg)
        # on the real axis g(inf) must stay positive left of the spectrum
        ok &= ~(real_axis & (np.abs(np.imag(lg)) > 1e-6))
        conv[idx] = ok
    return out, err, conv


def shoot_g(model: ModelSpec, eta: complex, controls: ShootControls | None = None,
            keep_grid: bool = False) -> TransformEval:
    """One shot at ``eta``.

    ``converged`` is false when ``g(inf)`` is not positive for real ``eta``,
    which happens right of the first eigenvalue.
    """
    controls = controls or ShootControls()
    etas = np.array([complex(eta)])
    coarse = _single_pass(model, etas, controls, controls.h0, keep=keep_grid)
    lg = coarse["log_ginf"][0]
    err = float(coarse["series_err"][0])
    run = coarse
    if controls.refine:
        fine = _single_pass(model, etas, controls, 0.5 * controls.h0, keep=keep_grid)
        diff = fine["log_ginf"][0] - lg
        lg = fine["log_ginf"][0] + diff / (2**RADAU_ORDER - 1)
        err += abs(diff)
        run = fine
    ok = bool(np.isfinite(lg))
    if complex(eta).imag == 0 and abs(lg.imag) > 1e-6:
        ok = False
    return TransformEval(
        model=model, eta=complex(eta), g_start=1.0 + 0j, log_g_infinity=complex(lg),
        x_left=run["xl"], x_right=run["xr"], err_estimate=err, converged=ok,
        grid=run["xs"] if keep_grid else np.empty(0),
        g_grid=(run["states"][:, 0, 0] * np.exp(run["scales"][:, 0])) if keep_grid else np.empty(0),
    )


def log_phi(model: ModelSpec, lam: complex, controls: ShootControls | None = None) -> complex:
    """log Phi(lambda); finite even where Phi underflows."""
    return shoot_g(model, 2.0 * complex(lam), controls).log_phi


def phi(model: ModelSpec, lam: complex, controls: ShootControls | None = None) -> complex:
    """Phi(lambda) = E[exp(lambda T)] for Re(lambda) < lambda_0."""
    if lam == 0:
        return 1.0 + 0j
    res = shoot_g(model, 2.0 * complex(lam), controls)
    if not res.converged:
        raise ArithmeticError(f"shot at lambda={lam} did not converge (right of the spectrum?)")
    return res.phi


def phi_on_imaginary_axis(model: ModelSpec, s_grid, controls: ShootControls | None = None) -> np.ndarray:
    """Characteristic function phi(s) = Phi(i s); negative s by conjugation."""
    s = np.asarray(s_grid, dtype=float)
    mag = np.abs(s)
    lg, _, _ = shoot_log_g_batch(model, 2j * mag, controls)
    vals = np.exp(-lg)
    vals = np.where(mag == 0, 1.0 + 0j, vals)
    return np.where(s < 0, np.conj(vals), vals)
