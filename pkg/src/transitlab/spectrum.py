"""Ground state of the Schrodinger problem behind the transform, and the pole residue.

``Phi(lambda) = 1/g(inf)`` has its first pole where ``g_eta(inf)`` vanishes,
i.e. at the smallest eigenvalue ``eta0`` of

    -u'' + (V'^2 - V'') u = eta u,      u = g exp(-V),

with the even-branch restriction ``u'(0) = 0`` for even d.  Near the pole
``Phi(lambda) ~ C / (lambda0 - lambda)`` with ``lambda0 = eta0 / 2``.

The eigenfunction is assembled from two pieces that are each integrated in
their numerically stable direction:

* the left piece in g-form, ``g'' - 2V' g' + eta g = 0``, started from the
  formal series at ``-inf`` (odd d) or from ``g(0) = 1, g'(0) = 0`` (even d);
* the right piece in h-form, ``u = h exp(V)`` with
  ``h'' + 2V' h' + (2V'' + eta) h = 0``, marched backwards from a point deep
  in the right tail where the formal series fixes ``h ~ x^{-(d-1)}``.

The right piece therefore carries the asymptotic normalization
``u0 ~ x^{-(d-1)} exp(V)`` exactly, and the matching factor at the join is
the asymptotic constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .laplace_ode import (
    ShootControls,
    build_grid,
    phi,
    radau_march,
    riccati_coefficients,
    series_log_and_slope,
    shoot_g,
    shoot_log_g_batch,
)
from .potentials import ModelSpec, V, V_prime

__all__ = [
    "SpectralData",
    "find_eigenvalues",
    "eigenfunction",
    "residue",
    "spectral_data",
    "pole_limit_probes",
]

# 4-point Gauss-Legendre on [0, 1] for the piecewise Hermite quadrature of u^2
_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass
class SpectralData:
    model: ModelSpec
    eta0: float
    eta1: float
    lambda0: float
    l2_norm_sq: float
    c_asym: float
    residue_C: float
    match_slope_gap: float
    eigfn_x: np.ndarray = field(repr=False)
    eigfn_u: np.ndarray = field(repr=False)

    def to_dict(self, with_grid: bool = False) -> dict:
        out = {
            "d": self.model.d,
            "mu": self.model.mu,
            "eta0": self.eta0,
            "eta1": self.eta1,
            "lambda0": self.lambda0,
            "l2_norm_sq": self.l2_norm_sq,
            "c_asym": self.c_asym,
            "residue_C": self.residue_C,
            "match_slope_gap": self.match_slope_gap,
        }
        if with_grid:
            out["eigfn_x"] = self.eigfn_x.tolist()
            out["eigfn_u"] = self.eigfn_u.tolist()
        return out


# ---------------------------------------------------------------------------
# eigenvalues
# ---------------------------------------------------------------------------

def _g_infinity_real(model: ModelSpec, eta: float, controls: ShootControls) -> float:
    lg = shoot_g(model, eta, controls).log_g_infinity
    return float(np.real(np.exp(lg)))


def find_eigenvalues(model: ModelSpec, k: int = 2, bracket_hint: tuple[float, float] | None = None,
                     tol: float = 1e-12, controls: ShootControls | None = None,
                     n_probe: int = 160) -> list[float]:
    """The ``k`` smallest real zeros of ``eta -> g_eta(inf)``.

    A real-eta probe grid on ``bracket_hint`` (default ``(0, 8)`` for odd d
    and ``(0, 30)`` for even d, doubled until enough sign changes show up) is
    scanned for sign changes of ``g(inf)``; each bracket is then refined with
    Brent's method to ``tol``.
    """
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    if tol <= 0:
        raise ValueError("tol must be positive")
    controls = controls or ShootControls()
    lo, hi = bracket_hint if bracket_hint is not None else (0.0, 8.0 if model.odd else 30.0)
    for _ in range(6):
        grid = np.linspace(lo, hi, n_probe)
        lg, _, _ = shoot_log_g_batch(model, grid, controls)
        signs = np.sign(np.cos(np.imag(lg)))
        flips = np.nonzero(signs[1:] != signs[:-1])[0]
        if flips.size >= k:
            break
        if bracket_hint is not None:
            raise ArithmeticError(f"found {flips.size} sign changes of g(inf) in {bracket_hint}, need {k}")
        hi *= 2.0
    else:
        raise ArithmeticError("eigenvalue bracketing failed")
    if signs[0] <= 0:
        raise ArithmeticError("g(inf) is not positive at the bottom of the probe grid")
    roots = []
    for j in flips[:k]:
        a, b = grid[j], grid[j + 1]
        roots.append(brentq(lambda e: _g_infinity_real(model, e, controls), a, b, xtol=tol, rtol=1e-15))
    return roots


# ---------------------------------------------------------------------------
# eigenfunction
# ---------------------------------------------------------------------------

def _hermite_square_integral(x: np.ndarray, u: np.ndarray, du: np.ndarray) -> float:
    """Integral of u^2 where u is the piecewise cubic Hermite interpolant."""
    h = np.diff(x)
    t = _GL_X[:, None]
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    h11 = t**3 - t**2
    vals = h00 * u[:-1] + h10 * h * du[:-1] + h01 * u[1:] + h11 * h * du[1:]
    return float(np.sum(_GL_W[:, None] * vals**2 * h))


def _left_piece(model: ModelSpec, eta: float, x_join: float, h0: float, controls: ShootControls):
    """g-form piece on [start, x_join]; returns x, log|u| scale, unit u and u'."""
    damp = -2.0 * model.v_prime_coeffs()
    if model.odd:
        xl, _ = controls.window(model, abs(eta))
        coeffs = riccati_coefficients(damp, [np.array([eta])], controls.max_terms)
        psi, w, _ = series_log_and_slope(coeffs, xl)
        y0 = np.array([[1.0, w[0]]]) * np.exp(psi[0].real)
        x0 = xl
    else:
        y0 = np.array([[1.0, 0.0]])
        x0 = 0.0
    xs = build_grid(damp, [np.array([eta])], x0, x_join, h0)
    _, _, states, scales = radau_march(xs, damp, [np.array([eta])], y0, keep=True)
    g = states[:, 0, 0].real
    dg = states[:, 0, 1].real
    vp = V_prime(model, xs)
    log_scale = scales[:, 0] - V(model, xs)
    return xs, log_scale, g, dg - vp * g


def _right_piece(model: ModelSpec, eta: float, x_join: float, h0: float, controls: ShootControls):
    """h-form piece on [x_join, x_right] normalized so that x^{d-1} h -> 1."""
    vp = model.v_prime_coeffs()
    p = 2.0 * vp
    vpp = np.polynomial.polynomial.polyder(vp)
    r = [2.0 * c for c in vpp]
    r[0] = r[0] + eta
    _, xr = controls.window(model, abs(eta))
    coeffs = riccati_coefficients(p, [np.array([c]) for c in r], controls.max_terms)
    psi, w, _ = series_log_and_slope(coeffs, xr)
    y0 = np.array([[1.0, w[0].real]])
    xs = build_grid(p, [np.array([c]) for c in r], xr, x_join, h0)
    _, _, states, scales = radau_march(xs, p, [np.array([c]) for c in r], y0, keep=True)
    hh = states[:, 0, 0].real
    dh = states[:, 0, 1].real
    xv = V_prime(model, xs)
    log_scale = scales[:, 0] + psi[0].real + V(model, xs)
    order = slice(None, None, -1)
    return xs[order], log_scale[order], hh[order], (dh + xv * hh)[order]


def eigenfunction(model: ModelSpec, eta0: float, h0: float = 0.01, x_join: float = 0.5,
                  controls: ShootControls | None = None) -> dict:
    """Normalized ground state, its squared L2 norm and asymptotic constant.

    Normalization: odd d, ``u0 ~ exp(-V)`` at ``-inf`` and then
    ``u0 ~ c_asym x^{-(d-1)} exp(V)`` at ``+inf``; even d,
    ``u0 ~ |x|^{-(d-1)} exp(V)`` at both ends and ``c_asym = u0(0)``.
    ``l2_norm_sq`` is the integral over the whole real line.
    """
    controls = controls or ShootControls()
    xl, sl, ul, dul = _left_piece(model, eta0, x_join, h0, controls)
    xr, sr, ur, dur = _right_piece(model, eta0, x_join, h0, controls)
    # log of the factor that maps the right piece onto the left piece at the join
    log_ratio = (sl[-1] + math.log(abs(ul[-1]))) - (sr[0] + math.log(abs(ur[0])))
    slope_gap = abs(dul[-1] / ul[-1] - dur[0] / ur[0])
    if model.odd:
        # left piece already has the -inf normalization; rescale the right piece
        c_asym = math.exp(log_ratio)
        left_shift = 0.0
        right_shift = log_ratio
    else:
        # right piece carries the normalization; u0(0) is the left value after rescaling
        c_asym = math.exp(-log_ratio)
        left_shift = -log_ratio
        right_shift = 0.0
    u_left = ul * np.exp(sl + left_shift)
    du_left = dul * np.exp(sl + left_shift)
    u_right = ur * np.exp(sr + right_shift)
    du_right = dur * np.exp(sr + right_shift)
    norm = _hermite_square_integral(xl, u_left, du_left) + _hermite_square_integral(xr, u_right, du_right)
    x = np.concatenate([xl, xr[1:]])
    u = np.concatenate([u_left, u_right[1:]])
    if not model.odd:
        norm *= 2.0
        x = np.concatenate([-x[:0:-1], x])
        u = np.concatenate([u[:0:-1], u])
    return {"eigfn_x": x, "eigfn_u": u, "l2_norm_sq": norm, "c_asym": c_asym, "match_slope_gap": slope_gap}


def residue(model: ModelSpec, c_asym: float, l2_norm_sq: float) -> float:
    """Positive C with ``Phi(lambda) ~ C / (lambda0 - lambda)``.

    Odd d:  ``C = c / (2 int u0^2)``.
    Even d: ``C = 2 u0(0) / int_R u0^2``.
    """
    if model.odd:
        return c_asym / (2.0 * l2_norm_sq)
    return 2.0 * c_asym / l2_norm_sq


def spectral_data(model: ModelSpec, tol: float = 1e-12, controls: ShootControls | None = None) -> SpectralData:
    eta0, eta1 = find_eigenvalues(model, 2, tol=tol, controls=controls)
    ef = eigenfunction(model, eta0, controls=controls)
    return SpectralData(
        model=model, eta0=eta0, eta1=eta1, lambda0=0.5 * eta0,
        l2_norm_sq=ef["l2_norm_sq"], c_asym=ef["c_asym"],
        residue_C=residue(model, ef["c_asym"], ef["l2_norm_sq"]),
        match_slope_gap=ef["match_slope_gap"],
        eigfn_x=ef["eigfn_x"], eigfn_u=ef["eigfn_u"],
    )


def pole_limit_probes(model: ModelSpec, lambda0: float, offsets=(0.1, 0.05, 0.025),
                      controls: ShootControls | None = None) -> tuple[np.ndarray, float]:
    """Values of ``(lambda0 - lambda) Phi(lambda)`` at ``lambda0 - offsets``.

    Returns the probe values and their Richardson limit, treating the
    values as a polynomial in the offset (offsets must halve successively).
    """
    vals = np.array([delta * phi(model, lambda0 - delta, controls).real for delta in offsets])
    table = vals.copy()
    for level in range(1, len(vals)):
        table = (2.0**level * table[1:] - table[:-1]) / (2.0**level - 1.0)
    return vals, float(table[0])
