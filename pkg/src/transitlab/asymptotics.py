"""Asymptotic constants of the transform and of the law.

Each constant that has a closed form is computed twice: once from the closed
form (Gamma functions for d = 3, incomplete elliptic integrals for d = 4) and
once by direct quadrature of its defining integrand.  ``constants`` refuses to
return a table whose two routes disagree by more than ``1e-7``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .potentials import ModelSpec

__all__ = [
    "gamma_fn",
    "elliptic_E",
    "c_beta",
    "beta_max",
    "constants",
    "wkb_phi_reference",
    "log_wkb_phi_reference",
    "wkb_phi_even_corrected",
    "log_wkb_phi_even_corrected",
    "a_small_time",
    "AsymptoticConstants",
]

# Lanczos approximation, g = 7, nine coefficients (double precision).
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Gamma function for real ``x`` (Lanczos core plus reflection)."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise ValueError(f"Gamma has a pole at {x}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    x -= 1.0
    acc = _LANCZOS[0]
    for k in range(1, len(_LANCZOS)):
        acc += _LANCZOS[k] / (x + k)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def elliptic_E(phi: float, m: float, kind: str) -> float:
    """E_plus(phi|m) = int_0^phi sqrt(1 - m sin^2) and E_minus with the reciprocal.

    ``kind`` is ``"plus"`` or ``"minus"``.  Amplitudes up to ``|phi| <= pi``
    are accepted: for ``m < 1`` the integrand is smooth on the whole range,
    and the quartic constants need an amplitude above ``pi/2``.
    """
    if kind not in ("plus", "minus"):
        raise ValueError("kind must be 'plus' or 'minus'")
    if not m < 1.0:
        raise ValueError("m must be < 1")
    if abs(phi) > math.pi:
        raise ValueError("|phi| must be <= pi")
    power = 0.5 if kind == "plus" else -0.5
    val, _ = integrate.quad(lambda th: (1.0 - m * math.sin(th) ** 2) ** power, 0.0, phi,
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return val


# ---------------------------------------------------------------------------
# ray exponent c(beta)
# ---------------------------------------------------------------------------

def _ray_scale(model: ModelSpec, y):
    """The variable Y with f0 = Re sqrt(Y^2 + e^{i beta}) - Y."""
    if model.odd:
        return 0.5 * y ** (model.d - 1)
    return y ** (model.d - 1)


def _f0_beta(model: ModelSpec, beta: float, y):
    big = _ray_scale(model, y)
    w = np.exp(1j * beta)
    # Re(sqrt(Y^2 + w) - Y) written without cancellation
    return np.real(w / (np.sqrt(big * big + w) + big))


def c_beta(model: ModelSpec, beta: float, split: float = 10.0) -> float:
    """Ray exponent c(beta): log|g_eta(inf)| ~ c(beta) |eta|^nu for -eta = |eta| e^{i beta}."""
    if not abs(beta) < math.pi:
        raise ValueError("|beta| must be < pi")
    d = model.d
    cb = math.cos(beta)
    head, _ = integrate.quad(lambda y: float(_f0_beta(model, beta, y)), 0.0, split,
                             epsabs=1e-14, epsrel=1e-13, limit=400)
    # tail: subtract the leading cos(beta) / (2 Y) term and add it back exactly
    lead_coef = cb / (2.0 * (0.5 if model.odd else 1.0))  # cos(beta) / (2Y) = lead_coef * y^{-(d-1)}

    def tail_body(y):
        return float(_f0_beta(model, beta, y)) - lead_coef * y ** (-(d - 1))

    rest, _ = integrate.quad(tail_body, split, np.inf, epsabs=1e-15, epsrel=1e-12, limit=400)
    lead = lead_coef * split ** (2 - d) / (d - 2)
    half = head + rest + lead
    return 2.0 * half if model.odd else half


def beta_max(model: ModelSpec) -> float:
    """Angle in (pi/2, pi) where c(beta) changes sign."""
    return optimize.brentq(lambda b: c_beta(model, b), 0.5 * math.pi, math.pi - 1e-9, xtol=1e-13)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

SQRT3 = math.sqrt(3.0)
Q_PLUS = SQRT3 + 2.0
Q_MINUS = SQRT3 - 2.0


def _cubic_c0_closed() -> float:
    return 3.0 * gamma_fn(-0.75) ** 2 / (8.0 * math.sqrt(2.0 * math.pi))


def _cubic_c_half_pi_closed() -> float:
    return (math.sqrt(2.0 * math.pi) * gamma_fn(0.25)
            * (math.cos(math.pi / 8) - math.sin(math.pi / 8)) / (3.0 * gamma_fn(0.75)))


def _cubic_f1_unit_closed() -> float:
    """F1 / mu for d = 3."""
    return math.sqrt(2.0 / math.pi) * gamma_fn(0.75) ** 2


def _cubic_f1_unit_quad() -> float:
    val, _ = integrate.quad(lambda y: 0.5 * (1.0 - y * y / math.sqrt(y**4 + 4.0)), 0.0, np.inf,
                            epsabs=1e-15, epsrel=1e-13, limit=400)
    return 2.0 * val


def _quartic_elliptic_pair() -> tuple[float, float]:
    amp = math.acos(Q_MINUS)
    par = Q_PLUS / 4.0
    return elliptic_E(amp, par, "plus"), elliptic_E(amp, par, "minus")


def _quartic_f0_closed() -> float:
    _, e_minus = _quartic_elliptic_pair()
    return 3.0 ** 0.75 / 8.0 * e_minus


def _quartic_f1_unit_closed() -> float:
    e_plus, e_minus = _quartic_elliptic_pair()
    return (-3.0 + 3.0 * SQRT3 + 3.0 ** 0.25 * (6.0 * e_plus + (-3.0 + SQRT3) * e_minus)) / 12.0


def _quartic_f0_quad() -> float:
    val, _ = integrate.quad(lambda y: 1.0 / (math.sqrt(1.0 + y**6) + y**3), 0.0, np.inf,
                            epsabs=1e-15, epsrel=1e-13, limit=400)
    return val


def _quartic_f1_unit_quad() -> float:
    # y - y^4 / sqrt(y^6 + 1) = y (sqrt(y^6+1) - y^3) / sqrt(y^6+1), cancellation-free
    def body(y):
        r = math.sqrt(y**6 + 1.0)
        return y / (r * (r + y**3))

    val, _ = integrate.quad(body, 0.0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=400)
    return val


def _quartic_f2_boundary(mu: float) -> float:
    """F2 from the antiderivative 1/2[asinh(y^3) - 3 log(1+y) + mu^2 y^3 / (3 sqrt(1+y^6))]."""
    return 0.5 * math.log(2.0) + mu * mu / 6.0


def _quartic_f2_quad(mu: float) -> float:
    def body(y):
        r = math.sqrt(y**6 + 1.0)
        return 0.5 * ((mu * mu + 3.0) * y * y / r - 3.0 / (y + 1.0) - mu * mu * y**8 / r**3)

    head, _ = integrate.quad(body, 0.0, 20.0, epsabs=1e-15, epsrel=1e-13, limit=400)
    # beyond 20 the integrand is 3/(2y(y+1)) + O(y^-4)
    tail, _ = integrate.quad(body, 20.0, np.inf, epsabs=1e-15, epsrel=1e-12, limit=400)
    return head + tail


@dataclass
class AsymptoticConstants:
    d: int
    mu: float
    nu: float
    c0: float
    c_half_pi: float
    beta_max: float
    a_small_time: float
    C34: float | None = None
    C14: float | None = None
    C23: float | None = None
    C13: float | None = None
    F0: float | None = None
    F1: float | None = None
    F2: float | None = None
    discrepancies: dict = field(default_factory=dict)
    c_of_beta: Callable[[float], float] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("c_of_beta")
        return out


TRANSCRIPTION_GUARD = 1e-7


def _check(name: str, closed: float, quad: float, store: dict) -> float:
    gap = abs(closed - quad)
    store[name] = gap
    if gap > TRANSCRIPTION_GUARD:
        raise ArithmeticError(f"{name}: closed form {closed!r} and quadrature {quad!r} differ by {gap:.3e}")
    return closed


def a_from_leading(d: int, c_nu: float) -> float:
    return (d - 2) / d * (d * c_nu / (2.0 * (d - 1))) ** (2.0 * (d - 1) / (d - 2))


def constants(model: ModelSpec, with_beta_max: bool = True) -> AsymptoticConstants:
    d, mu = model.d, model.mu
    gaps: dict[str, float] = {}
    c0_q = c_beta(model, 0.0)
    chp_q = c_beta(model, 0.5 * math.pi)
    nu = model.nu
    out = dict(d=d, mu=mu, nu=nu)
    if d == 3:
        c0 = _check("c0", _cubic_c0_closed(), c0_q, gaps)
        chp = _check("c_half_pi", _cubic_c_half_pi_closed(), chp_q, gaps)
        f1u = _check("F1_per_mu", _cubic_f1_unit_closed(), _cubic_f1_unit_quad(), gaps)
        out.update(C34=2.0**0.75 * c0, C14=2.0**0.25 * f1u, F0=c0, F1=mu * f1u)
    elif d == 4:
        f0 = _check("F0", _quartic_f0_closed(), _quartic_f0_quad(), gaps)
        _check("c0_vs_F0", f0, c0_q, gaps)
        f1u = _check("F1_per_mu", _quartic_f1_unit_closed(), _quartic_f1_unit_quad(), gaps)
        f2 = _check("F2", _quartic_f2_boundary(mu), _quartic_f2_quad(mu), gaps)
        c0, chp = f0, chp_q
        out.update(C23=2.0 ** (2.0 / 3.0) * f0, C13=2.0 ** (1.0 / 3.0) * f1u, F0=f0, F1=mu * f1u, F2=f2)
    else:
        c0, chp = c0_q, chp_q
    bmax = beta_max(model) if with_beta_max else float("nan")
    a_d = a_from_leading(d, 2.0**nu * c0)
    return AsymptoticConstants(c0=c0, c_half_pi=chp, beta_max=bmax, a_small_time=a_d,
                               discrepancies=gaps, c_of_beta=lambda b: c_beta(model, b), **out)


def a_small_time(model: ModelSpec) -> float:
    """Small-time constant a_d: t^{d/(d-2)} log P(T < t) -> -a_d."""
    if model.d == 3:
        c_nu = 2.0**0.75 * _cubic_c0_closed()
    elif model.d == 4:
        c_nu = 2.0 ** (2.0 / 3.0) * _quartic_f0_closed()
    else:
        raise ValueError("a_small_time is tabulated for d in {3, 4}")
    return a_from_leading(model.d, c_nu)


def log_wkb_phi_reference(model: ModelSpec, lam: float, consts: AsymptoticConstants | None = None) -> float:
    """log of the leading large-|lambda| form of Phi(lambda), as printed for d = 3 and d = 4.

    d = 3: -C34 |l|^{3/4} - mu C14 |l|^{1/4}
    d = 4: log(2^{-1/4} |l|^{1/4}) - C23 |l|^{2/3} - mu C13 |l|^{1/3} - mu^2 / 6
    """
    if lam >= 0:
        raise ValueError("lambda must be negative")
    c = consts or constants(model, with_beta_max=False)
    a = abs(lam)
    if model.d == 3:
        return -c.C34 * a**0.75 - model.mu * c.C14 * a**0.25
    if model.d == 4:
        return (-0.25 * math.log(2.0) + 0.25 * math.log(a)
                - c.C23 * a ** (2.0 / 3.0) - model.mu * c.C13 * a ** (1.0 / 3.0) - model.mu**2 / 6.0)
    raise ValueError("wkb reference is tabulated for d in {3, 4}")


def wkb_phi_reference(model: ModelSpec, lam: float, consts: AsymptoticConstants | None = None) -> float:
    """exp of :func:`log_wkb_phi_reference` (underflows to 0 for very negative lambda)."""
    return math.exp(log_wkb_phi_reference(model, lam, consts))


def wkb_phi_even_corrected(model: ModelSpec, lam: float, consts: AsymptoticConstants | None = None) -> float:
    """d = 4 leading form with the prefactor obtained from the even-branch WKB matching.

    Matching the two WKB branches at x = 0 (u(0) = 1, u'(0) = 0) and carrying
    the (Q(0)/Q(x))^{1/4} amplitude to x = +inf gives
    1/g(inf) ~ 2 exp(-F0 r^{2/3} - F1 r^{1/3} - F2) with r = 2|lambda|, so the
    prefactor is 2 e^{-log(2)/2} = sqrt(2) and carries no power of |lambda|.
    """
    return math.exp(log_wkb_phi_even_corrected(model, lam, consts))


def log_wkb_phi_even_corrected(model: ModelSpec, lam: float, consts: AsymptoticConstants | None = None) -> float:
    if model.d != 4:
        raise ValueError("only d = 4")
    if lam >= 0:
        raise ValueError("lambda must be negative")
    c = consts or constants(model, with_beta_max=False)
    a = abs(lam)
    return (0.5 * math.log(2.0) - c.C23 * a ** (2.0 / 3.0)
            - model.mu * c.C13 * a ** (1.0 / 3.0) - model.mu**2 / 6.0)
