"""Limit potentials, Schroedinger potentials and the scale function.

For degree ``d`` and tilt ``mu`` the limit diffusion is

    dY = -V'(Y) dt + dB

with

    V(y) = -y**d / (2 d) + mu y / 2      (d odd)
    V(y) = -y**d / d     + mu y**2 / 2   (d even)

The scale function ``s(y) = int_0^y exp(2 V(u)) du`` maps ``Y`` to a local
martingale.  It is bounded on the right (``s(inf) < inf``), and for even ``d``
it is odd and bounded on both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import integrate

__all__ = [
    "ModelSpec",
    "ScaleTable",
    "V",
    "V_prime",
    "V_second",
    "drift",
    "q",
    "Q",
    "build_scale",
    "speed_weight",
    "mean_passage_time",
]


@dataclass(frozen=True)
class ModelSpec:
    """Degree ``d`` (>= 3) and tilt ``mu`` of the limit law."""

    d: int
    mu: float = 0.0

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 3:
            raise ValueError(f"degree must be an integer >= 3, got {self.d!r}")
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def odd(self) -> bool:
        return self.d % 2 == 1

    @property
    def nu(self) -> float:
        """Decay exponent of the transform along rays, d / (2 (d - 1))."""
        return self.d / (2.0 * (self.d - 1))

    def key(self) -> str:
        return f"d{self.d}_mu{self.mu:g}"

    def v_prime_coeffs(self) -> np.ndarray:
        """Coefficients of V' in increasing powers of y."""
        c = np.zeros(self.d)
        if self.odd:
            c[self.d - 1] = -0.5
            c[0] = 0.5 * self.mu
        else:
            c[self.d - 1] = -1.0
            c[1] = self.mu
        return c


def V(model: ModelSpec, y):
    y = np.asarray(y, dtype=float)
    d, mu = model.d, model.mu
    if model.odd:
        return -(y**d) / (2.0 * d) + 0.5 * mu * y
    return -(y**d) / d + 0.5 * mu * y * y


def V_prime(model: ModelSpec, y):
    y = np.asarray(y, dtype=float)
    d, mu = model.d, model.mu
    if model.odd:
        return -0.5 * y ** (d - 1) + 0.5 * mu
    return -(y ** (d - 1)) + mu * y


def V_second(model: ModelSpec, y):
    y = np.asarray(y, dtype=float)
    d, mu = model.d, model.mu
    if model.odd:
        return -0.5 * (d - 1) * y ** (d - 2)
    return -(d - 1) * y ** (d - 2) + mu


def drift(model: ModelSpec, y):
    """Drift -V'(y) of the limit SDE."""
    return -V_prime(model, y)


def q(model: ModelSpec, x):
    """Schroedinger potential q = (V')**2 / 2 - V'' / 2.

    Built from the definition; for d = 4 this carries the constant -mu/2.
    """
    vp = V_prime(model, x)
    return 0.5 * vp * vp - 0.5 * V_second(model, x)


def Q(model: ModelSpec, eta, x):
    """Potential of ``u'' = Q u``: (V')**2 - V'' - eta, i.e. 2 q - eta."""
    return 2.0 * q(model, x) - eta


# ---------------------------------------------------------------------------
# scale function table
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)

# Region flags for the piecewise representation of s.
LEFT, MIDDLE, RIGHT = 0, 1, 2


@njit(cache=True)
def _v_scalar(y, d, mu, odd):
    if odd:
        return -(y**d) / (2.0 * d) + 0.5 * mu * y
    return -(y**d) / d + 0.5 * mu * y * y


@njit(cache=True)
def _vp_scalar(y, d, mu, odd):
    if odd:
        return -0.5 * y ** (d - 1) + 0.5 * mu
    return -(y ** (d - 1)) + mu * y


@njit(cache=True)
def _hermite5(y, y0, h, tab, row):
    """Quintic Hermite interpolation on a uniform grid.

    ``tab[row]``, ``tab[row + 1]`` and ``tab[row + 2]`` hold the values and
    the first two derivatives at the nodes.
    """
    n = tab.shape[1]
    k = int((y - y0) / h)
    if k < 0:
        k = 0
    elif k > n - 2:
        k = n - 2
    t = (y - (y0 + k * h)) / h
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5
    h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5
    h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5
    h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5
    h20 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5
    h21 = 0.5 * t3 - t4 + 0.5 * t5
    return (
        h00 * tab[row, k]
        + h01 * tab[row, k + 1]
        + h * (h10 * tab[row + 1, k] + h11 * tab[row + 1, k + 1])
        + h * h * (h20 * tab[row + 2, k] + h21 * tab[row + 2, k + 1])
    )


@njit(cache=True)
def _rep_value(region, y, tab_y0, tab_h, tab):
    if region == 0:
        return _hermite5(y, tab_y0, tab_h, tab, 3)
    if region == 2:
        return _hermite5(y, tab_y0, tab_h, tab, 6)
    return _hermite5(y, tab_y0, tab_h, tab, 0)


@njit(cache=True)
def _rep_slope(region, y, d, mu, odd, tab_y0, tab_h, tab, s_inf):
    """Derivative of the representation used in ``region``.

    LEFT: F = log(-s) (odd d) or log(s_inf + s) (even d); MIDDLE: s;
    RIGHT: G = log(s_inf - s).
    """
    sp = math.exp(2.0 * _v_scalar(y, d, mu, odd))
    if region == 1:
        return sp
    if region == 2:
        return -sp * math.exp(-_hermite5(y, tab_y0, tab_h, tab, 6))
    f = _hermite5(y, tab_y0, tab_h, tab, 3)
    if odd:
        return -sp * math.exp(-f)
    return sp * math.exp(-f)


@njit(cache=True)
def _invert_rep(region, target, y_guess, lo, hi, d, mu, odd, tab_y0, tab_h, tab, s_inf):
    """Solve rep(y) = target for y in [lo, hi] by safeguarded Newton."""
    # Orientation: MIDDLE increasing, RIGHT decreasing, LEFT decreasing (odd)
    # or increasing (even, log(s_inf + s)).
    increasing = region == 1 or (region == 0 and not odd)
    a = lo
    b = hi
    y = min(max(y_guess, a), b)
    for _ in range(60):
        r = _rep_value(region, y, tab_y0, tab_h, tab) - target
        if r == 0.0:
            return y
        if (r > 0.0) == increasing:
            b = y
        else:
            a = y
        slope = _rep_slope(region, y, d, mu, odd, tab_y0, tab_h, tab, s_inf)
        step = r / slope
        y_new = y - step
        if not (a <= y_new <= b) or slope == 0.0:
            y_new = 0.5 * (a + b)
        if abs(y_new - y) <= 1e-13 * (1.0 + abs(y)):
            return y_new
        y = y_new
    return y


@dataclass(frozen=True)
class ScaleTable:
    """Tabulated scale function with a three-piece log representation.

    ``s`` itself is stored on the whole grid.  Far left (odd d) the table
    also stores ``F = log(-s)``; for even d the left piece is
    ``log(s_inf + s)``.  Far right it stores ``G = log(s_inf - s)`` so that
    the flat approach to ``s_inf`` keeps full relative precision.
    """

    model: ModelSpec
    s_infinity: float
    y0: float
    h: float
    y: np.ndarray
    s_vals: np.ndarray
    left_vals: np.ndarray
    right_vals: np.ndarray
    split_left: float
    split_right: float
    tail_bound: float
    _derivs: dict = field(repr=False, compare=False, default_factory=dict)

    # -- arrays for compiled kernels --------------------------------------
    def kernel_args(self):
        """(d, mu, odd, y0, h, packed table, s_inf) for the compiled kernels."""
        m = self.model
        return (m.d, float(m.mu), m.odd, self.y0, self.h, self.packed, self.s_infinity)

    @property
    def packed(self) -> np.ndarray:
        """The three representations and their derivatives as one (9, n) array."""
        cached = self._derivs.get("packed")
        if cached is None:
            dv = self._derivs
            cached = np.ascontiguousarray(np.stack([
                self.s_vals, dv["sd1"], dv["sd2"],
                self.left_vals, dv["fd1"], dv["fd2"],
                self.right_vals, dv["gd1"], dv["gd2"],
            ]))
            dv["packed"] = cached
        return cached

    @property
    def y_min(self) -> float:
        return float(self.y[0])

    @property
    def y_max(self) -> float:
        return float(self.y[-1])

    def s(self, y):
        """Scale function at ``y`` (vectorized)."""
        y = np.asarray(y, dtype=float)
        out = _s_many(np.atleast_1d(y).ravel(), *self.kernel_args(), self.split_left, self.split_right)
        return out.reshape(y.shape) if y.ndim else float(out[0])

    def s_prime(self, y):
        return np.exp(2.0 * V(self.model, y))

    def s_inv(self, z):
        """Inverse of the scale function (vectorized)."""
        z = np.asarray(z, dtype=float)
        flat = np.atleast_1d(z).ravel()
        lo_lim = -self.s_infinity if not self.model.odd else -np.inf
        if np.any(flat >= self.s_infinity) or np.any(flat <= lo_lim):
            raise ValueError("z outside the open range of the scale function")
        out = _s_inv_many(flat, *self.kernel_args(), self.split_left, self.split_right,
                          self.y[0], self.y[-1])
        return out.reshape(z.shape) if z.ndim else float(out[0])


@njit(cache=True)
def _s_many(ys, d, mu, odd, y0, h, tab, s_inf, split_l, split_r):
    out = np.empty(ys.shape[0])
    for i in range(ys.shape[0]):
        y = ys[i]
        if y > split_r:
            out[i] = s_inf - math.exp(_hermite5(y, y0, h, tab, 6))
        elif y < split_l:
            f = math.exp(_hermite5(y, y0, h, tab, 3))
            out[i] = -f if odd else f - s_inf
        else:
            out[i] = _hermite5(y, y0, h, tab, 0)
    return out


@njit(cache=True)
def _s_inv_many(zs, d, mu, odd, y0, h, tab, s_inf, split_l, split_r, ylo, yhi):
    out = np.empty(zs.shape[0])
    s_l = _hermite5(split_l, y0, h, tab, 0)
    s_r = _hermite5(split_r, y0, h, tab, 0)
    for i in range(zs.shape[0]):
        z = zs[i]
        if z > s_r:
            out[i] = _invert_rep(2, math.log(s_inf - z), split_r, split_r, yhi, d, mu, odd, y0, h, tab, s_inf)
        elif z < s_l:
            tgt = math.log(-z) if odd else math.log(s_inf + z)
            out[i] = _invert_rep(0, tgt, split_l, ylo, split_l, d, mu, odd, y0, h, tab, s_inf)
        else:
            out[i] = _invert_rep(1, z, 0.0, split_l, split_r, d, mu, odd, y0, h, tab, s_inf)
    return out


def _log_cell_integrals(model: ModelSpec, y: np.ndarray) -> np.ndarray:
    """log of int_{y_k}^{y_{k+1}} exp(2V) for each grid cell, by Gauss-Legendre."""
    a, b = y[:-1], y[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    expo = 2.0 * V(model, nodes)
    ref = expo.max(axis=1)
    body = (np.exp(expo - ref[:, None]) * _GL_WEIGHTS[None, :]).sum(axis=1) * half
    return ref + np.log(body)


def _right_cutoff(model: ModelSpec, tol: float) -> float:
    """Smallest Y on a coarse ladder with exp(2V(Y))/|2V'(Y)| below tol * 1e-300-ish.

    The right table must reach far enough that log(s_inf - s) stays accurate
    where the samplers use it, so the cutoff is set where exp(2V) reaches the
    bottom of the double range rather than just ``tol``.
    """
    y = 1.0
    while True:
        bound_log = 2.0 * float(V(model, y)) - math.log(abs(2.0 * float(V_prime(model, y))) + 1e-300)
        if bound_log < -680.0 and float(V_prime(model, y)) < 0:
            return y
        y += 0.25


def build_scale(model: ModelSpec, tol: float = 1e-12, h: float = 0.005, y_left: float = 9.0) -> ScaleTable:
    """Tabulate the scale function of ``model``.

    ``y_left`` is the extent of the table to the left of 0 for odd ``d``
    (for even ``d`` the table is symmetric).  Values of ``exp(2V)`` up to
    ``exp(2 V(-y_left))`` must fit in double precision.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    y_right = _right_cutoff(model, tol)
    y_lo = -y_left if model.odd else -y_right
    if model.odd and 2.0 * float(V(model, y_lo)) > 700.0:
        raise ValueError("y_left too large: exp(2V) overflows")
    n_left = int(round(-y_lo / h))
    n_right = int(round(y_right / h))
    y = h * np.arange(-n_left, n_right + 1, dtype=float)
    i0 = n_left  # index of y == 0

    log_cells = _log_cell_integrals(model, y)
    cells = np.exp(log_cells)

    # s on the grid, anchored at 0
    s_vals = np.zeros_like(y)
    s_vals[i0 + 1:] = np.cumsum(cells[i0:])
    s_vals[:i0] = -np.cumsum(cells[:i0][::-1])[::-1]

    # right tail beyond the grid: leading-order asymptotic bound
    yr = y[-1]
    tail_log = 2.0 * float(V(model, yr)) - math.log(abs(2.0 * float(V_prime(model, yr))))
    tail_bound = math.exp(tail_log)
    # log(s_inf - s(y_k)) = logsumexp of cells k.. plus tail
    rev = np.logaddexp.accumulate(np.concatenate([[tail_log], log_cells[::-1]]))[::-1]
    right_vals = rev  # length n_cells + 1 == len(y)
    s_inf = math.exp(right_vals[i0])

    sp = np.exp(2.0 * V(model, y))
    spp = 2.0 * V_prime(model, y) * sp

    if model.odd:
        # F = log(-s) for y < 0: logsumexp of cells between y and 0
        left = np.full_like(y, np.nan)
        acc = np.logaddexp.accumulate(log_cells[:i0][::-1])[::-1]
        left[:i0] = acc
    else:
        # log(s_inf + s(y)) = log(s_inf - s(-y)) by symmetry
        left = right_vals[::-1].copy()

    # derivatives of the representations
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        g1 = -sp * np.exp(-right_vals)
        g2 = -spp * np.exp(-right_vals) - g1 * g1
        if model.odd:
            f1 = -sp * np.exp(-left)
            f2 = -spp * np.exp(-left) - f1 * f1
        else:
            f1 = sp * np.exp(-left)
            f2 = spp * np.exp(-left) - f1 * f1
    for arr in (left, f1, f2):
        bad = ~np.isfinite(arr)
        arr[bad] = 0.0
    for arr in (g1, g2):
        arr[~np.isfinite(arr)] = 0.0

    derivs = {"sd1": sp, "sd2": spp, "fd1": f1, "fd2": f2, "gd1": g1, "gd2": g2}
    return ScaleTable(
        model=model,
        s_infinity=s_inf,
        y0=float(y[0]),
        h=h,
        y=y,
        s_vals=s_vals,
        left_vals=left,
        right_vals=right_vals,
        split_left=-1.0,
        split_right=1.0,
        tail_bound=tail_bound,
        _derivs=derivs,
    )


def speed_weight(table: ScaleTable, z):
    """Speed weight w(z) = (s'(s^{-1}(z)))**-2 = exp(-4 V(s^{-1}(z)))."""
    y = table.s_inv(z)
    return np.exp(-4.0 * V(table.model, y))


def _green_inner(model: ModelSpec):
    """v -> 2 int_{start}^v exp(2 V(v) - 2 V(u)) du, start = -inf (odd) or 0 (even).

    This is the mean time the diffusion spends per unit of level v before
    reaching v for the first time; its integral over (a, b) is the mean
    passage time from a to b.
    """
    coeffs = np.zeros(model.d + 1)
    coeffs[1:] = model.v_prime_coeffs() / np.arange(1, model.d + 1)
    pot = np.polynomial.Polynomial(coeffs)
    derivs = [pot.deriv(j) for j in range(1, model.d + 1)]
    facts = [math.factorial(j + 1) for j in range(model.d)]

    def inner(v: float) -> float:
        # u = v - t / k: the peak at u = v has width ~ 1 / |V'(v)|.  The
        # exponent V(v) - V(u) is expanded exactly in t to avoid cancellation.
        k = 1.0 + 2.0 * abs(derivs[0](v))
        taylor = [(-1) ** j * derivs[j](v) / facts[j] / k ** (j + 1) for j in range(model.d)]

        def integrand(t: float) -> float:
            acc = 0.0
            for c in reversed(taylor):
                acc = (acc + c) * t
            return math.exp(2.0 * acc)

        # the scaled integrand decays at least like e^{-t} once t is O(1)
        top = math.inf if model.odd else min(k * abs(v), 200.0)
        val, _ = integrate.quad(integrand, 0.0, top, epsabs=0, epsrel=1e-11, limit=200)
        return 2.0 * val / k

    return inner


def mean_passage_time(model: ModelSpec, a: float, b: float) -> float:
    """Mean time for Y to travel from level ``a`` to level ``b > a``.

    ``a = -inf`` (odd d) is the entrance from minus infinity and
    ``b = +inf`` is explosion.  For even d, ``a`` must be >= 0 and the
    process is reflected at 0 (the symmetric two-sided exit).
    """
    if not b > a:
        raise ValueError("need b > a")
    if not model.odd and a < 0:
        raise ValueError("even d works on the half-line a >= 0")
    inner = _green_inner(model)
    cuts = [a] + [c for c in (-4.0, 0.0, 4.0) if a < c < b] + [b]
    return sum(integrate.quad(inner, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
               for lo, hi in zip(cuts[:-1], cuts[1:]))
