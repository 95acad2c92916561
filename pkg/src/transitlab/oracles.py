"""Independent reference computations used for cross-checks.

Nothing here shares code with the shooting solver: eigenvalues come from a
finite-difference Schrodinger matrix and moments from nested quadrature of
the Green's function.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .potentials import ModelSpec, V_prime, V_second, mean_passage_time

__all__ = ["fd_eigenvalues", "mean_time_quadrature", "finite_eps_mean_time"]


def _schrodinger_potential(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    # u = g exp(-V) turns the MGF equation into -u'' + (V'^2 - V'') u = eta u
    vp = V_prime(model, x)
    return vp * vp - V_second(model, x)


def _fd_once(model: ModelSpec, k: int, h: float, half_width: float) -> np.ndarray:
    if model.odd:
        x = np.arange(-half_width + h, half_width - h / 2, h)
        diag = 2.0 / h**2 + _schrodinger_potential(model, x)
        off = -np.ones(x.size - 1) / h**2
    else:
        # cell-centred grid on [0, L] with a ghost cell giving u'(0) = 0
        x = (np.arange(int(round(half_width / h))) + 0.5) * h
        diag = 2.0 / h**2 + _schrodinger_potential(model, x)
        diag[0] -= 1.0 / h**2
        off = -np.ones(x.size - 1) / h**2
    return eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1), eigvals_only=True)


def fd_eigenvalues(model: ModelSpec, k: int = 1, h: float = 0.01, half_width: float | None = None) -> np.ndarray:
    """First ``k`` values of eta from a Dirichlet box, Richardson-extrapolated in h.

    Odd d uses [-20, 20]; even d uses the half-line [0, 8] with a Neumann
    condition at the origin (only even eigenfunctions matter there).
    """
    if half_width is None:
        half_width = 20.0 if model.odd else 8.0
    coarse = _fd_once(model, k, h, half_width)
    fine = _fd_once(model, k, h / 2, half_width)
    return (4.0 * fine - coarse) / 3.0


def mean_time_quadrature(model: ModelSpec) -> float:
    """E[T] from the Green's function of (1/2) f'' - V' f' = -1.

    Odd d:  2 int_R e^{2V(y)} int_{-inf}^y e^{-2V(u)} du dy.
    Even d: 2 int_0^inf e^{2V(y)} int_0^y e^{-2V(u)} du dy.
    """
    lo = -math.inf if model.odd else 0.0
    return mean_passage_time(model, lo, math.inf)


def finite_eps_mean_time(family, eps: float, x0: float, a: float) -> float:
    """Rescaled mean transit time of a finite-eps family, by nested quadrature.

    In rescaled units ``W(y) = eps^{-2} U(eps^{2/d} y)`` the mean time from
    ``y0`` to ``ya`` is ``2 int_{y0}^{ya} int_{lo}^{v} e^{2(W(v) - W(u))} du dv``
    with ``lo = -inf`` for odd d (the guard is ignored; its exit probability
    is exponentially small) and a reflecting origin for even d.
    """
    from scipy import integrate

    d = family.model.d
    scale = eps ** (2.0 / d)

    def W(y):
        return float(family.U(scale * y, eps)) / eps**2

    def W_slope(y):
        return float(family.U_prime(scale * y, eps)) * scale / eps**2

    def inner(v):
        k = 1.0 + 2.0 * abs(W_slope(v))
        wv = W(v)
        width = 60.0 / k
        lo = -math.inf if family.model.odd else 0.0
        f = lambda u: math.exp(2.0 * (wv - W(u)))
        start = max(lo, v - width)
        val, _ = integrate.quad(f, start, v, epsabs=0.0, epsrel=1e-10, limit=200)
        if start > lo:
            tail, _ = integrate.quad(f, lo, start, epsabs=0.0, epsrel=1e-10, limit=200)
            val += tail
        return val

    y0 = x0 / scale if family.model.odd else 0.0
    ya = a / scale
    cuts = sorted({y0, ya, *[c for c in (-4.0, 0.0, 4.0) if y0 < c < ya]})
    total = 0.0
    for lo_, hi_ in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(inner, lo_, hi_, epsabs=0.0, epsrel=1e-9, limit=400)
        total += val
    return 2.0 * total
