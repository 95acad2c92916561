"""Density, distribution function and tail of the limit law from its transform.

The characteristic function ``phi(s) = Phi(i s)`` decays like
``exp(-c(pi/2) (2|s|)^nu)``, so plain Fourier inversion along the real
s-axis converges fast.  The s-integral is done with the trapezoid rule on a
uniform grid.  For an integrand that is analytic in a strip, the only errors
of that rule are aliasing, ``f(t + P)`` with period ``P = 2 pi / ds``, and
truncation at ``S*``.  ``P`` is chosen from the exponential tail rate so the
aliased mass is below double precision, and ``S*`` from ``c(pi/2)`` so the
neglected part of the integral is below ``trunc_tol``.

The distribution function uses the same rule on the Parseval form

    F(t) = (1/pi) int_0^inf Re[ phi(s) (1 - e^{-ist}) / (is) ] ds,

which keeps ``F`` and ``f`` consistent to quadrature accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline

from .asymptotics import a_small_time, c_beta
from .laplace_ode import ShootControls, phi_on_imaginary_axis
from .potentials import ModelSpec
from .spectrum import SpectralData, find_eigenvalues

__all__ = [
    "DensityControls",
    "TailFit",
    "DensityTable",
    "default_t_grid",
    "invert",
    "tail_fit",
    "sample_tail_fit",
    "small_time_probe",
    "ks_statistic",
    "laplace_from_table",
]

_ALIAS_DECAY = 36.0  # e^{-36} ~ 2e-16: aliased tail mass relative to f(t)


@dataclass(frozen=True)
class DensityControls:
    """Quadrature controls for the inversion.

    ``lambda0`` (the exponential tail rate) is computed by shooting when not
    given; it sets the period of the s-grid.
    """

    trunc_tol: float = 1e-12
    lambda0: float | None = None
    s_step: float | None = None
    s_max: float | None = None
    shoot: ShootControls = field(default_factory=ShootControls)
    chunk: int = 2048


@dataclass(frozen=True)
class TailFit:
    lambda0_hat: float
    C_hat: float
    fit_window: tuple[float, float]
    fit_residual: float


@dataclass
class DensityTable:
    model: ModelSpec
    t_grid: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    mean: float
    sd: float
    tail_fit: TailFit
    mass: float
    min_density: float
    s_step: float
    s_max: float

    def cdf(self, t) -> np.ndarray:
        """F at arbitrary t: Hermite interpolation inside the grid, fitted tail beyond it."""
        t = np.asarray(t, dtype=float)
        spline = CubicHermiteSpline(self.t_grid, self.F, self.f)
        out = spline(np.clip(t, self.t_grid[0], self.t_grid[-1]))
        out = np.where(t < self.t_grid[0], self.F[0] * (t > 0), out)
        fit = self.tail_fit
        beyond = 1.0 - fit.C_hat / fit.lambda0_hat * np.exp(-fit.lambda0_hat * t)
        return np.where(t > self.t_grid[-1], beyond, out)

    def to_dict(self) -> dict:
        fit = self.tail_fit
        return {
            "d": self.model.d,
            "mu": self.model.mu,
            "mean": self.mean,
            "sd": self.sd,
            "mass": self.mass,
            "min_density": self.min_density,
            "lambda0_hat": fit.lambda0_hat,
            "C_hat": fit.C_hat,
            "fit_window": list(fit.fit_window),
            "fit_residual": fit.fit_residual,
            "s_step": self.s_step,
            "s_max": self.s_max,
        }


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def _lambda0(model: ModelSpec, controls: DensityControls) -> float:
    if controls.lambda0 is not None:
        return controls.lambda0
    return 0.5 * find_eigenvalues(model, 1, tol=1e-10, controls=controls.shoot)[0]


def default_t_grid(model: ModelSpec, lambda0: float, step: float | None = None,
                   survival_floor: float = 1e-8) -> np.ndarray:
    """Uniform grid from ``t_min`` (0.2 for d = 3, 0.1 otherwise) to where
    ``exp(-lambda0 t)`` drops below ``survival_floor`` times a safety factor."""
    t_min = 0.2 if model.d == 3 else 0.1
    t_max = (math.log(1.0 / survival_floor) + 3.0) / lambda0
    step = step or (0.01 if model.d == 3 else 0.005)
    n = int(math.ceil((t_max - t_min) / step)) + 1
    return t_min + step * np.arange(n)


def _s_grid(model: ModelSpec, t_max: float, lambda0: float, controls: DensityControls) -> tuple[float, float]:
    period = t_max + _ALIAS_DECAY / lambda0
    ds = controls.s_step or 2.0 * math.pi / period
    if controls.s_max is not None:
        s_max = controls.s_max
    else:
        c = c_beta(model, 0.5 * math.pi)
        if not c > 0:
            raise ArithmeticError("c(pi/2) is not positive; truncation budget unreachable")
        # |phi(is)| ~ exp(-c (2s)^nu); the 0.9 leaves room for the prefactor
        s_max = 0.5 * (math.log(1.0 / controls.trunc_tol) / (0.9 * c)) ** (1.0 / model.nu)
    return ds, s_max


# ---------------------------------------------------------------------------
# inversion
# ---------------------------------------------------------------------------

def _fit_log_line(t: np.ndarray, logy: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    """Weighted fit ``logy ~ alpha - rate t``; returns rate, alpha, max |residual|."""
    A = np.column_stack([np.ones_like(t), -t])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], logy * sw, rcond=None)
    resid = logy - A @ coef
    return float(coef[1]), float(coef[0]), float(np.max(np.abs(resid)))


def _fit_density_tail(t, f, S, window=(1e-6, 1e-2)) -> TailFit:
    lo, hi = window
    mask = (S >= lo) & (S <= hi) & (f > 0)
    if mask.sum() < 10:
        raise ValueError(f"fit window S in [{lo}, {hi}] has {int(mask.sum())} grid points, need >= 10")
    rate, alpha, resid = _fit_log_line(t[mask], np.log(f[mask]), np.ones(mask.sum()))
    return TailFit(rate, math.exp(alpha), (float(t[mask][0]), float(t[mask][-1])), resid)


def invert(model: ModelSpec, t_grid=None, controls: DensityControls | None = None) -> DensityTable:
    """Density table of the limit law on ``t_grid`` (default from :func:`default_t_grid`)."""
    controls = controls or DensityControls()
    lam0 = _lambda0(model, controls)
    t = default_t_grid(model, lam0) if t_grid is None else np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 3 or t[0] <= 0 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be increasing, positive and have at least 3 points")
    ds, s_max = _s_grid(model, float(t[-1]), lam0, controls)
    s = ds * np.arange(1, int(math.ceil(s_max / ds)) + 1)
    ph = phi_on_imaginary_axis(model, s, controls.shoot)
    if not np.all(np.isfinite(ph)):
        raise ArithmeticError("characteristic function evaluation failed")
    f = np.empty_like(t)
    F = np.empty_like(t)
    ph_over_is = ph / (1j * s)
    for start in range(0, t.size, controls.chunk):
        tt = t[start:start + controls.chunk]
        rot = np.exp(-1j * np.outer(tt, s))
        # s = 0 node carries weight 1/2: phi(0) = 1 for f, and t for F
        f[start:start + tt.size] = ds / math.pi * (0.5 + (rot @ ph).real)
        F[start:start + tt.size] = ds / math.pi * (0.5 * tt + ((1.0 - rot) @ ph_over_is).real)
    S = 1.0 - F
    fit = _fit_density_tail(t, f, S)
    # tail completion beyond the grid with the fitted exponential
    lam, C, t_end = fit.lambda0_hat, fit.C_hat, t[-1]
    tail0 = C / lam * math.exp(-lam * t_end)
    tail1 = C * math.exp(-lam * t_end) * (t_end / lam + 1.0 / lam**2)
    tail2 = C * math.exp(-lam * t_end) * (t_end**2 / lam + 2.0 * t_end / lam**2 + 2.0 / lam**3)
    mass = float(simpson(f, x=t)) + tail0
    m1 = float(simpson(t * f, x=t)) + tail1
    m2 = float(simpson(t * t * f, x=t)) + tail2
    mean = m1 / mass
    sd = math.sqrt(max(m2 / mass - mean**2, 0.0))
    return DensityTable(model=model, t_grid=t, f=f, F=F, S=S, mean=mean, sd=sd, tail_fit=fit,
                        mass=mass, min_density=float(f.min()), s_step=ds, s_max=float(s[-1]))


def tail_fit(table: DensityTable, spectral: SpectralData | None = None) -> dict:
    """Tail rate and prefactor of the table, compared with the spectral values when given."""
    fit = table.tail_fit
    out = {"lambda0_hat": fit.lambda0_hat, "C_hat": fit.C_hat,
           "fit_window": fit.fit_window, "fit_residual": fit.fit_residual}
    if spectral is not None:
        out["lambda0"] = spectral.lambda0
        out["residue_C"] = spectral.residue_C
        out["lambda0_rel_err"] = abs(fit.lambda0_hat - spectral.lambda0) / spectral.lambda0
        out["C_rel_err"] = abs(fit.C_hat - spectral.residue_C) / spectral.residue_C
    return out


def laplace_from_table(table: DensityTable, lam: float) -> float:
    """``int f(t) e^{lam t} dt`` over the grid plus the fitted exponential tail."""
    fit = table.tail_fit
    rate = fit.lambda0_hat - lam
    if rate <= 0:
        raise ValueError("lam must lie left of the tail rate")
    t = table.t_grid
    body = float(simpson(table.f * np.exp(lam * t), x=t))
    return body + fit.C_hat * math.exp(-rate * t[-1]) / rate


# ---------------------------------------------------------------------------
# sample-based diagnostics
# ---------------------------------------------------------------------------

def sample_tail_fit(samples, t_start: float, min_count: int = 200, n_points: int = 60) -> TailFit:
    """Exponential fit to the empirical survival function of ``samples``.

    ``log S_hat(t)`` is fitted against ``(1, -t)`` on ``n_points`` equally
    spaced t from ``t_start`` to the point where ``min_count`` samples remain,
    weighting each point by its inverse binomial variance ``N S / (1 - S)``.
    The density prefactor is ``lambda0_hat`` times the survival prefactor.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 10 * min_count:
        raise ValueError("too few samples for a tail fit")
    t_end = x[n - min_count]
    if t_end <= t_start:
        raise ValueError("fit window is empty: t_start lies beyond the last populated point")
    t = np.linspace(t_start, t_end, n_points)
    surv = (n - np.searchsorted(x, t, side="right")) / n
    w = n * surv / (1.0 - surv)
    rate, alpha, resid = _fit_log_line(t, np.log(surv), w)
    return TailFit(rate, rate * math.exp(alpha), (float(t_start), float(t_end)), resid)


def small_time_probe(model: ModelSpec, samples, quantiles=(1e-4, 1e-3)) -> dict:
    """Report ``-t^{d/(d-2)} log F_hat(t)`` at small empirical quantiles against ``a_d``.

    This is a trend check only: the small-time limit converges very slowly.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size < 500_000:
        raise ValueError("small_time_probe needs at least 5e5 samples")
    a_d = a_small_time(model)
    power = model.d / (model.d - 2)
    rows = []
    for q in quantiles:
        t_q = float(np.quantile(x, q))
        F_hat = np.searchsorted(x, t_q, side="right") / x.size
        value = -t_q**power * math.log(F_hat)
        rows.append({"quantile": q, "t": t_q, "F_hat": F_hat, "value": value, "ratio_to_a_d": value / a_d})
    return {"a_d": a_d, "exponent": power, "points": rows}


def ks_statistic(cdf, samples) -> float:
    """Kolmogorov-Smirnov distance between a CDF callable and the empirical CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - F
    lower = F - np.arange(n) / n
    return float(max(upper.max(), lower.max()))
