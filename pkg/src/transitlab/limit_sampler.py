"""Monte Carlo draws of the limit transit time T.

Two independent schemes are provided.

``time_change``
    Uses ``T = int_0^tau w(beta_t) dt`` where ``beta`` is a Brownian motion
    on the scale-function axis, ``w(z) = s'(s^{-1}(z))^{-2}`` and ``tau`` is
    the exit time of ``beta`` through the image of ``+inf`` (two-sided for
    even d).  Brownian increments are exact; the step in Brownian time is
    chosen per state so that each step covers a fixed slice ``h`` of
    physical time, shortened where ``w`` varies quickly.  The physical-time
    increment uses the trapezoid rule.  A Brownian increment over which
    ``log w`` would still change by more than ``accuracy`` is split at a
    Brownian-bridge midpoint, which refines the same path without changing
    its law.

``direct_sde``
    Integrates ``dY = -V'(Y) dt + dB`` with the simplified weak order-2
    Taylor scheme for additive noise and a step that shrinks where the drift
    is steep.

Both schemes start at ``-L`` (odd d) or 0 (even d) and stop once ``Y``
passes ``y_cut`` (``|Y|`` for even d).  The missing pieces of the path
(entrance from ``-inf`` and explosion after ``y_cut``) are replaced by their
exact means, computed from the Green's function.  The variance those pieces
would add is of order ``y_cut^{-(2d-1)}`` and is negligible at the defaults.

Every sample is driven by its own seed, so results do not depend on how a
batch is split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .potentials import (
    ModelSpec,
    ScaleTable,
    _hermite5,
    _invert_rep,
    _v_scalar,
    _vp_scalar,
    build_scale,
    drift,
    mean_passage_time,
)

__all__ = [
    "LimitSampleConfig",
    "LimitSample",
    "SCHEMES",
    "boundary_correction",
    "drift_transit_time",
    "sample_T",
    "batch_T",
    "derive_seeds",
]

SCHEMES = ("time_change", "direct_sde")

# time_change: split a Brownian increment when log w changes by more than this many times `accuracy`
_SPLIT_FACTOR = 2.0


@dataclass(frozen=True)
class LimitSampleConfig:
    """Sampler settings.

    ``step`` is the physical-time step in calm regions and ``accuracy`` caps
    how much the drift (direct_sde) or the log speed weight (time_change)
    may change over one step.  ``L_start`` is used for odd d only.
    """

    model: ModelSpec
    scheme: str = "direct_sde"
    step: float = 0.01
    accuracy: float = 0.25
    L_start: float | None = None
    y_cut: float | None = None
    max_steps: int = 20_000_000

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if not (self.step > 0 and self.accuracy > 0):
            raise ValueError("step and accuracy must be positive")
        if self.L_start is not None and self.L_start <= 0:
            raise ValueError("L_start must be positive")
        if self.y_cut is not None and self.y_cut <= 0:
            raise ValueError("y_cut must be positive")

    @property
    def cutoff(self) -> float:
        if self.y_cut is not None:
            return self.y_cut
        if self.scheme == "time_change":
            # steps in the steep region cost ~ 16 |V'| / accuracy^2 per unit y
            return 2.5 if self.model.odd else 1.8
        return 4.0 if self.model.odd else 2.5

    @property
    def start(self) -> float:
        if not self.model.odd:
            return 0.0
        if self.L_start is not None:
            return -self.L_start
        return -2.5 if self.scheme == "time_change" else -4.0


@dataclass(frozen=True)
class LimitSample:
    value: float
    scheme: str
    seed: int
    steps: int
    boundary_correction: float


def drift_transit_time(model: ModelSpec, a: float, b: float) -> float:
    """int_a^b dy / (-V'(y)): the time a noiseless path needs from a to b.

    Requires the drift to stay positive on (a, b).
    """
    from scipy import integrate

    def inv(y):
        return 1.0 / float(drift(model, y))

    val, _ = integrate.quad(inv, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def boundary_correction(model: ModelSpec, L: float) -> float:
    """Noiseless time to come in from -inf to -L (odd d)."""
    if not model.odd:
        raise ValueError("the left boundary correction applies to odd d only")
    return drift_transit_time(model, -math.inf, -L)


# ---------------------------------------------------------------------------
# tail of the explosion time
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _tail_table(model: ModelSpec, y_cut: float, width: float = 4.0, n: int = 33):
    """Mean remaining time to explosion m(y) on [y_cut, y_cut + width].

    Returns nodes, values and slopes (m' = -Green's inner function).
    """
    ys = np.linspace(y_cut, y_cut + width, n)
    vals = np.array([mean_passage_time(model, y, math.inf) for y in ys])
    slopes = np.empty(n)
    # slope from a centred difference of the tabulated values would lose
    # accuracy at the ends; differentiate the passage integral instead
    eps = 1e-4
    for i, y in enumerate(ys):
        slopes[i] = -mean_passage_time(model, y, y + eps) / eps
    return ys, vals, slopes


@njit(cache=True)
def _tail_mean(y, tab_y, tab_m, tab_dm, decay):
    n = tab_y.shape[0]
    if y >= tab_y[n - 1]:
        # beyond the table the tail follows int dy / b ~ y^{-(d-2)}
        return tab_m[n - 1] * (tab_y[n - 1] / y) ** decay
    h = tab_y[1] - tab_y[0]
    k = int((y - tab_y[0]) / h)
    if k < 0:
        k = 0
    if k > n - 2:
        k = n - 2
    t = (y - tab_y[k]) / h
    t2 = t * t
    t3 = t2 * t
    return ((2 * t3 - 3 * t2 + 1) * tab_m[k] + (t3 - 2 * t2 + t) * h * tab_dm[k]
            + (-2 * t3 + 3 * t2) * tab_m[k + 1] + (t3 - t2) * h * tab_dm[k + 1])


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _drift_parts(y, d, mu, odd):
    """b, b', b'' for b = -V'."""
    if odd:
        b = 0.5 * y ** (d - 1) - 0.5 * mu
        b1 = 0.5 * (d - 1) * y ** (d - 2)
        b2 = 0.5 * (d - 1) * (d - 2) * y ** (d - 3)
    else:
        b = y ** (d - 1) - mu * y
        b1 = (d - 1) * y ** (d - 2) - mu
        b2 = (d - 1) * (d - 2) * y ** (d - 3)
    return b, b1, b2


@njit(cache=True)
def _direct_sde_kernel(seeds, d, mu, odd, h, kappa, y_start, y_cut, max_steps,
                       tab_y, tab_m, tab_dm, decay):
    n = seeds.shape[0]
    out = np.empty(n)
    steps = np.zeros(n, dtype=np.int64)
    tails = np.empty(n)
    for i in range(n):
        np.random.seed(seeds[i])
        y = y_start
        t = 0.0
        k = 0
        while True:
            ay = y if odd else abs(y)
            if ay >= y_cut:
                tail = _tail_mean(ay, tab_y, tab_m, tab_dm, decay)
                t += tail
                tails[i] = tail
                break
            if k >= max_steps:
                t = np.nan
                tails[i] = np.nan
                break
            b, b1, b2 = _drift_parts(y, d, mu, odd)
            dt = h / (1.0 + h * abs(b1) / kappa + h * abs(b) / kappa)
            dw = math.sqrt(dt) * np.random.standard_normal()
            y = y + b * dt + dw + 0.5 * b1 * dw * dt + 0.5 * (b * b1 + 0.5 * b2) * dt * dt
            t += dt
            k += 1
        out[i] = t
        steps[i] = k
    return out, steps, tails


@njit(cache=True)
def _locate(z, r, l, guess, odd, d, mu, y0, th, tab, s_inf, split_l, split_r, ylo, yhi, s_l, s_r):
    """y = s^{-1}(z), read from whichever representation is accurate at z."""
    if z > s_r:
        return _invert_rep(2, math.log(r), guess, split_r, yhi, d, mu, odd, y0, th, tab, s_inf)
    if z < s_l:
        tgt = math.log(-z) if odd else math.log(l)
        return _invert_rep(0, tgt, guess, ylo, split_l, d, mu, odd, y0, th, tab, s_inf)
    return _invert_rep(1, z, guess, split_l, split_r, d, mu, odd, y0, th, tab, s_inf)


@njit(cache=True)
def _time_change_kernel(seeds, d, mu, odd, h, kappa, y_start, y_cut, max_steps,
                        tab_y, tab_m, tab_dm, decay,
                        y0, th, tab, s_inf,
                        split_l, split_r, ylo, yhi, s_l, s_r, z_start, r_cut):
    # r_cut = s_inf - s(y_cut): distance of the cutoff level to the end of the scale axis
    n = seeds.shape[0]
    out = np.empty(n)
    steps = np.zeros(n, dtype=np.int64)
    tails = np.empty(n)
    kappa2 = kappa * kappa
    # pending Brownian sub-increments (increment, duration), processed last in first out
    max_depth = 64
    pend_dw = np.empty(max_depth)
    pend_dt = np.empty(max_depth)
    for i in range(n):
        np.random.seed(seeds[i])
        y = y_start
        z = z_start
        r = s_inf - z  # distance to the right end, authoritative on the right
        l = s_inf + z  # distance to the left end (even d), authoritative on the left
        v = _v_scalar(y, d, mu, odd)
        t = 0.0
        k = 0
        done = False
        while not done:
            if k >= max_steps:
                t = np.nan
                tails[i] = np.nan
                break
            vp = _vp_scalar(y, d, mu, odd)
            # physical step; keeps 4 |V'| sqrt(hp) <= kappa so w changes by O(kappa)
            hp = h
            cap = kappa2 / (16.0 * vp * vp + 1e-300)
            if cap < hp:
                hp = cap
            dtb = hp * math.exp(4.0 * v)
            pend_dw[0] = math.sqrt(dtb) * np.random.standard_normal()
            pend_dt[0] = dtb
            top = 1
            while top > 0:
                top -= 1
                dw = pend_dw[top]
                dtb = pend_dt[top]
                can_split = top + 2 <= max_depth and dtb > 1e-300
                z_new = z + dw
                r_new = r - dw
                l_new = l + dw
                if r_new <= 0.0 or (not odd and l_new <= 0.0):
                    if can_split:
                        # refine: the path may have left through the end or only come close to it
                        mid = 0.5 * dw + math.sqrt(0.25 * dtb) * np.random.standard_normal()
                        pend_dw[top] = dw - mid
                        pend_dt[top] = 0.5 * dtb
                        pend_dw[top + 1] = mid
                        pend_dt[top + 1] = 0.5 * dtb
                        top += 2
                        continue
                    tail = _tail_mean(max(y if odd else abs(y), y_cut), tab_y, tab_m, tab_dm, decay)
                    t += 0.5 * dtb * math.exp(-4.0 * v) + tail
                    tails[i] = tail
                    done = True
                    break
                # first-order predictor dy = dz / s'(y) as the Newton starting point
                guess = y + dw * math.exp(-2.0 * v)
                y_new = _locate(z_new, r_new, l_new, guess, odd, d, mu, y0, th, tab, s_inf,
                                split_l, split_r, ylo, yhi, s_l, s_r)
                # keep every representation consistent with the one that was used
                if z_new > s_r:
                    z_new = s_inf - r_new
                    l_new = s_inf + z_new
                elif z_new < s_l:
                    if not odd:
                        z_new = l_new - s_inf
                    r_new = s_inf - z_new
                else:
                    r_new = s_inf - z_new
                    l_new = s_inf + z_new
                ay_new = y_new if odd else abs(y_new)
                # past the cutoff only the crossed part counts, and V(y_cut) = V(-y_cut) for even d
                v_new = _v_scalar(y_new if ay_new < y_cut else y_cut, d, mu, odd)
                if abs(4.0 * (v_new - v)) > _SPLIT_FACTOR * kappa and can_split:
                    # the weight changes too much over this increment; split it at a bridge midpoint
                    mid = 0.5 * dw + math.sqrt(0.25 * dtb) * np.random.standard_normal()
                    pend_dw[top] = dw - mid
                    pend_dt[top] = 0.5 * dtb
                    pend_dw[top + 1] = mid
                    pend_dt[top + 1] = 0.5 * dtb
                    top += 2
                    continue
                k += 1
                w_old = math.exp(-4.0 * v)
                if ay_new >= y_cut:
                    # stop at the cutoff: linear crossing in z, trapezoid on the crossed part
                    if y_new > 0.0:
                        theta = (r_new + dw - r_cut) / dw
                    else:
                        theta = (l_new - dw - r_cut) / (-dw)
                    theta = min(max(theta, 0.0), 1.0)
                    v_cut = _v_scalar(y_cut, d, mu, odd)
                    tail = _tail_mean(y_cut, tab_y, tab_m, tab_dm, decay)
                    t += 0.5 * theta * dtb * (w_old + math.exp(-4.0 * v_cut)) + tail
                    tails[i] = tail
                    done = True
                    break
                t += 0.5 * dtb * (w_old + math.exp(-4.0 * v_new))
                y = y_new
                z = z_new
                r = r_new
                l = l_new
                v = v_new
        out[i] = t
        steps[i] = k
    return out, steps, tails


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _scale_for(model: ModelSpec) -> ScaleTable:
    return build_scale(model)


@lru_cache(maxsize=64)
def _left_mean(model: ModelSpec, L: float) -> float:
    return mean_passage_time(model, -math.inf, -L)


def _right_log_distance(table: ScaleTable, y: float) -> float:
    """log(s_inf - s(y)) read from the right-hand representation."""
    return float(_hermite5(y, table.y0, table.h, table.packed, 6))


def _validate(config: LimitSampleConfig) -> None:
    m = config.model
    ycut = config.cutoff
    if float(drift(m, ycut)) <= 1.0:
        raise ValueError("y_cut must lie where the drift exceeds 1")
    if m.odd and float(drift(m, config.start)) <= 1.0:
        raise ValueError("L_start must lie where the drift exceeds 1")
    if config.scheme == "time_change":
        table = _scale_for(m)
        if ycut >= table.y_max or (m.odd and config.start <= table.y_min):
            raise ValueError("start or cutoff outside the scale table")


def derive_seeds(base_seed: int, n: int) -> np.ndarray:
    """Per-sample seeds; entry i depends only on (base_seed, i)."""
    words = np.random.SeedSequence(int(base_seed)).generate_state(int(n), dtype=np.uint32)
    return words.astype(np.int64)


def _run(config: LimitSampleConfig, seeds: np.ndarray):
    _validate(config)
    m = config.model
    ycut = config.cutoff
    tab_y, tab_m, tab_dm = _tail_table(m, ycut)
    decay = float(m.d - 2)
    left = _left_mean(m, -config.start) if m.odd else 0.0
    seeds = np.ascontiguousarray(seeds, dtype=np.int64)
    common = (seeds, m.d, float(m.mu), m.odd, config.step, config.accuracy, config.start, ycut,
              config.max_steps, tab_y, tab_m, tab_dm, decay)
    if config.scheme == "direct_sde":
        vals, steps, tails = _direct_sde_kernel(*common)
    else:
        table = _scale_for(m)
        args = table.kernel_args()
        s_l = float(table.s(table.split_left))
        s_r = float(table.s(table.split_right))
        z_start = float(table.s(config.start))
        r_cut = math.exp(float(_right_log_distance(table, ycut)))
        vals, steps, tails = _time_change_kernel(
            *common, *args[3:], table.split_left, table.split_right,
            table.y_min, table.y_max, s_l, s_r, z_start, r_cut)
    if np.any(~np.isfinite(vals)):
        raise RuntimeError("step budget exhausted for at least one sample")
    return vals + left, steps, tails + left


def sample_T(config: LimitSampleConfig, seed: int) -> LimitSample:
    """One draw of T driven by ``seed``."""
    vals, steps, corr = _run(config, np.array([seed]))
    return LimitSample(float(vals[0]), config.scheme, int(seed), int(steps[0]), float(corr[0]))


def batch_T(config: LimitSampleConfig, n: int, base_seed: int, as_array: bool = False):
    """``n`` draws; draw i uses ``derive_seeds(base_seed, n)[i]``.

    With ``as_array`` only the values are returned, as a numpy array.
    """
    seeds = derive_seeds(base_seed, n)
    vals, steps, corr = _run(config, seeds)
    if as_array:
        return vals
    return [LimitSample(float(v), config.scheme, int(s), int(k), float(c))
            for v, s, k, c in zip(vals, seeds, steps, corr)]
