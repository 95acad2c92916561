"""Transit times of the small-noise diffusion dX = -U'(X) dt + eps dW.

The built-in potential families all behave like the limit potential near the
origin: with ``x = eps^{2/d} y``, ``eps^{-2} U(x) -> V_mu(y)`` up to an
additive constant.  A transit starts at ``x0 < 0`` (odd d) or 0 (even d) and
ends at the first crossing of ``a`` (odd) or of ``+-a`` (even).  For odd d a
guard level to the left of ``x0`` catches the rare paths that run away
backwards; they are flagged and kept out of limit comparisons.

Rescaled samples ``eps^{2(d-2)/d} tau`` converge in law to the limit
transit time as ``eps -> 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .limit_sampler import derive_seeds
from .potentials import ModelSpec, V

__all__ = [
    "FAMILY_NAMES",
    "PotentialFamily",
    "StepPolicy",
    "TransitSample",
    "builtin_family",
    "left_guard",
    "simulate_transit",
    "batch_transits",
    "rescale_exponent",
]

FAMILY_NAMES = ("cubic", "sine", "sine_tilted", "quartic", "cos2", "cos2_tilted")
_CODES = {name: i for i, name in enumerate(FAMILY_NAMES)}
_DEGREE = {"cubic": 3, "sine": 3, "sine_tilted": 3, "quartic": 4, "cos2": 4, "cos2_tilted": 4}


def rescale_exponent(d: int) -> float:
    """Exponent ``2(d-2)/d`` of the time rescaling."""
    return 2.0 * (d - 2) / d


# ---------------------------------------------------------------------------
# potential families
# ---------------------------------------------------------------------------

@njit(cache=True)
def _u_prime(code, x, eps, mu):
    """U'(x) and U''(x) of family ``code`` at noise level ``eps``."""
    if code == 0:  # cubic: U = -x^3/6 + (mu/2) eps^{4/3} x
        return -0.5 * x * x + 0.5 * mu * eps ** (4.0 / 3.0), -x
    if code == 1 or code == 2:  # sine, tilted sine
        tilt = 0.5 * mu * eps ** (4.0 / 3.0) if code == 2 else 0.0
        return math.cos(x) - 1.0 + tilt, -math.sin(x)
    if code == 3:  # quartic: U = -x^4/4 + (mu/2) eps x^2
        return -x * x * x + mu * eps * x, -3.0 * x * x + mu * eps
    # cos2 and tilted cos2: U = -(k - cos x)^2
    k = 1.0 - 0.5 * eps * mu if code == 5 else 1.0
    s = math.sin(x)
    c = math.cos(x)
    return -2.0 * (k - c) * s, -2.0 * s * s - 2.0 * (k - c) * c


def _u_value(name: str, x, eps: float, mu: float):
    x = np.asarray(x, dtype=float)
    if name == "cubic":
        return -x**3 / 6.0 + 0.5 * mu * eps ** (4.0 / 3.0) * x
    if name in ("sine", "sine_tilted"):
        tilt = 0.5 * mu * eps ** (4.0 / 3.0) if name == "sine_tilted" else 0.0
        return np.sin(x) - x + tilt * x
    if name == "quartic":
        return -x**4 / 4.0 + 0.5 * mu * eps * x**2
    k = 1.0 - 0.5 * eps * mu if name == "cos2_tilted" else 1.0
    return -((k - np.cos(x)) ** 2)


@dataclass(frozen=True)
class PotentialFamily:
    """A family ``U_eps`` attached to a limit model.

    ``b`` is the radius inside which the escape drift keeps its sign
    (``inf`` for the polynomial families).  ``psi(r) = psi_coeff r^psi_power``
    is the superlinearity witness: for rescaled levels ``|y|`` between ``A``
    and ``b eps^{-2/d}`` the escape drift of the rescaled potential is at
    least ``psi(|y|)``.  ``eps_max`` bounds the noise levels the simulator
    accepts.
    """

    name: str
    model: ModelSpec
    b: float
    A: float
    psi_coeff: float
    psi_power: float
    eps_max: float

    @property
    def code(self) -> int:
        return _CODES[self.name]

    @property
    def psi_descriptor(self) -> str:
        return f"{self.psi_coeff:.6g}*r^{self.psi_power:g}"

    def psi(self, r):
        return self.psi_coeff * np.asarray(r, dtype=float) ** self.psi_power

    def U(self, x, eps: float):
        return _u_value(self.name, x, eps, self.model.mu)

    def U_prime(self, x, eps: float):
        x = np.asarray(x, dtype=float)
        vec = np.vectorize(lambda xx: _u_prime(self.code, float(xx), eps, float(self.model.mu))[0])
        return vec(x)

    def rescaled(self, y, eps: float):
        """``eps^{-2} (U(eps^{2/d} y) - U(0))``; tends to ``V_mu(y)``.

        The constant ``U(0)`` is removed because it does not affect the
        dynamics; only the tilted cos2 family has ``U(0) != 0``.
        """
        d = self.model.d
        y = np.asarray(y, dtype=float)
        return (self.U(eps ** (2.0 / d) * y, eps) - self.U(0.0, eps)) / eps**2

    def rescaled_residual(self, eps: float, A_test: float = 3.0, n: int = 601) -> float:
        """Sup distance to ``V_mu`` on ``[-A_test, A_test]`` after rescaling."""
        y = np.linspace(-A_test, A_test, n)
        return float(np.max(np.abs(self.rescaled(y, eps) - V(self.model, y))))

    def escape_drift(self, y, eps: float):
        """Drift of the rescaled process pointing away from the origin.

        Odd d: ``-V_eps'(y)``; even d: ``-sign(y) V_eps'(y)``.
        """
        d = self.model.d
        y = np.asarray(y, dtype=float)
        scale = eps ** (2.0 / d)
        slope = self.U_prime(scale * y, eps) * scale / eps**2
        return -slope if self.model.odd else -np.sign(y) * slope

    def sign_condition_gap(self, eps: float, n: int = 4001, reach: float = 50.0) -> float:
        """Smallest ``escape_drift - psi(|y|)`` over ``A <= |y| < b eps^{-2/d}``.

        Both signs of ``y`` are sampled.  For ``b = inf`` the range is cut
        at ``reach``.  A non-negative value certifies the sign condition on
        the sample.
        """
        top = self.b * eps ** (-2.0 / self.model.d) if math.isfinite(self.b) else reach
        r = np.linspace(self.A, top, n, endpoint=False)
        gaps = [self.escape_drift(sign * r, eps) - self.psi(r) for sign in (1.0, -1.0)]
        return float(min(g.min() for g in gaps))


def builtin_family(name: str, model: ModelSpec) -> PotentialFamily:
    """One of the built-in families, checked against ``model``.

    The untilted ``sine`` and ``cos2`` families only exist for ``mu = 0``.
    The polynomial and tilted families carry ``mu`` through an
    eps-dependent perturbation that survives the rescaling.
    """
    if name not in _CODES:
        raise ValueError(f"unknown family {name!r}; choose from {FAMILY_NAMES}")
    if _DEGREE[name] != model.d:
        raise ValueError(f"family {name!r} has d={_DEGREE[name]}, model has d={model.d}")
    if name in ("sine", "cos2") and model.mu != 0:
        raise ValueError(f"family {name!r} is untilted; use {name}_tilted for mu != 0")
    mu = abs(model.mu)
    # near the origin the escape drift is |y|^{d-1} (times 1/2 for odd d) minus
    # a mu term; A is where half of the leading term already dominates it
    A = max(1.0, math.sqrt(2.0 * mu) + 1.0)
    if name in ("cubic", "quartic"):
        coeff = 0.25 if model.odd else 0.5
        return PotentialFamily(name, model, b=math.inf, A=A, psi_coeff=coeff, psi_power=model.d - 1.0,
                               eps_max=1.0)
    if name in ("sine", "sine_tilted"):
        # (1 - cos x) / x^2 decreases on (0, 2 pi): the weakest point is x = b
        b = 2.0 * math.pi - 0.1
        coeff = 0.5 * (1.0 - math.cos(b)) / b**2
        return PotentialFamily(name, model, b=b, A=A, psi_coeff=coeff, psi_power=2.0, eps_max=0.5)
    # 2 (1 - cos x) sin x / x^3 decreases on (0, pi): the weakest point is x = b
    b = math.pi - 0.1
    coeff = 0.5 * 2.0 * (1.0 - math.cos(b)) * math.sin(b) / b**3
    return PotentialFamily(name, model, b=b, A=A, psi_coeff=coeff, psi_power=3.0, eps_max=0.5)


def left_guard(family: PotentialFamily, x0: float) -> float:
    """Left stopping level in x units: ``-(b - x0)/2`` if ``b`` is finite, else ``2 x0``."""
    if not family.model.odd:
        return -math.inf
    if math.isfinite(family.b):
        return -(family.b - x0) / 2.0
    return 2.0 * x0


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepPolicy:
    """Adaptive Euler step ``1/dt = 1/dt_max + |U''|/curvature + |U'|/move``.

    ``dt_max = base * eps^{-2(d-2)/d}`` is the step near the origin, where
    it corresponds to a step of ``base`` in rescaled time.  The other two
    terms keep the relative change of the drift and the deterministic
    displacement per step small away from the origin.
    """

    base: float = 0.01
    curvature: float = 0.1
    move: float = 0.02
    max_steps: int = 50_000_000


@dataclass(frozen=True)
class TransitSample:
    tau_raw: float
    tau_rescaled: float
    epsilon: float
    x0: float
    a: float
    seed: int
    exited_left: bool


@njit(cache=True)
def _transit_kernel(seeds, code, eps, mu, odd, x0, a, guard, dt_max, curv, move, max_steps):
    n = seeds.shape[0]
    taus = np.empty(n)
    left = np.zeros(n, dtype=np.bool_)
    side = np.zeros(n, dtype=np.int8)
    for i in range(n):
        np.random.seed(seeds[i])
        x = x0
        t = 0.0
        k = 0
        while True:
            if k >= max_steps:
                t = np.nan
                break
            up, upp = _u_prime(code, x, eps, mu)
            dt = 1.0 / (1.0 / dt_max + abs(upp) / curv + abs(up) / move)
            x_new = x - up * dt + eps * math.sqrt(dt) * np.random.standard_normal()
            k += 1
            if x_new >= a:
                t += dt * (a - x) / (x_new - x)
                side[i] = 1
                break
            if odd:
                if x_new <= guard:
                    t += dt * (x - guard) / (x - x_new)
                    left[i] = True
                    side[i] = -1
                    break
            elif x_new <= -a:
                t += dt * (x + a) / (x - x_new)
                side[i] = -1
                break
            x = x_new
            t += dt
        taus[i] = t
    return taus, left, side


def _defaults(family: PotentialFamily, x0: float | None, a: float | None) -> tuple[float, float]:
    odd = family.model.odd
    if x0 is None:
        x0 = -5.0 if odd else 0.0
    if a is None:
        a = 5.0 if family.name.startswith("sine") else 2.0
    return float(x0), float(a)


def _check(family: PotentialFamily, eps: float, x0: float, a: float) -> None:
    if not 0 < eps <= family.eps_max:
        raise ValueError(f"eps must lie in (0, {family.eps_max}] for family {family.name!r}")
    if not 0 < a <= family.b:
        raise ValueError("need 0 < a <= b")
    if family.model.odd and not -family.b < x0 < 0:
        raise ValueError("odd d needs -b < x0 < 0")


def _simulate(family: PotentialFamily, eps: float, x0: float, a: float, policy: StepPolicy, seeds):
    _check(family, eps, x0, a)
    m = family.model
    dt_max = policy.base * eps ** (-rescale_exponent(m.d))
    guard = left_guard(family, x0)
    seeds = np.ascontiguousarray(seeds, dtype=np.int64)
    taus, left, side = _transit_kernel(seeds, family.code, float(eps), float(m.mu), m.odd, x0, a,
                                       guard if m.odd else -math.inf, dt_max,
                                       policy.curvature, policy.move, policy.max_steps)
    bad = np.nonzero(~np.isfinite(taus))[0]
    if bad.size:
        raise RuntimeError(f"step budget exhausted for samples {bad[:10].tolist()}")
    return taus, left, side


def simulate_transit(family: PotentialFamily, epsilon: float, x0: float | None = None, a: float | None = None,
                     step_policy: StepPolicy | None = None, seed: int = 0) -> TransitSample:
    """One transit driven by ``seed``."""
    x0, a = _defaults(family, x0, a)
    policy = step_policy or StepPolicy()
    taus, left, _ = _simulate(family, epsilon, x0, a, policy, np.array([seed]))
    scale = epsilon ** rescale_exponent(family.model.d)
    return TransitSample(float(taus[0]), float(taus[0] * scale), float(epsilon), x0, a, int(seed), bool(left[0]))


def batch_transits(family: PotentialFamily, epsilon: float, x0: float | None = None, a: float | None = None,
                   n: int = 1, base_seed: int = 0, step_policy: StepPolicy | None = None,
                   as_arrays: bool = False):
    """``n`` transits; transit i uses ``derive_seeds(base_seed, n)[i]``.

    With ``as_arrays`` returns ``(tau_rescaled, exited_left, exit_side)``
    arrays instead of a list of samples.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x0, a = _defaults(family, x0, a)
    policy = step_policy or StepPolicy()
    seeds = derive_seeds(base_seed, n)
    taus, left, side = _simulate(family, epsilon, x0, a, policy, seeds)
    scale = epsilon ** rescale_exponent(family.model.d)
    if as_arrays:
        return taus * scale, left, side
    return [TransitSample(float(t), float(t * scale), float(epsilon), x0, a, int(s), bool(lf))
            for t, s, lf in zip(taus, seeds, left)]
