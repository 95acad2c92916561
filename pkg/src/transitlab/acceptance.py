"""The acceptance checks, shared by the test suite and the ``validate`` command.

Each check returns a :class:`CriterionResult` with a machine-readable
verdict and the numbers behind it.  Wall-clock times are kept out of the
serialized details so that two runs with the same seeds produce identical
reports; runtime budgets are reported as booleans.

One sub-check is known to fail as stated and carries ``expected_failure``:
the d = 4 large-|lambda| comparison against the printed prefactor.  The
matched prefactor is checked alongside it.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import asymptotics
from .density import invert, laplace_from_table, sample_tail_fit
from .finite_eps_sim import batch_transits, builtin_family
from .laplace_ode import log_phi, phi
from .limit_sampler import LimitSampleConfig, batch_T
from .potentials import ModelSpec
from .spectrum import find_eigenvalues, pole_limit_probes, spectral_data
from .stats import empirical_mgf, ks_one_sample, ks_two_sample

__all__ = ["CriterionResult", "ValidationContext", "CRITERIA", "run_criteria", "load_fd_oracle"]

# reference values quoted by the acceptance list
MEAN_D3 = 9.952
SD_D3 = 5.74
C0_D3 = 3.49607
C_HALF_PI_D3 = 1.33789
C23_D4 = 1.6693
C13_D4 = 0.5432

SPECTRAL_MODELS = ((3, 0.0), (4, 0.0), (3, 1.0), (4, -1.0))


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    details: dict
    expected_failure: bool = False
    elapsed: float = field(default=0.0, compare=False)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        note = " (known failure, see notes)" if self.expected_failure and not self.passed else ""
        return f"[{verdict}] criterion {self.key}: {self.title}{note}"

    def to_dict(self) -> dict:
        return {"key": self.key, "title": self.title, "passed": self.passed,
                "expected_failure": self.expected_failure, "details": _plain(self.details)}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


@dataclass
class ValidationContext:
    """Seeds, sample sizes and caches for one validation run.

    ``constant_offsets`` perturbs closed-form constants before the two-way
    comparison; it exists for negative-control runs.
    """

    seed: int = 7
    n_moments: int = 500_000
    n_mgf: int = 100_000
    n_eps: int = 20_000
    n_limit_reference: int = 200_000
    eps_list: tuple = (0.2, 0.1, 0.05)
    constant_offsets: dict = field(default_factory=dict)
    _samples: dict = field(default_factory=dict, repr=False)
    _density: dict = field(default_factory=dict, repr=False)
    _spectral: dict = field(default_factory=dict, repr=False)
    _sample_seconds: dict = field(default_factory=dict, repr=False)

    def limit_samples(self, d: int, mu: float, n: int, seed: int | None = None) -> np.ndarray:
        key = (d, mu, n, self.seed if seed is None else seed)
        if key not in self._samples:
            cfg = LimitSampleConfig(ModelSpec(d, mu))
            t0 = time.perf_counter()
            self._samples[key] = batch_T(cfg, n, key[3], as_array=True)
            self._sample_seconds[key] = time.perf_counter() - t0
        return self._samples[key]

    def sampling_seconds(self, d: int, mu: float, n: int, seed: int | None = None) -> float:
        """Wall-clock time spent generating a cached batch, so cache hits do not hide the cost."""
        self.limit_samples(d, mu, n, seed)
        return self._sample_seconds[(d, mu, n, self.seed if seed is None else seed)]

    def density(self, d: int, mu: float):
        if (d, mu) not in self._density:
            self._density[(d, mu)] = invert(ModelSpec(d, mu))
        return self._density[(d, mu)]

    def spectral(self, d: int, mu: float):
        if (d, mu) not in self._spectral:
            self._spectral[(d, mu)] = spectral_data(ModelSpec(d, mu))
        return self._spectral[(d, mu)]


def load_fd_oracle() -> dict:
    """The committed finite-difference eigenvalues, keyed by (d, mu)."""
    text = resources.files("transitlab").joinpath("data/fd_oracle.json").read_text()
    payload = json.loads(text)
    return {(row["d"], float(row["mu"])): row["eta"] for row in payload["models"]}


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def criterion_1(ctx: ValidationContext) -> list[CriterionResult]:
    x = ctx.limit_samples(3, 0.0, ctx.n_moments)
    elapsed = ctx.sampling_seconds(3, 0.0, ctx.n_moments)
    mean, sd = float(x.mean()), float(x.std(ddof=1))
    ok = abs(mean - MEAN_D3) <= 0.05 and abs(sd - SD_D3) <= 0.06 and elapsed < 120.0
    det = {"n": x.size, "seed": ctx.seed, "mean": mean, "sd": sd, "runtime_under_2min": elapsed < 120.0}
    return [CriterionResult("1", "limit-law moments from 5e5 draws (d=3, mu=0)", ok, det, elapsed=elapsed)]


def criterion_2(ctx: ValidationContext) -> list[CriterionResult]:
    t0 = time.perf_counter()
    tab = ctx.density(3, 0.0)
    ok = abs(tab.mean - MEAN_D3) <= 0.02 and abs(tab.sd - SD_D3) <= 0.05
    det = {"mean": tab.mean, "sd": tab.sd, "mass": tab.mass}
    return [CriterionResult("2", "density-inversion moments (d=3, mu=0)", ok, det,
                            elapsed=time.perf_counter() - t0)]


def criterion_3(ctx: ValidationContext) -> list[CriterionResult]:
    t0 = time.perf_counter()
    c3 = asymptotics.constants(ModelSpec(3, 0.0), with_beta_max=False)
    c4 = asymptotics.constants(ModelSpec(4, 0.0), with_beta_max=False)
    values = {"d3.c0": c3.c0, "d3.c_half_pi": c3.c_half_pi, "d4.C23": c4.C23, "d4.C13": c4.C13}
    gaps = {f"d3.{k}": v for k, v in c3.discrepancies.items()}
    gaps.update({f"d4.{k}": v for k, v in c4.discrepancies.items()})
    # negative control: shift a closed form and compare it with its quadrature again
    quad = {"d3.c0": asymptotics.c_beta(ModelSpec(3, 0.0), 0.0),
            "d3.c_half_pi": asymptotics.c_beta(ModelSpec(3, 0.0), 0.5 * math.pi),
            "d4.C23": 2.0 ** (2.0 / 3.0) * asymptotics.c_beta(ModelSpec(4, 0.0), 0.0)}
    for name, offset in ctx.constant_offsets.items():
        if name not in values:
            raise ValueError(f"unknown constant {name!r} in constant_offsets")
        values[name] += offset
        if name in quad:
            gaps[f"{name}.two_way"] = abs(values[name] - quad[name])
    elapsed = time.perf_counter() - t0
    ref_ok = (abs(values["d3.c0"] - C0_D3) <= 1e-4 and abs(values["d3.c_half_pi"] - C_HALF_PI_D3) <= 1e-4
              and abs(values["d4.C23"] - C23_D4) <= 2e-4 and abs(values["d4.C13"] - C13_D4) <= 2e-4)
    two_way_ok = max(gaps.values()) <= 1e-7
    ok = ref_ok and two_way_ok and elapsed < 5.0
    det = {"values": values, "max_two_way_gap": max(gaps.values()), "reference_ok": ref_ok,
           "two_way_ok": two_way_ok, "runtime_under_5s": elapsed < 5.0}
    return [CriterionResult("3", "asymptotic constants against reference values and quadrature", ok, det,
                            elapsed=elapsed)]


def criterion_4(ctx: ValidationContext) -> list[CriterionResult]:
    oracle = load_fd_oracle()
    t0 = time.perf_counter()
    rows = {}
    for d, mu in SPECTRAL_MODELS:
        eta0 = find_eigenvalues(ModelSpec(d, mu), 1)[0]
        ref = oracle[(d, mu)][0]
        rows[f"d{d}_mu{mu:g}"] = {"eta0": eta0, "fd_eta0": ref, "rel_err": abs(eta0 - ref) / ref}
    elapsed = time.perf_counter() - t0
    ok = all(r["rel_err"] <= 1e-6 for r in rows.values()) and elapsed < 30.0
    det = {"models": rows, "runtime_under_30s": elapsed < 30.0}
    return [CriterionResult("4", "shooting eigenvalue against finite-difference oracle", ok, det, elapsed=elapsed)]


def criterion_5(ctx: ValidationContext) -> list[CriterionResult]:
    out = []
    for d in (3, 4):
        t0 = time.perf_counter()
        sd = ctx.spectral(d, 0.0)
        vals, limit = pole_limit_probes(ModelSpec(d, 0.0), sd.lambda0)
        rel = abs(limit - sd.residue_C) / sd.residue_C
        det = {"probes": vals, "extrapolated": limit, "residue_C": sd.residue_C, "rel_err": rel}
        out.append(CriterionResult(f"5.d{d}", f"pole limit extrapolates to the residue (d={d}, mu=0)",
                                   rel <= 0.03, det, elapsed=time.perf_counter() - t0))
    return out


def criterion_6(ctx: ValidationContext) -> list[CriterionResult]:
    out = []
    for d in (3, 4):
        t0 = time.perf_counter()
        sd = ctx.spectral(d, 0.0)
        x = ctx.limit_samples(d, 0.0, ctx.n_moments)
        # start where the next exponential is down by 1e-3 relative to the leading one
        t_start = math.log(1e3) / (0.5 * (sd.eta1 - sd.eta0))
        fit = sample_tail_fit(x, t_start)
        rate_err = abs(fit.lambda0_hat - sd.lambda0) / sd.lambda0
        pref_err = abs(fit.C_hat - sd.residue_C) / sd.residue_C
        det = {"n": x.size, "lambda0_hat": fit.lambda0_hat, "lambda0": sd.lambda0, "rate_rel_err": rate_err,
               "C_hat": fit.C_hat, "residue_C": sd.residue_C, "prefactor_rel_err": pref_err,
               "fit_window": fit.fit_window}
        out.append(CriterionResult(f"6.d{d}", f"tail law from 5e5 draws (d={d}, mu=0)",
                                   rate_err <= 0.05 and pref_err <= 0.10, det, elapsed=time.perf_counter() - t0))
    return out


def _wkb_errors(model: ModelSpec, log_ref) -> list[float]:
    return [abs(math.exp(log_phi(model, lam).real - log_ref(model, lam)) - 1.0) for lam in (-50.0, -200.0, -800.0)]


def _wkb_verdict(errs: list[float], order: float) -> tuple[bool, list[float]]:
    observed = [math.log(errs[i] / errs[i + 1]) / math.log(4.0) for i in range(2)]
    ok = errs[0] > errs[1] > errs[2] and errs[2] <= 0.1 and min(observed) >= 0.8 * order
    return ok, observed


def criterion_7(ctx: ValidationContext) -> list[CriterionResult]:
    out = []
    for d, mu in ((3, 0.0), (3, 1.0)):
        t0 = time.perf_counter()
        errs = _wkb_errors(ModelSpec(d, mu), asymptotics.log_wkb_phi_reference)
        ok, observed = _wkb_verdict(errs, 0.25)
        out.append(CriterionResult(f"7.d3_mu{mu:g}", f"large-|lambda| form, error decay (d=3, mu={mu:g})", ok,
                                   {"lambda": [-50, -200, -800], "rel_err": errs, "observed_order": observed,
                                    "stated_order": 0.25}, elapsed=time.perf_counter() - t0))
    m4 = ModelSpec(4, 0.0)
    t0 = time.perf_counter()
    errs = _wkb_errors(m4, asymptotics.log_wkb_phi_reference)
    ok, observed = _wkb_verdict(errs, 1.0 / 3.0)
    out.append(CriterionResult("7.d4_printed", "large-|lambda| form with the printed d=4 prefactor", ok,
                               {"rel_err": errs, "observed_order": observed, "stated_order": 1.0 / 3.0},
                               expected_failure=True, elapsed=time.perf_counter() - t0))
    t0 = time.perf_counter()
    errs = _wkb_errors(m4, asymptotics.log_wkb_phi_even_corrected)
    ok, observed = _wkb_verdict(errs, 1.0 / 3.0)
    out.append(CriterionResult("7.d4_corrected", "large-|lambda| form with the matched d=4 prefactor", ok,
                               {"rel_err": errs, "observed_order": observed, "stated_order": 1.0 / 3.0},
                               elapsed=time.perf_counter() - t0))
    return out


def criterion_8(ctx: ValidationContext) -> list[CriterionResult]:
    out = []
    for d, mu in SPECTRAL_MODELS:
        t0 = time.perf_counter()
        m = ModelSpec(d, mu)
        x = ctx.limit_samples(d, mu, ctx.n_mgf)
        rows = []
        for j, lam in enumerate((-1.0, -0.5, -0.1)):
            ci = empirical_mgf(x, lam, level=0.99, n_boot=1000, seed=ctx.seed + j)
            exact = phi(m, lam).real
            rows.append({"lambda": lam, "phi": exact, **ci.to_dict(), "inside": ci.contains(exact)})
        ok = all(r["inside"] for r in rows)
        out.append(CriterionResult(f"8.d{d}_mu{mu:g}", f"transform inside 99% bootstrap CI (d={d}, mu={mu:g})",
                                   ok, {"n": x.size, "points": rows}, elapsed=time.perf_counter() - t0))
    return out


def criterion_9(ctx: ValidationContext) -> list[CriterionResult]:
    out = []
    for name, d in (("sine", 3), ("cos2", 4)):
        t0 = time.perf_counter()
        m = ModelSpec(d, 0.0)
        family = builtin_family(name, m)
        ref = ctx.limit_samples(d, 0.0, ctx.n_limit_reference, seed=ctx.seed + 1)
        rows = []
        for eps in ctx.eps_list:
            tau, left, _ = batch_transits(family, eps, n=ctx.n_eps, base_seed=ctx.seed, as_arrays=True)
            ks = ks_two_sample(tau[~left], ref)
            rows.append({"eps": eps, "ks": ks.statistic, "p_value": ks.p_value, "left_fraction": float(left.mean())})
        ks_vals = [r["ks"] for r in rows]
        lefts = [r["left_fraction"] for r in rows]
        ks_ok = all(a >= b for a, b in zip(ks_vals, ks_vals[1:]))
        left_ok = all(a >= b for a, b in zip(lefts, lefts[1:]))
        out.append(CriterionResult(f"9.{name}", f"KS to the limit law non-increasing in eps ({name}, d={d})",
                                   ks_ok and left_ok, {"rows": rows, "ks_monotone": ks_ok, "left_monotone": left_ok},
                                   elapsed=time.perf_counter() - t0))
    return out


def criterion_10(ctx: ValidationContext) -> list[CriterionResult]:
    out = []
    for d in (3, 4):
        t0 = time.perf_counter()
        m = ModelSpec(d, 0.0)
        tab = ctx.density(d, 0.0)
        parseval = {lam: abs(laplace_from_table(tab, lam) - phi(m, lam).real) for lam in (-0.5, -0.1)}
        x = ctx.limit_samples(d, 0.0, ctx.n_moments)
        ks = ks_one_sample(tab.cdf, x)
        ok = max(parseval.values()) <= 1e-3 and ks.statistic <= 0.004
        out.append(CriterionResult(f"10.d{d}", f"inversion against transform and draws (d={d}, mu=0)", ok,
                                   {"laplace_abs_err": {str(k): v for k, v in parseval.items()},
                                    "ks": ks.statistic, "ks_p_value": ks.p_value, "n": x.size},
                                   elapsed=time.perf_counter() - t0))
    return out


CRITERIA = {
    "1": criterion_1, "2": criterion_2, "3": criterion_3, "4": criterion_4, "5": criterion_5,
    "6": criterion_6, "7": criterion_7, "8": criterion_8, "9": criterion_9, "10": criterion_10,
}


def run_criteria(selected=None, ctx: ValidationContext | None = None, log=None) -> list[CriterionResult]:
    """Run the selected criteria (all by default) and return their results in order."""
    ctx = ctx or ValidationContext()
    keys = list(CRITERIA) if not selected else [str(k) for k in selected]
    results = []
    for key in keys:
        if key not in CRITERIA:
            raise ValueError(f"unknown criterion {key!r}")
        for res in CRITERIA[key](ctx):
            results.append(res)
            if log is not None:
                log(f"{res.line()}  [{res.elapsed:.1f}s]")
    return results
