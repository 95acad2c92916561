import math

import numpy as np
import pytest

from transitlab.density import (
    DensityControls,
    default_t_grid,
    invert,
    laplace_from_table,
    sample_tail_fit,
    small_time_probe,
    tail_fit,
)
from transitlab.laplace_ode import phi
from transitlab.potentials import ModelSpec

CUBIC = ModelSpec(3, 0.0)
QUARTIC = ModelSpec(4, 0.0)


@pytest.fixture(scope="module", params=[(3, 0.0), (4, 0.0)], ids=["d3_mu0", "d4_mu0"])
def table(request, ctx):
    return ctx.density(*request.param)


# -- table invariants ----------------------------------------------------------------

def test_density_is_normalized(table):
    assert table.mass == pytest.approx(1.0, abs=1e-4)
    assert table.min_density >= -1e-8
    assert np.all(table.f >= -1e-8)


def test_distribution_function_is_monotone(table):
    assert np.all(np.diff(table.F) >= -1e-12)
    assert np.array_equal(table.S, 1.0 - table.F)
    assert table.F[0] < 1e-6 and table.S[-1] < 1e-7


def test_cdf_is_continuous_at_the_grid_end(table):
    t_end = table.t_grid[-1]
    inside = table.cdf(t_end)
    beyond = table.cdf(t_end * (1 + 1e-12))
    assert beyond == pytest.approx(inside, abs=1e-8)
    assert table.cdf(1e6) == pytest.approx(1.0, abs=1e-15)
    assert table.cdf(-1.0) == 0.0


def test_cubic_moments(ctx):
    tab = ctx.density(3, 0.0)
    assert tab.mean == pytest.approx(9.952, abs=0.02)
    assert tab.sd == pytest.approx(5.74, abs=0.05)
    assert tab.mean == pytest.approx(9.952107902, rel=1e-7)


def test_quartic_mean(ctx):
    assert ctx.density(4, 0.0).mean == pytest.approx(1.6431309, rel=1e-6)


@pytest.mark.parametrize("lam", [-0.5, -0.1, 0.05])
def test_table_reproduces_the_transform(table, lam):
    assert laplace_from_table(table, lam) == pytest.approx(phi(table.model, lam).real, abs=1e-6)


def test_tail_fit_matches_the_spectrum(ctx, table):
    sd = ctx.spectral(table.model.d, table.model.mu)
    report = tail_fit(table, sd)
    assert report["lambda0_rel_err"] <= 0.03
    assert report["C_rel_err"] <= 0.10
    # the inversion is accurate enough for much tighter agreement
    assert report["lambda0_rel_err"] <= 1e-4 and report["C_rel_err"] <= 1e-3


def test_table_exports_its_summary(table):
    out = table.to_dict()
    assert out["d"] == table.model.d and out["mean"] == table.mean
    assert len(out["fit_window"]) == 2


# -- tilt ordering ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def tilted_tables(ctx):
    out = {}
    for mu in (-1.0, 0.0, 1.0):
        m = ModelSpec(3, mu)
        lam0 = ctx.spectral(3, mu).lambda0
        out[mu] = invert(m, default_t_grid(m, lam0, step=0.05), DensityControls(lambda0=lam0))
    return out


def test_tilt_orders_mode_and_mean(tilted_tables):
    modes = [tilted_tables[mu].f.max() for mu in (-1.0, 0.0, 1.0)]
    means = [tilted_tables[mu].mean for mu in (-1.0, 0.0, 1.0)]
    assert modes[0] > modes[1] > modes[2]
    assert means[0] < means[1] < means[2]


# -- numerical refinement ---------------------------------------------------------------

def test_halving_the_frequency_step_changes_nothing():
    lam0 = 0.96774105
    grid = default_t_grid(QUARTIC, lam0, step=0.02)
    base = invert(QUARTIC, grid, DensityControls(lambda0=lam0))
    fine = invert(QUARTIC, grid, DensityControls(lambda0=lam0, s_step=0.5 * base.s_step))
    assert np.max(np.abs(fine.f - base.f)) <= 1e-6


def test_grid_validation():
    with pytest.raises(ValueError):
        invert(QUARTIC, np.array([0.5, 0.4, 0.6]), DensityControls(lambda0=0.96774105))
    with pytest.raises(ValueError):
        invert(QUARTIC, np.array([0.0, 0.4, 0.6]), DensityControls(lambda0=0.96774105))


def test_short_grid_leaves_no_tail_window():
    with pytest.raises(ValueError):
        invert(QUARTIC, np.linspace(0.1, 3.0, 200), DensityControls(lambda0=0.96774105))


# -- sample diagnostics -----------------------------------------------------------------

def test_sample_tail_fit_against_spectrum(ctx):
    sd = ctx.spectral(4, 0.0)
    x = ctx.limit_samples(4, 0.0, ctx.n_moments)
    t_start = math.log(1e3) / (0.5 * (sd.eta1 - sd.eta0))
    fit = sample_tail_fit(x, t_start)
    assert fit.lambda0_hat == pytest.approx(sd.lambda0, rel=0.05)
    assert fit.C_hat == pytest.approx(sd.residue_C, rel=0.10)


def test_sample_tail_fit_errors():
    with pytest.raises(ValueError):
        sample_tail_fit(np.arange(100.0), 1.0)
    with pytest.raises(ValueError):
        sample_tail_fit(np.arange(10_000.0), 20_000.0)


def test_small_time_probe(ctx):
    x3 = ctx.limit_samples(3, 0.0, ctx.n_moments)
    report = small_time_probe(CUBIC, x3)
    first = report["points"][0]
    assert first["quantile"] == 1e-4
    assert 0.3 <= first["ratio_to_a_d"] <= 3.0
    f_hats = [p["F_hat"] for p in report["points"]]
    assert f_hats == sorted(f_hats)
    x4 = ctx.limit_samples(4, 0.0, ctx.n_moments)
    assert report["exponent"] == 3.0
    assert small_time_probe(QUARTIC, x4)["exponent"] == 2.0
    with pytest.raises(ValueError):
        small_time_probe(CUBIC, x3[:1000])
