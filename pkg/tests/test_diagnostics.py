import math

import numpy as np
import pytest
from scipy import stats

from gmhp.cluster import SimOptions, simulate, simulate_many
from gmhp.diagnostics import (NumericalError, ResidualSeries, compensator, cross_engine_gaps,
                              ks_exp1, mean_count_report, pool_residuals, time_rescale)
from gmhp.kernel import ConstantBase, KernelSpec, ZeroExcitation
from gmhp.marks import DELTA, Event, Mark, Path
from gmhp.markov import REFERENCE_EXP, expected_state
from gmhp.presets import ClassicalParams, build, build_bivariate_exp, build_classical

ONE = Mark((1,))


def poisson_spec(rate):
    return KernelSpec(1, ConstantBase([ONE], [rate]), ZeroExcitation(1))


@pytest.fixture(scope="module")
def ref_exp():
    return build_bivariate_exp(REFERENCE_EXP)


def test_constant_rate_compensator():
    spec = poisson_spec(1.7)
    p = Path((Event(0.5, ONE), Event(2.0, ONE)), 3.0, 1)
    assert compensator(spec, p, 2.5, method="quad") == pytest.approx(1.7 * 2.5, rel=1e-12)
    assert compensator(spec, p, 0.0, method="quad") == 0.0
    with pytest.raises(ValueError):
        compensator(spec, p, 4.0)


def test_reference_exp_compensator_closed_and_quad(ref_exp):
    p = Path((Event(0.4, Mark((1, DELTA))),), 1.0, 2)
    hand = 1.25 + 0.75 * (1 - math.exp(-1.5)) / 2.5 + 0.25 * (1 - math.exp(-3.0)) / 5.0
    closed = compensator(ref_exp, p, 1.0)
    quad = compensator(ref_exp, p, 1.0, method="quad")
    assert closed == pytest.approx(hand, rel=1e-14)
    assert closed == pytest.approx(1.5305716, abs=1e-7)
    assert abs(quad - closed) <= 1e-9 * closed
    assert compensator(ref_exp, p, 0.0) == 0.0


@pytest.mark.parametrize("name", ["bivariate_exp", "classical", "etas", "finance"])
def test_closed_form_matches_quadrature(name):
    spec = build(name)
    rng = np.random.default_rng(1)
    paths = simulate_many(spec, SimOptions(4.0, 25, 3), 10)
    targets = ["all"] + list(range(1, spec.dimension + 1))
    for k in range(10):
        p = paths[k]
        t = float(rng.uniform(0, 4.0))
        tgt = targets[k % len(targets)]
        a = compensator(spec, p, t, tgt, method="closed")
        b = compensator(spec, p, t, tgt, method="quad")
        assert a == pytest.approx(b, rel=1e-8)


def test_compensator_is_nondecreasing(ref_exp):
    p = simulate(ref_exp, SimOptions(5.0, 25, 2))
    lam = compensator(ref_exp, p, np.linspace(0, 5, 200), 1)
    assert np.all(np.diff(lam) >= 0)


def test_quadrature_failure_raises():
    spec = build_classical(ClassicalParams(lam=lambda t: abs(t - 0.3137) ** -1.5, lam_bound=1.0,
                                           theta=0.0, beta=1.0))
    p = Path((), 1.0, 1)
    with pytest.raises(NumericalError):
        compensator(spec, p, 1.0, method="quad")


def test_time_rescale_poisson_and_empty():
    spec = poisson_spec(2.0)
    p = Path((Event(0.5, ONE), Event(1.25, ONE), Event(3.0, ONE)), 4.0, 1)
    r = time_rescale(spec, p, 1)
    assert np.allclose(r.values, [1.0, 1.5, 3.5])
    assert r.tail == pytest.approx(2.0)
    e = time_rescale(spec, Path((), 4.0, 1), 1)
    assert len(e) == 0 and e.tail == pytest.approx(8.0)
    with pytest.raises(ValueError):
        ResidualSeries(np.array([1.0, 0.0]), 1)


def test_pooling_carries_censored_tails():
    a = ResidualSeries(np.array([1.0, 2.0]), 1, 0, tail=0.5)
    b = ResidualSeries(np.empty(0), 1, 1, tail=0.25)
    c = ResidualSeries(np.array([3.0]), 1, 2, tail=9.0)
    assert np.allclose(pool_residuals([a, b, c]), [1.0, 2.0, 3.75])


def test_ks_examples():
    n = 99
    q = -np.log(1 - np.arange(1, n + 1) / (n + 1))
    D, p = ks_exp1(q)
    assert D <= 0.02
    D1, _ = ks_exp1([math.log(2)])
    assert D1 == pytest.approx(0.5, abs=1e-15)
    D2, p2 = ks_exp1(np.full(50, 1e-4))
    assert D2 > 0.999 and p2 < 1e-10
    with pytest.raises(ValueError):
        ks_exp1([])


def test_ks_statistic_matches_scipy():
    x = np.random.default_rng(5).exponential(size=500) * 1.05
    D, p = ks_exp1(x)
    ref = stats.kstest(x, "expon")
    assert D == pytest.approx(ref.statistic, rel=1e-12)
    assert p == pytest.approx(ref.pvalue, abs=0.02)


def test_report_poisson_mean():
    spec = poisson_spec(2.0)
    rep = mean_count_report(spec, 400, 10.0, seed=4)
    for key in ("mean_counts", "variances", "se", "compensator_gap_se_units", "ks"):
        assert key in rep
    assert abs(rep["mean_counts"]["1"] - 20.0) <= 3 * rep["se"]["1"]
    assert rep["compensator_means"]["1"] == pytest.approx(20.0)


def test_report_reference_exp_against_ode(ref_exp):
    rep = mean_count_report(ref_exp, 3000, 5.0, seed=8)
    _, e1, e2 = expected_state(REFERENCE_EXP, 5.0)
    assert abs(rep["mean_counts"]["1"] - e1) <= 3 * rep["se"]["1"]
    assert abs(rep["mean_counts"]["2"] - e2) <= 3 * rep["se"]["2"]
    assert abs(rep["compensator_gap_se_units"]["1"]) <= 3
    assert rep["ks"]["1"]["p"] > 0.01
    assert set(rep["mean_counts"]) == {"1", "2", "c"}


def test_report_degenerate_inputs(ref_exp):
    rep = mean_count_report(ref_exp, 2, 5.0, seed=1)
    assert rep["n_paths"] == 2 and rep["se"]["1"] is not None
    one = mean_count_report(ref_exp, 1, 5.0, seed=1)
    assert one["se"]["1"] is None and one["compensator_gap_se_units"]["1"] is None


def test_cross_engine_gaps_identical_samples(ref_exp):
    paths = simulate_many(ref_exp, SimOptions(5.0, 25, 1), 50)
    gaps = cross_engine_gaps(ref_exp, paths, paths)
    assert all(v == 0.0 for v in gaps.values())
    assert cross_engine_gaps(ref_exp, paths[:1], paths)["mean_1"] is None
