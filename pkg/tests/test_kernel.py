import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmhp.kernel import (BaseKernel, ConstantBase, KernelSpec, TabulatedKernel, ZeroExcitation,
                         coordinate_intensity, eta_bound, f_bound, kappa_total, validate_bounds)
from gmhp.marks import DELTA, Event, Mark, Path
from gmhp.markov import CHANNEL_MARKS, REFERENCE_EXP, replay
from gmhp.presets import EtasLocation, EtasParams, build_bivariate_exp, build_etas

M1, M2, MC = CHANNEL_MARKS
ALPHA = (0.5, 0.5, 0.25)
BETA = (2.5, 2.5, 5.0)
THETA = ((0.5, 0.25, 0.25), (0.25, 0.5, 0.25), (0.25, 0.25, 0.25))


def naive_rates(history, t):
    """Per-channel intensities from the kernel definition, event by event."""
    lam = list(ALPHA)
    for e in history:
        if e.time < t:
            j = CHANNEL_MARKS.index(e.mark)
            for r in range(3):
                lam[r] += THETA[r][j] * math.exp(-BETA[r] * (t - e.time))
    return lam


@pytest.fixture(scope="module")
def ref_exp():
    return build_bivariate_exp(REFERENCE_EXP)


def test_kappa_examples(ref_exp):
    assert kappa_total(ref_exp, 0.7) == pytest.approx(1.25, abs=1e-15)
    h = [Event(0.4, M1)]
    expected = 1.25 + (0.5 + 0.25) * math.exp(-1.5) + 0.25 * math.exp(-3.0)
    assert kappa_total(ref_exp, 1.0, h) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(1.429795, abs=1e-6)


def test_poisson_degeneration():
    spec = KernelSpec(1, ConstantBase([Mark((1,))], [2.0]), ZeroExcitation(1, 1.0))
    hist = [Event(0.1, Mark((1,))), Event(0.2, Mark((1,)))]
    for t in (0.05, 0.5, 3.0):
        assert kappa_total(spec, t, hist) == 2.0


def test_coordinate_intensity_examples(ref_exp):
    assert coordinate_intensity(ref_exp, 1.0, 1) == pytest.approx(0.75)
    common = KernelSpec(2, ConstantBase([Mark((1, 1))], [0.3]), ZeroExcitation(2))
    assert coordinate_intensity(common, 1.0, 1) == 0.3
    assert coordinate_intensity(common, 1.0, 2) == 0.3
    only1 = KernelSpec(2, ConstantBase([Mark((1, DELTA))], [0.3]), ZeroExcitation(2))
    assert coordinate_intensity(only1, 2.0, 2) == 0.0
    with pytest.raises(IndexError):
        coordinate_intensity(ref_exp, 1.0, 3)


def test_bounds_examples(ref_exp):
    assert eta_bound(ref_exp) == 1.25
    assert f_bound(ref_exp, 0.3, M1) == pytest.approx(1.0)
    assert f_bound(ref_exp, 0.3, M2) == pytest.approx(1.0)
    assert f_bound(ref_exp, 0.3, MC) == pytest.approx(0.75)
    etas = build_etas(EtasParams(
        locations=(EtasLocation(mu=0.1, K0=1.0, alpha=0.0, c=1.0, p=2.0, cutoff=3.0,
                                magnitudes=(3.0,)),), cross=(), common_mu=0.0))
    x = etas.table.marks[0]
    assert f_bound(etas, 0.0, x) == pytest.approx(1.0)
    assert etas.excitation.total_rate(1.0, 0.0, x) == pytest.approx(0.25)


class HalfBound(BaseKernel):
    def __init__(self, inner):
        self.inner = inner
        self.dimension = inner.dimension

    def total_rate(self, t):
        return self.inner.total_rate(t)

    def coordinate_rate(self, t, i):
        return self.inner.coordinate_rate(t, i)

    def sample_mark(self, t, draws):
        return self.inner.sample_mark(t, draws)

    def bound(self):
        return self.inner.bound() / 2


def test_validate_bounds(ref_exp):
    rep = validate_bounds(ref_exp, grid_resolution=1000)
    assert rep.ok and rep.n_checked > 1000
    bad = KernelSpec(2, HalfBound(ref_exp.base), ref_exp.excitation)
    rep = validate_bounds(bad, grid_resolution=50)
    assert not rep.ok and rep.violations[0].component == "base"
    slack = KernelSpec(1, ConstantBase([Mark((1,))], [1.0]), ZeroExcitation(1, 1.0))
    assert validate_bounds(slack, grid_resolution=100).ok


def histories(max_events=12):
    ev = st.tuples(st.floats(0.001, 5.0), st.sampled_from(CHANNEL_MARKS))
    return st.lists(ev, max_size=max_events, unique_by=lambda e: e[0]).map(
        lambda xs: [Event(t, m) for t, m in sorted(xs)])


@settings(max_examples=100)
@given(histories(), st.floats(0.001, 6.0))
def test_superposition_and_markov_replay(ref_exp, hist, t):
    naive = naive_rates(hist, t)
    assert kappa_total(ref_exp, t, hist) == pytest.approx(sum(naive), rel=1e-12)
    st_ = replay(REFERENCE_EXP, hist, t)
    for i in (1, 2):
        ci = coordinate_intensity(ref_exp, t, i, hist)
        assert ci == pytest.approx(naive[i - 1] + naive[2], rel=1e-12)
        assert ci == pytest.approx(st_.coordinate_intensity(i), rel=1e-10)
    # common marks count once per touched coordinate
    total = kappa_total(ref_exp, t, hist)
    assert coordinate_intensity(ref_exp, t, 1, hist) + coordinate_intensity(ref_exp, t, 2, hist) \
        == pytest.approx(total + naive[2], rel=1e-12)


@given(histories(), st.floats(0.01, 5.0), st.floats(0.0, 2.0), st.sampled_from(CHANNEL_MARKS))
def test_open_interval_exclusion(ref_exp, hist, t, later, mark):
    before = kappa_total(ref_exp, t, hist)
    assert kappa_total(ref_exp, t, hist + [Event(t + later, mark)]) == before


def test_domination_random_samples(ref_exp):
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        s = rng.uniform(0, 10)
        t = s + rng.exponential(1.0)
        x = CHANNEL_MARKS[rng.integers(3)]
        assert ref_exp.excitation.total_rate(t, s, x) <= ref_exp.excitation.bound(s, x)
        assert ref_exp.base.total_rate(t) <= ref_exp.base.bound()
        assert ref_exp.excitation.total_rate(s, t, x) == 0.0


def test_time_varying_base_bound():
    tab = TabulatedKernel(marks=(Mark((1,)),), base_alpha=[1.0], base_init=[3.0],
                          base_decay=[2.0], row_marks=((0,),), row_weights=((1.0,),),
                          impact=[[0.0]], kind=[[0]], par1=[[1.0]], par2=[[0.0]])
    assert tab.eta_hat == 3.0
    assert validate_bounds(KernelSpec.from_table(tab), grid_resolution=200).ok


def test_tabulated_validation():
    kw = dict(marks=(Mark((1,)),), base_alpha=[1.0], base_init=[1.0], base_decay=[0.0],
              row_marks=((0,),), row_weights=((1.0,),), kind=[[0]], par2=[[0.0]])
    with pytest.raises(ValueError):
        TabulatedKernel(impact=[[-1.0]], par1=[[1.0]], **kw)
    with pytest.raises(ValueError):
        TabulatedKernel(impact=[[1.0]], par1=[[0.0]], **kw)
    with pytest.raises(ValueError):
        TabulatedKernel(impact=[[1.0, 2.0]], par1=[[1.0]], **kw)
