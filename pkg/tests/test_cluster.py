import math

import numpy as np
import pytest
from scipy import stats

from gmhp import _pycore
from gmhp._backend import core
from gmhp.cluster import (SimOptions, TruncationError, _finish, branching_summary, simulate,
                          simulate_immigrants, simulate_many, simulate_offspring)
from gmhp.diagnostics import ks_exp1
from gmhp.kernel import ConstantBase, KernelSpec, ZeroExcitation
from gmhp.marks import DELTA, Event, Mark, Path
from gmhp.markov import CHANNEL_MARKS, REFERENCE_EXP
from gmhp.presets import (ClassicalParams, GaussParams, build, build_bivariate_exp,
                          build_bivariate_gauss, build_classical)
from gmhp.rng import RngStream

ONE = Mark((1,))


def poisson_spec(rate, bound=None):
    base = ConstantBase([ONE], [rate])
    if bound is not None:
        base.bound = lambda: bound
    return KernelSpec(1, base, ZeroExcitation(1, 1.0))


@pytest.fixture(scope="module")
def ref_exp():
    return build_bivariate_exp(REFERENCE_EXP)


def test_zero_base_gives_empty_path():
    spec = poisson_spec(0.0)
    assert simulate_immigrants(spec, SimOptions(10.0)) == []
    assert len(simulate(spec, SimOptions(10.0, seed=3))) == 0


def test_immigrant_count_reference_exp(ref_exp):
    # immigrants only: K = 0 keeps generation 0
    n = np.array([len(p) for p in simulate_many(ref_exp, SimOptions(10.0, 0, 5), 100_000)])
    sd = math.sqrt(12.5)
    assert abs(n.mean() - 12.5) <= 3 * sd / math.sqrt(len(n))


def test_thinned_immigrants_half_rate():
    spec = poisson_spec(1.0, bound=2.0)
    runs = 5000
    n = np.array([len(simulate_immigrants(spec, SimOptions(10.0), RngStream(s, (0, 0))))
                  for s in range(runs)])
    assert abs(n.mean() - 10.0) <= 3 * math.sqrt(10.0 / runs)


def test_offspring_boundary_and_zero_kernel(ref_exp):
    opts = SimOptions(5.0)
    assert simulate_offspring(ref_exp, Event(5.0, CHANNEL_MARKS[0], 0), opts, RngStream(1, (1, 0))) == []
    spec = poisson_spec(1.0)
    assert simulate_offspring(spec, Event(1.0, ONE, 0), opts, RngStream(1, (1, 0))) == []


def test_offspring_mean_reference_exp(ref_exp):
    T = 20.0
    opts = SimOptions(T)
    parent = Event(1e-12, CHANNEL_MARKS[0], 0)
    theta_col = [0.5, 0.25, 0.25]
    beta = [2.5, 2.5, 5.0]
    oracle = sum(th / b * (1 - math.exp(-b * T)) for th, b in zip(theta_col, beta))
    assert oracle == pytest.approx(0.35, abs=1e-12)
    runs = 100_000
    counts = np.array([len(simulate_offspring(ref_exp, parent, opts, RngStream(s, (1, 0))))
                       for s in range(runs)])
    sd = counts.std(ddof=1)
    assert abs(counts.mean() - oracle) <= 3 * sd / math.sqrt(runs)
    # per-parent counts are dominated by Poisson((T - s) fhat)
    assert counts.mean() <= T * 1.0


def test_poisson_degeneration_ks():
    spec = poisson_spec(2.0)
    gaps = []
    for p in simulate_many(spec, SimOptions(50.0, seed=9), 100):
        gaps.extend(np.diff([0.0] + p.times) * 2.0)
    D, pval = ks_exp1(gaps)
    assert len(gaps) > 9000 and pval > 0.01


TABULATED = ["classical", "bivariate_exp", "etas", "finance"]


@pytest.mark.parametrize("name", TABULATED)
def test_generic_and_tabulated_engines_agree_bitwise(name):
    spec = build(name)
    for seed in range(6):
        opts = SimOptions(8.0, 25, seed)
        a = simulate(spec, opts, engine="tabulated")
        b = simulate(spec, opts, engine="generic")
        assert a.events == b.events
        assert a.truncated == b.truncated


@pytest.mark.parametrize("name", TABULATED)
def test_compiled_and_python_cores_agree_bitwise(name):
    tab = build(name).table
    for seed in range(4):
        x = core.cluster_tabulated(*tab.arrays(), 8.0, 25, seed)
        y = _pycore.cluster_tabulated(*tab.arrays(), 8.0, 25, seed)
        for u, v in zip(x, y):
            assert np.array_equal(u, v)


def test_path_invariants_and_generations(ref_exp):
    T = 5.0
    for p in simulate_many(ref_exp, SimOptions(T, 25, 1), 200):
        times = p.times
        assert all(0 < t <= T for t in times)
        assert all(a < b for a, b in zip(times, times[1:]))
        first = {}
        for e in p.events:
            first.setdefault(e.generation, e.time)
        # the earliest generation-k event comes after the earliest of generation k-1
        for k in first:
            if k > 0:
                assert first[k] > first[k - 1]


def test_determinism_across_jobs(ref_exp):
    opts = SimOptions(5.0, 25, 123)
    a = simulate_many(ref_exp, opts, 50, jobs=1)
    b = simulate_many(ref_exp, opts, 50, jobs=4)
    assert [p.events for p in a] == [p.events for p in b]
    assert simulate(ref_exp, opts).events == simulate(ref_exp, opts).events


def test_truncation_flag_and_error():
    with pytest.warns(UserWarning):
        spec = build_classical(ClassicalParams(1.0, 2.0, 1.0))
    p = simulate(spec, SimOptions(10.0, 2, 0))
    assert p.truncated
    with pytest.raises(TruncationError) as info:
        simulate(spec, SimOptions(10.0, 2, 0, "error"))
    assert info.value.path.truncated


def test_tie_ordering_and_flag():
    m = Mark((1,))
    evs = [Event(0.5, m, 1), Event(0.5, m, 0), Event(0.2, m, 0)]
    p = _finish(evs, [0, 1, 2], poisson_spec(1.0), SimOptions(1.0))
    assert p.ties
    assert [(e.time, e.generation) for e in p.events] == [(0.2, 0), (0.5, 0), (0.5, 1)]


def test_branching_summary_examples():
    assert branching_summary(Path((), 1.0, 1), max_generation=3).counts == (0, 0, 0, 0)
    p = simulate(poisson_spec(2.0), SimOptions(10.0, seed=2))
    s = branching_summary(p)
    assert s.counts == (len(p),)
    q = simulate(build("classical"), SimOptions(50.0, 25, 4))
    s = branching_summary(q)
    assert sum(s.counts) == len(q) and all(c >= 0 for c in s.counts)
    assert s.counts[-1] > 0


def test_gauss_immigrant_marks_match_mixture():
    g0 = GaussParams(g_ii=(0, 0, 0), g_ci=(0, 0, 0))
    spec = build_bivariate_gauss(g0)
    marks = []
    for p in simulate_many(spec, SimOptions(10.0, 2, 1), 1000):
        marks.extend(e.mark for e in p.events)
    n = len(marks)
    kinds = np.array([0 if m[1] is DELTA else 1 if m[0] is DELTA else 2 for m in marks])
    obs = np.bincount(kinds, minlength=3)
    exp = n * np.array([0.4, 0.4, 0.2])
    assert stats.chisquare(obs, exp).pvalue > 0.01
    x1 = np.array([m[0] for m in marks if m[1] is DELTA])
    assert stats.kstest(x1, "norm", args=(2.0, 0.16331)).pvalue > 0.01
    xc = np.array([m[1] for m in marks if m[0] is not DELTA and m[1] is not DELTA])
    assert stats.kstest(xc, "norm", args=(0.0, 0.16331)).pvalue > 0.01


def test_gauss_zero_mean_factor_gives_independent_offspring():
    p0 = GaussParams(a=(0.0, 0.0, 0.0))
    spec = build_bivariate_gauss(p0)
    opts = SimOptions(50.0)
    xs, ys = [], []
    for s in range(3000):
        x = 2.0 + 0.5 * RngStream(s, (9, 9)).uniform(1)
        parent = Event(1.0, Mark((x, DELTA)), 0)
        for e in simulate_offspring(spec, parent, opts, RngStream(s, (1, 0))):
            if e.mark[1] is DELTA:
                xs.append(x)
                ys.append(e.mark[0])
    r = np.corrcoef(xs, ys)[0, 1]
    assert abs(r) <= 3 / math.sqrt(len(xs))


def test_gauss_offspring_mean_factor():
    spec = build_bivariate_gauss(GaussParams())
    opts = SimOptions(50.0)
    ys = []
    parent = Event(1.0, Mark((2.0, DELTA)), 0)
    for s in range(3000):
        ys.extend(e.mark[0] for e in simulate_offspring(spec, parent, opts, RngStream(s, (1, 0)))
                  if e.mark[1] is DELTA)
    ys = np.array(ys)
    assert abs(ys.mean() - 0.9 * 2.0) <= 4 * 0.16331 / math.sqrt(len(ys))


def test_options_validation():
    with pytest.raises(ValueError):
        SimOptions(0.0)
    with pytest.raises(ValueError):
        SimOptions(1.0, -1)
    with pytest.raises(ValueError):
        SimOptions(1.0, truncation="ignore")
