"""Compensators, time-rescaling residuals and Monte Carlo count summaries."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from ._backend import core
from .cluster import SimOptions, simulate_many
from .kernel import KernelSpec, coordinate_intensity, kappa_total
from .marks import Path

QUAD_EPSREL = 1e-9


class NumericalError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, segment=None, estimate=None, abserr=None):
        super().__init__(message)
        self.segment = segment
        self.estimate = estimate
        self.abserr = abserr


def _check_target(spec, target):
    if target == "all":
        return
    if not isinstance(target, (int, np.integer)) or not 1 <= target <= spec.dimension:
        raise IndexError(f"target {target!r} is neither 'all' nor a coordinate in 1..{spec.dimension}")


def _closed_form(spec, path, times, target):
    tab = spec.table
    idx = tab.index
    ev_t = np.array([e.time for e in path.events], dtype=float)
    ev_m = np.array([idx[e.mark] for e in path.events], dtype=np.int64)
    return core.tabulated_compensator(
        tab.base_alpha, tab.base_init, tab.base_decay, tab.row_weight_for(target),
        tab.impact, tab.kind, tab.par1, tab.par2, ev_t, ev_m, np.asarray(times, dtype=float))


def _rate_fn(spec, events, target):
    if target == "all":
        return lambda u: kappa_total(spec, u, events)
    return lambda u: coordinate_intensity(spec, u, int(target), events)


def _quadrature(spec, path, ts, target):
    """Integrate the intensity piecewise between event and query times.

    Each piece is integrated once and the results are accumulated, so a
    whole array of query times costs a single sweep over the path.
    """
    ts = np.asarray(ts, dtype=float)
    t_max = float(ts.max())
    ev_times = sorted({e.time for e in path.events if e.time < t_max})
    cuts = np.unique(np.concatenate([[0.0], ev_times, ts]))
    cum = np.zeros(len(cuts))
    events = list(path.events)
    k = 0
    for n, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
        # within (a, b) only events at or before a contribute
        while k < len(events) and events[k].time <= a:
            k += 1
        fn = _rate_fn(spec, events[:k], target)
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(fn, a, b, epsrel=QUAD_EPSREL, epsabs=0.0, limit=200)
            except (integrate.IntegrationWarning, ArithmeticError, ValueError) as exc:
                raise NumericalError(f"quadrature failed on ({a}, {b}): {exc}",
                                     segment=(a, b)) from exc
        if not math.isfinite(val) or err > max(QUAD_EPSREL * abs(val), 1e-300) * 10:
            raise NumericalError(f"quadrature error {err:g} too large on ({a}, {b})",
                                 segment=(a, b), estimate=val, abserr=err)
        cum[n + 1] = cum[n] + val
    return cum[np.searchsorted(cuts, ts)]


def compensator(spec: KernelSpec, path: Path, t, target="all", method: str = "auto"):
    """Integrated intensity Lambda(t) = int_0^t kappa(s, A) ds.

    ``target`` is ``"all"`` (A = every mark) or a 1-based coordinate i
    (A = marks touching i).  ``t`` may be a scalar or an array.  ``method``
    is ``"closed"`` (tabulated kernels only), ``"quad"`` or ``"auto"``.
    """
    _check_target(spec, target)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0) or np.any(ts > path.horizon):
        raise ValueError(f"t must lie in [0, {path.horizon}]")
    if method == "auto":
        method = "closed" if spec.table is not None else "quad"
    if method == "closed":
        if spec.table is None:
            raise ValueError("closed form needs a tabulated kernel")
        out = _closed_form(spec, path, ts, target)
    elif method == "quad":
        out = _quadrature(spec, path, ts, target)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out[0]) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class ResidualSeries:
    """Rescaled gaps of one path; ``tail`` is the censored stretch
    Lambda(T) - Lambda(last event) that follows them."""

    values: np.ndarray
    coordinate: object
    path_id: int = 0
    tail: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(~(v > 0)):
            raise ValueError("rescaled gaps must be strictly positive")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)


def time_rescale(spec: KernelSpec, path: Path, i=1, path_id: int = 0,
                 method: str = "auto") -> ResidualSeries:
    """Gaps Lambda^i(T_k) - Lambda^i(T_{k-1}) between the events touching i.

    ``i = "all"`` rescales the pooled process.
    """
    _check_target(spec, i)
    if i == "all":
        times = [e.time for e in path.events]
    else:
        times = [e.time for e in path.events if e.mark.touches(i)]
    lam = compensator(spec, path, np.array(times + [path.horizon]), i, method)
    gaps = np.diff(np.concatenate([[0.0], lam[:-1]]))
    tail = float(lam[-1] - lam[-2]) if times else float(lam[-1])
    return ResidualSeries(gaps, i, path_id, tail)


def pool_residuals(series) -> np.ndarray:
    """Join residual series of independent paths end to end.

    Each path rescales to a unit Poisson stream stopped at Lambda(T), so
    gluing the streams (the censored tail of one path is added to the first
    gap of the next) yields one unit Poisson stream whose gaps are i.i.d.
    Exp(1).  Simply concatenating the in-path gaps would drop the censored
    tails and bias the pool towards short gaps when paths are short.
    """
    out = []
    carry = 0.0
    for s in series:
        if len(s):
            v = s.values.copy()
            v[0] += carry
            out.append(v)
            carry = s.tail
        else:
            carry += s.tail
    return np.concatenate(out) if out else np.empty(0)


def ks_exp1(series):
    """One-sample KS test against Exp(1): returns ``(D, p)``.

    ``p`` uses the asymptotic Kolmogorov distribution with Stephens'
    finite-sample scaling; treat it as approximate when n < 50.
    """
    x = np.sort(np.asarray(getattr(series, "values", series), dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("KS test needs at least one value")
    cdf = -np.expm1(-x)
    k = np.arange(1, n + 1)
    d = float(max(np.max(k / n - cdf), np.max(cdf - (k - 1) / n)))
    rn = math.sqrt(n)
    p = float(special.kolmogorov((rn + 0.12 + 0.11 / rn) * d))
    return d, min(max(p, 0.0), 1.0)


def coordinate_counts(spec: KernelSpec, path: Path, t=None):
    """(N^1_t, ..., N^d_t, N^c_t) where N^c counts events touching >= 2 coordinates."""
    t = path.horizon if t is None else t
    d = spec.dimension
    out = np.zeros(d + 1, dtype=np.int64)
    for e in path.events:
        if e.time > t:
            break
        sup = e.mark.support()
        for i in sup:
            out[i - 1] += 1
        if len(sup) > 1:
            out[d] += 1
    return out


def _coord_names(d):
    return [str(i) for i in range(1, d + 1)] + (["c"] if d > 1 else [])


def mean_count_report(spec: KernelSpec, n_paths: int = None, T: float = None, seed: int = 0,
                      paths=None, max_generation: int = 25, jobs: int = 1,
                      check_spec: KernelSpec = None) -> dict:
    """Monte Carlo summary of terminal counts and the compensator identity.

    Paths are simulated from ``spec`` unless ``paths`` is given.
    Compensators (and residuals for the KS column) are computed against
    ``check_spec`` when set, else ``spec``.  Keys of the returned dict:
    ``mean_counts``, ``variances``, ``se``, ``compensator_means``,
    ``compensator_gap_se_units`` and ``ks``, each keyed by coordinate
    name ("1".."d", plus "c" for common events when d > 1).  Entries that
    need at least two paths are ``None`` otherwise.
    """
    if paths is None:
        if n_paths is None or T is None:
            raise ValueError("give n_paths and T, or precomputed paths")
        opts = SimOptions(T, max_generation, seed)
        paths = simulate_many(spec, opts, n_paths, jobs=jobs)
    paths = list(paths)
    n = len(paths)
    if n == 0:
        raise ValueError("need at least one path")
    check = check_spec or spec
    d = spec.dimension
    names = _coord_names(d)
    counts = np.array([coordinate_counts(spec, p) for p in paths], dtype=float)
    if d == 1:
        counts = counts[:, :1]
    lam = np.array([[compensator(check, p, p.horizon, i) for i in range(1, d + 1)]
                    for p in paths])

    def stats(col):
        m = float(col.mean())
        if n < 2:
            return m, None, None
        v = float(col.var(ddof=1))
        return m, v, math.sqrt(v / n)

    report = {"n_paths": n, "mean_counts": {}, "variances": {}, "se": {},
              "compensator_means": {}, "compensator_gap_se_units": {}, "ks": {}}
    for k, name in enumerate(names):
        m, v, se = stats(counts[:, k])
        report["mean_counts"][name] = m
        report["variances"][name] = v
        report["se"][name] = se
    for i in range(1, d + 1):
        name = str(i)
        gap = counts[:, i - 1] - lam[:, i - 1]
        report["compensator_means"][name] = float(lam[:, i - 1].mean())
        gm, _, gse = stats(gap)
        report["compensator_gap_se_units"][name] = None if gse is None else _ratio(gm, gse)
        pooled = pool_residuals(time_rescale(check, p, i, path_id=j)
                                for j, p in enumerate(paths))
        if pooled.size:
            D, pv = ks_exp1(pooled)
            report["ks"][name] = {"D": D, "p": pv, "n": int(pooled.size),
                                  "mean": float(pooled.mean())}
        else:
            report["ks"][name] = None
    return report


def _ratio(diff, se):
    if se > 0:
        return float(diff / se)
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def _var_se(col):
    # standard error of the sample variance from the spread of squared deviations
    dev2 = (col - col.mean()) ** 2
    return math.sqrt(dev2.var(ddof=1) / col.size)


def cross_engine_gaps(spec: KernelSpec, paths_a, paths_b) -> dict:
    """Differences of count moments between two path samples, in combined se units.

    Compares E N^i_T and E N^c_T for every coordinate, and Var N^1_T.
    Values are ``None`` when either sample has fewer than two paths.
    """
    ca = np.array([coordinate_counts(spec, p) for p in paths_a], dtype=float)
    cb = np.array([coordinate_counts(spec, p) for p in paths_b], dtype=float)
    d = spec.dimension
    names = _coord_names(d)
    out = {}
    small = len(ca) < 2 or len(cb) < 2
    for k, name in enumerate(names):
        if small:
            out[f"mean_{name}"] = None
            continue
        diff = ca[:, k].mean() - cb[:, k].mean()
        se = math.sqrt(ca[:, k].var(ddof=1) / len(ca) + cb[:, k].var(ddof=1) / len(cb))
        out[f"mean_{name}"] = _ratio(diff, se)
    if small:
        out["var_1"] = None
    else:
        diff = ca[:, 0].var(ddof=1) - cb[:, 0].var(ddof=1)
        se = math.hypot(_var_se(ca[:, 0]), _var_se(cb[:, 0]))
        out["var_1"] = _ratio(diff, se)
    return out
