"""Markov state simulator for the bivariate exponential-kernel model.

Channels are indexed 0, 1, 2 for the idiosyncratic-1, idiosyncratic-2 and
common event types (written 1, 2, c in the usual notation).  The state is
Z = (lambda1, lambda2, lambdac, N1, N2).  Between events each lambda_i relaxes
towards alpha_i at rate beta_i.  A channel-j event adds column j of theta to
the lambda vector.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate, linalg

from ._backend import core
from .marks import DELTA, Event, Mark, Path
from .polynomial import Poly, segment_integral
from .rng import derive_seed

CHANNELS = ("1", "2", "c")
CHANNEL_MARKS = (Mark((1, DELTA)), Mark((DELTA, 1)), Mark((1, 1)))
# N1, N2 increments per channel
COUNT_JUMPS = np.array([[1, 0], [0, 1], [1, 1]])


def _channel(j):
    """Array index of a channel given as 1, 2, "1", "2", "c" or its mark."""
    if isinstance(j, Mark):
        if j not in CHANNEL_MARKS:
            raise ValueError(f"{j!r} is not a channel mark")
        return CHANNEL_MARKS.index(j)
    if isinstance(j, str) and j in CHANNELS:
        return CHANNELS.index(j)
    if not isinstance(j, bool) and j in (1, 2):
        return int(j) - 1
    raise ValueError(f"unknown channel {j!r}")


@dataclass(frozen=True)
class ExpParams:
    """Baselines ``alpha``, decays ``beta``, initial intensities ``lambda0``
    (each ordered 1, 2, c) and the impact matrix ``theta[i][j]``: the jump in
    lambda_i caused by a channel-j event."""

    alpha: tuple
    beta: tuple
    lambda0: tuple = None
    theta: tuple = ((0.0,) * 3,) * 3

    def __post_init__(self):
        alpha = tuple(float(v) for v in self.alpha)
        beta = tuple(float(v) for v in self.beta)
        lam0 = alpha if self.lambda0 is None else tuple(float(v) for v in self.lambda0)
        theta = tuple(tuple(float(v) for v in row) for row in self.theta)
        if len(alpha) != 3 or len(beta) != 3 or len(lam0) != 3:
            raise ValueError("alpha, beta, lambda0 need three entries (1, 2, c)")
        if len(theta) != 3 or any(len(r) != 3 for r in theta):
            raise ValueError("theta must be 3x3")
        flat = alpha + beta + lam0 + sum(theta, ())
        if not all(math.isfinite(v) and v >= 0 for v in flat):
            raise ValueError("parameters must be finite and nonnegative")
        if any(b <= 0 for b in beta):
            raise ValueError("decay rates beta must be positive")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "lambda0", lam0)
        object.__setattr__(self, "theta", theta)

    @property
    def theta_array(self):
        return np.array(self.theta)

    def to_dict(self):
        return {"alpha": list(self.alpha), "beta": list(self.beta),
                "lambda0": list(self.lambda0), "theta": [list(r) for r in self.theta]}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"alpha", "beta", "lambda0", "theta"}
        if unknown:
            raise ValueError(f"unknown ExpParams fields: {sorted(unknown)}")
        return cls(d["alpha"], d["beta"], d.get("lambda0"), d.get("theta", ((0.0,) * 3,) * 3))


# values from the worked bivariate example: both idiosyncratic channels at
# 0.5 with decay 2.5, the common channel at 0.25 with decay 5
REFERENCE_EXP = ExpParams(
    alpha=(0.5, 0.5, 0.25),
    beta=(2.5, 2.5, 5.0),
    lambda0=(0.5, 0.5, 0.25),
    theta=((0.5, 0.25, 0.25),
           (0.25, 0.5, 0.25),
           (0.25, 0.25, 0.25)),
)


@dataclass(frozen=True)
class IntensityState:
    lam: tuple
    n1: int = 0
    n2: int = 0
    t: float = 0.0

    @classmethod
    def initial(cls, params: ExpParams):
        return cls(params.lambda0, 0, 0, 0.0)

    @property
    def lambda1(self):
        return self.lam[0]

    @property
    def lambda2(self):
        return self.lam[1]

    @property
    def lambdac(self):
        return self.lam[2]

    @property
    def counts(self):
        return (self.n1, self.n2)

    def coordinate_intensity(self, i):
        """Intensity of N^i: lambda_i + lambda_c."""
        if i not in (1, 2):
            raise IndexError("coordinate must be 1 or 2")
        return self.lam[i - 1] + self.lam[2]


def decay(params: ExpParams, state: IntensityState, dt: float) -> IntensityState:
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    lam = tuple(a + (l - a) * math.exp(-b * dt)
                for a, b, l in zip(params.alpha, params.beta, state.lam))
    return replace(state, lam=lam, t=state.t + dt)


def apply_jump(params: ExpParams, state: IntensityState, channel) -> IntensityState:
    """Jump of every lambda by the theta column of ``channel`` (1, 2 or "c")."""
    j = _channel(channel)
    lam = tuple(l + params.theta[i][j] for i, l in enumerate(state.lam))
    dn1, dn2 = COUNT_JUMPS[j]
    return replace(state, lam=lam, n1=state.n1 + int(dn1), n2=state.n2 + int(dn2))


def replay(params: ExpParams, history, t: float) -> IntensityState:
    """State at time ``t`` (left limit: events at exactly ``t`` excluded)."""
    st = IntensityState.initial(params)
    for ev in history:
        if ev.time >= t:
            break
        st = decay(params, st, ev.time - st.t)
        st = apply_jump(params, st, ev.mark)
    return decay(params, st, t - st.t)


def _batch_arrays(params, T, seeds):
    th = params.theta_array
    return core.markov_batch(params.alpha, params.beta, params.lambda0, th, float(T),
                             [int(s) for s in seeds])


def simulate_exact(params: ExpParams, T: float, seed: int) -> Path:
    """One path by thinning against sum_i max(lambda_i, alpha_i)."""
    if not T > 0:
        raise ValueError("horizon must be positive")
    off, times, chans, _ = _batch_arrays(params, T, [seed])
    events = tuple(Event(float(t), CHANNEL_MARKS[int(c)]) for t, c in zip(times, chans))
    ties = bool(np.any(np.diff(times) == 0)) if len(times) > 1 else False
    return Path(events, float(T), 2, ties=ties, check=False)


@dataclass
class MarkovBatch:
    """Many independent paths stored as flat arrays.

    Path ``j`` occupies ``offsets[j]:offsets[j+1]`` of ``times``, ``channels``
    and ``lam_pre`` (the intensities just before each event).
    """

    params: ExpParams
    horizon: float
    seeds: np.ndarray
    offsets: np.ndarray
    times: np.ndarray
    channels: np.ndarray
    lam_pre: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_paths(self):
        return len(self.offsets) - 1

    def path(self, j) -> Path:
        a, b = self.offsets[j], self.offsets[j + 1]
        events = tuple(Event(float(t), CHANNEL_MARKS[int(c)])
                       for t, c in zip(self.times[a:b], self.channels[a:b]))
        return Path(events, self.horizon, 2, check=False)

    def path_index(self):
        if "pid" not in self._cache:
            self._cache["pid"] = np.repeat(np.arange(self.n_paths), np.diff(self.offsets))
        return self._cache["pid"]

    def counts(self):
        """(N1_T, N2_T, Nc_T) per path as integer arrays."""
        pid = self.path_index()
        n = self.n_paths
        per = np.zeros((n, 3), dtype=np.int64)
        np.add.at(per, (pid, self.channels), 1)
        n1 = per[:, 0] + per[:, 2]
        n2 = per[:, 1] + per[:, 2]
        return n1, n2, per[:, 2]

    def segments(self):
        """Inter-event stretches: start lambdas, counts, lengths, path ids.

        Each path contributes ``k + 1`` stretches for ``k`` events; the first
        starts at time 0 from ``lambda0`` and the last ends at the horizon.
        """
        if "seg" in self._cache:
            return self._cache["seg"]
        p = self.params
        th = p.theta_array
        nev = np.diff(self.offsets)
        npaths = self.n_paths
        # post-jump intensities at each event
        post = self.lam_pre + th[:, self.channels].T
        jumps = COUNT_JUMPS[self.channels]
        # running counts within each path: global cumsum minus earlier paths
        csum = np.cumsum(jumps, axis=0)
        starts = self.offsets[:-1]
        pid = self.path_index()
        counts_after = csum - np.where(starts[pid][:, None] > 0,
                                       csum[np.maximum(starts[pid] - 1, 0)], 0)
        nseg = nev + 1
        S = int(nseg.sum())
        seg_path = np.repeat(np.arange(npaths), nseg)
        seg_lam = np.empty((S, 3))
        seg_n = np.zeros((S, 2))
        seg_start = np.empty(S)
        seg_end = np.empty(S)
        first = np.concatenate([[0], np.cumsum(nseg)[:-1]])
        # first stretch of each path
        seg_lam[first] = np.asarray(p.lambda0)
        seg_start[first] = 0.0
        # stretches that start at an event
        is_ev = np.ones(S, dtype=bool)
        is_ev[first] = False
        ev_seg = np.flatnonzero(is_ev)
        seg_lam[ev_seg] = post
        seg_n[ev_seg] = counts_after
        seg_start[ev_seg] = self.times
        # each stretch ends at the next event, or at the horizon
        seg_end[:] = self.horizon
        nxt = np.arange(S - 1)
        same = seg_path[1:] == seg_path[:-1]
        seg_end[nxt[same]] = seg_start[1:][same]
        out = (seg_lam, seg_n, seg_end - seg_start, seg_path, seg_start)
        self._cache["seg"] = out
        return out

    def final_state(self):
        """(lambda at horizon (n, 3), counts at horizon (n, 2))."""
        lam, n, h, pid, _ = self.segments()
        last = np.concatenate([np.flatnonzero(pid[1:] != pid[:-1]), [len(pid) - 1]])
        a = np.asarray(self.params.alpha)
        b = np.asarray(self.params.beta)
        lam_T = a + (lam[last] - a) * np.exp(-b * h[last][:, None])
        return lam_T, n[last]

    def integrate(self, poly: Poly, t0: float = 0.0, t1: float = None):
        """Per-path integral of ``poly(Z_u)`` over [t0, t1], in closed form."""
        t1 = self.horizon if t1 is None else t1
        lam, n, h, pid, start = self.segments()
        a = np.asarray(self.params.alpha)
        b = np.asarray(self.params.beta)
        lo = np.clip(t0, start, start + h)
        hi = np.clip(t1, start, start + h)
        lam_lo = a + (lam - a) * np.exp(-b * (lo - start)[:, None])
        vals = segment_integral(poly, lam_lo, a, b, n, hi - lo)
        return np.bincount(pid, weights=vals, minlength=self.n_paths)


def simulate_batch(params: ExpParams, T: float, n_paths: int, seed: int) -> MarkovBatch:
    """``n_paths`` paths; path j uses ``derive_seed(seed, j)``."""
    seeds = np.array([derive_seed(seed, j) for j in range(n_paths)], dtype=np.uint64)
    off, times, chans, pre = _batch_arrays(params, T, seeds)
    return MarkovBatch(params, float(T), seeds, off, times, chans, pre)


# -- generator and Dynkin's formula ------------------------------------------

def generator_apply(params: ExpParams, v, state: IntensityState) -> float:
    """(A v)(state): drift towards alpha plus one jump term per channel.

    ``v`` must offer ``value(lam, n)`` and ``grad(lam, n)`` (partials in the
    three lambdas); :class:`~gmhp.polynomial.Poly` does.
    """
    lam = np.asarray(state.lam, dtype=float)
    n = np.array([state.n1, state.n2], dtype=float)
    alpha = np.asarray(params.alpha)
    beta = np.asarray(params.beta)
    th = params.theta_array
    grad = np.asarray(v.grad(lam, n), dtype=float)
    drift = float(np.dot(beta * (alpha - lam), grad))
    v0 = float(v.value(lam, n))
    jumps = 0.0
    for j in range(3):
        after = float(v.value(lam + th[:, j], n + COUNT_JUMPS[j]))
        jumps += lam[j] * (after - v0)
    return drift + jumps


def generator_poly(params: ExpParams, v: Poly) -> Poly:
    """A v as a polynomial (exact for polynomial ``v``)."""
    out = Poly.const(0.0)
    lam_vars = [Poly.var(n) for n in ("lambda1", "lambda2", "lambdac")]
    for i in range(3):
        out = out + (params.beta[i] * params.alpha[i] - params.beta[i] * lam_vars[i]) * v.partial(i)
    th = params.theta_array
    for j in range(3):
        delta = list(th[:, j]) + list(COUNT_JUMPS[j])
        out = out + lam_vars[j] * (v.shift(delta) - v)
    return out


@dataclass
class SmoothFunction:
    """Non-polynomial test function with explicit partials."""

    value: Callable
    grad: Callable


def dynkin_residual(params: ExpParams, v, T: float, n_paths: int, seed: int,
                    batch: MarkovBatch = None):
    """Monte Carlo mean and standard error of v(Z_T) - v(Z_0) - int_0^T Av(Z_u) du.

    Polynomial ``v`` is integrated in closed form; anything else falls back
    to adaptive quadrature on each inter-event stretch.
    """
    if batch is None:
        batch = simulate_batch(params, T, n_paths, seed)
    lam0 = np.asarray(params.lambda0, dtype=float)
    lam_T, n_T = batch.final_state()
    if isinstance(v, Poly):
        Av = generator_poly(params, v)
        integral = batch.integrate(Av)
        vT = np.asarray(v(lam_T, n_T), dtype=float)
        v0 = float(v(lam0, np.zeros(2)))
    else:
        integral = _quadrature_integral(params, v, batch)
        vT = np.array([float(v.value(l, n)) for l, n in zip(lam_T, n_T)])
        v0 = float(v.value(lam0, np.zeros(2)))
    r = vT - v0 - integral
    n = len(r)
    se = float(r.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return float(r.mean()), se


def _quadrature_integral(params, v, batch):
    lam, n, h, pid, _ = batch.segments()
    a = np.asarray(params.alpha)
    b = np.asarray(params.beta)
    out = np.zeros(batch.n_paths)
    for k in range(len(h)):
        if h[k] <= 0:
            continue

        def f(u, k=k):
            st = IntensityState(tuple(a + (lam[k] - a) * np.exp(-b * u)), int(n[k, 0]), int(n[k, 1]))
            return generator_apply(params, v, st)

        val, _ = integrate.quad(f, 0.0, h[k], epsrel=1e-8, epsabs=1e-12, limit=200)
        out[pid[k]] += val
    return out


# -- analytical oracles --------------------------------------------------------

def stationary_intensity(params: ExpParams):
    """Solve beta_i (alpha_i - m_i) + sum_j theta_ij m_j = 0 for m."""
    b = np.asarray(params.beta)
    M = np.diag(b) - params.theta_array
    return np.linalg.solve(M, b * np.asarray(params.alpha))


def _mean_system(params):
    # d/dt [m, EN1, EN2] = A [m, EN1, EN2] + c
    b = np.asarray(params.beta)
    A = np.zeros((5, 5))
    A[:3, :3] = -np.diag(b) + params.theta_array
    A[3, [0, 2]] = 1.0
    A[4, [1, 2]] = 1.0
    c = np.zeros(5)
    c[:3] = b * np.asarray(params.alpha)
    return A, c


def expected_state(params: ExpParams, t: float):
    """(E lambda_t (3,), E N1_t, E N2_t) by integrating the mean ODE."""
    A, c = _mean_system(params)
    y0 = np.concatenate([params.lambda0, [0.0, 0.0]])
    sol = integrate.solve_ivp(lambda _, y: A @ y + c, (0.0, float(t)), y0,
                              method="DOP853", rtol=1e-10, atol=1e-12)
    y = sol.y[:, -1]
    return y[:3], y[3], y[4]


def expected_state_expm(params: ExpParams, t: float):
    """Same as :func:`expected_state` via a matrix exponential."""
    A, c = _mean_system(params)
    aug = np.zeros((6, 6))
    aug[:5, :5] = A
    aug[:5, 5] = c
    y0 = np.concatenate([params.lambda0, [0.0, 0.0, 1.0]])
    y = linalg.expm(aug * t) @ y0
    return y[:3], y[3], y[4]


# -- reduced marginal path -----------------------------------------------------

def is_marginal_markov(params: ExpParams, i: int = 1) -> bool:
    """True when (lambda_i + lambda_c, N^i) is Markov on its own.

    For i = 1: theta_12 = theta_c2 = 0, beta_1 = beta_c and
    theta_1c + theta_cc = theta_11 + theta_c1 (symmetrically for i = 2).
    """
    th = params.theta
    k = i - 1
    o = 1 - k
    return (th[k][o] == 0 and th[2][o] == 0 and params.beta[k] == params.beta[2]
            and math.isclose(th[k][2] + th[2][2], th[k][k] + th[2][k], rel_tol=1e-12, abs_tol=0))


def simulate_marginal(params: ExpParams, T: float, seed: int, i: int = 1):
    """Event times of N^i from the reduced two-dimensional state.

    Only valid when :func:`is_marginal_markov` holds; the reduced intensity
    is a univariate exponential Hawkes intensity.
    """
    if not is_marginal_markov(params, i):
        raise ValueError("reduced state is not Markov for these parameters")
    k = i - 1
    a = params.alpha[k] + params.alpha[2]
    b = params.beta[k]
    jump = params.theta[k][k] + params.theta[2][k]
    lam = params.lambda0[k] + params.lambda0[2]
    reduced = ExpParams((a, 0.0, 0.0), (b, 1.0, 1.0), (lam, 0.0, 0.0),
                        ((jump, 0, 0), (0, 0, 0), (0, 0, 0)))
    off, times, _, _ = _batch_arrays(reduced, T, [seed])
    return np.asarray(times)


# -- intensity trace -----------------------------------------------------------

TRACE_COLUMNS = ("t", "lambda1", "lambda2", "lambdac", "N1", "N2")


def intensity_trace(params: ExpParams, path: Path, grid: int = 1000):
    """Rows (t, lambda1, lambda2, lambdac, N1, N2) on a grid plus event times.

    Grid rows carry the state at that instant (no event there).  Event rows
    carry the state right after the jump, so lambdas are continuous between
    consecutive rows except across an event row.
    """
    if grid < 2:
        raise ValueError("grid needs at least 2 points")
    T = path.horizon
    gpts = np.linspace(0.0, T, grid)
    items = [(float(t), 0, None) for t in gpts]
    items += [(ev.time, 1, ev) for ev in path.events]
    items.sort(key=lambda r: (r[0], r[1]))
    st = IntensityState.initial(params)
    rows = []
    for t, is_ev, ev in items:
        st = decay(params, st, t - st.t)
        if is_ev:
            st = apply_jump(params, st, ev.mark)
        rows.append((t,) + tuple(st.lam) + (st.n1, st.n2))
    return rows


def write_trace_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in rows:
        w.writerow([format(r[0], ".16e"), format(r[1], ".16e"), format(r[2], ".16e"),
                    format(r[3], ".16e"), r[4], r[5]])
