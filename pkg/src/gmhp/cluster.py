"""Generation-wise thinning construction of a Hawkes path on (0, T].

Immigrants are thinned from a Poisson(T * eta_hat) cloud of uniform
candidates.  Each event (s, y) then spawns candidates from a
Poisson((T - s) * f_hat(s, y)) cloud on (s, T], thinned against
f(t, s, y, E).  Generations are expanded until one comes out empty or the cap
``max_generation`` is reached.

Randomness is counter-based.  Generation ``g`` parent ``j`` (its rank by
time within generation g - 1; immigrants use parent 0) reads stream
``(seed, g, j)``: index 0 for the Poisson count, then ``3i+1``, ``3i+2``,
``3i+3`` for candidate i's time, acceptance level and mark.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._backend import core
from .kernel import KernelSpec
from .marks import Event, Path
from .rng import MarkDraws, RngStream, derive_seed

log = logging.getLogger(__name__)


class TruncationError(RuntimeError):
    """The generation cap was hit with events still in the last generation."""

    def __init__(self, message, path):
        super().__init__(message)
        self.path = path


@dataclass(frozen=True)
class SimOptions:
    horizon: float
    max_generation: int = 25
    seed: int = 0
    truncation: str = "warn"

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if int(self.max_generation) != self.max_generation or self.max_generation < 0:
            raise ValueError("max_generation must be a nonnegative integer")
        if self.truncation not in ("warn", "error"):
            raise ValueError("truncation policy must be 'warn' or 'error'")


def simulate_immigrants(spec: KernelSpec, options: SimOptions, rng: RngStream = None) -> list:
    """Generation-0 events, sorted by time."""
    T = float(options.horizon)
    rng = rng or RngStream(options.seed, (0, 0))
    eta_hat = spec.base.bound()
    base = spec.base
    out = []
    p = rng.poisson(T * eta_hat)
    for i in range(p):
        t = T * rng.uniform(3 * i + 1)
        a = eta_hat * rng.uniform(3 * i + 2)
        if a <= base.total_rate(t):
            out.append(Event(t, base.sample_mark(t, MarkDraws(rng, 3 * i + 3)), 0))
    out.sort(key=lambda e: e.time)
    return out


def simulate_offspring(spec: KernelSpec, parent: Event, options: SimOptions,
                       rng: RngStream) -> list:
    """Direct offspring of ``parent`` on (parent.time, T], sorted by time."""
    T = float(options.horizon)
    s, y = parent.time, parent.mark
    if s >= T:
        return []
    gen = (parent.generation or 0) + 1
    fh = spec.excitation.bound(s, y)
    span = T - s
    exc = spec.excitation
    out = []
    p = rng.poisson(span * fh)
    for i in range(p):
        t = s + span * rng.uniform(3 * i + 1)
        if t > T:
            t = T
        if t <= s:
            continue
        a = fh * rng.uniform(3 * i + 2)
        if a <= exc.total_rate(t, s, y):
            out.append(Event(t, exc.sample_mark(t, s, y, MarkDraws(rng, 3 * i + 3)), gen))
    out.sort(key=lambda e: e.time)
    return out


def _finish(events, order, spec, options):
    """Merge generations into a Path; flag ties and truncation."""
    K = int(options.max_generation)
    keyed = sorted(zip(events, order), key=lambda eo: (eo[0].time, eo[0].generation, eo[1]))
    merged = tuple(e for e, _ in keyed)
    times = [e.time for e in merged]
    ties = any(a == b for a, b in zip(times, times[1:]))
    if ties:
        log.warning("exact event-time tie in simulated path (seed=%s)", options.seed)
    truncated = any(e.generation == K for e in merged)
    path = Path(merged, float(options.horizon), spec.dimension,
                truncated=truncated, ties=ties, check=False)
    if truncated:
        msg = f"generation cap K={K} reached with a nonempty last generation"
        if options.truncation == "error":
            raise TruncationError(msg, path)
        log.info(msg)
    return path


def _simulate_generic(spec, options):
    K = int(options.max_generation)
    seed = options.seed
    prev = simulate_immigrants(spec, options, RngStream(seed, (0, 0)))
    events = list(prev)
    order = list(range(len(prev)))
    # parents are ranked by (time, creation order); immigrants are already sorted
    k = 0
    while prev and k < K:
        g = k + 1
        new = []
        for j, parent in enumerate(prev):
            new.extend(simulate_offspring(spec, parent, options, RngStream(seed, (g, j))))
        # stable sort keeps creation order among equal times
        new_sorted = sorted(new, key=lambda e: e.time)
        order.extend(range(len(events), len(events) + len(new_sorted)))
        events.extend(new_sorted)
        prev = new_sorted
        k += 1
    return _finish(events, order, spec, options)


def _simulate_tabulated(spec, options):
    tab = spec.table
    times, marks, gens = core.cluster_tabulated(
        *tab.arrays(), float(options.horizon), int(options.max_generation), int(options.seed))
    # creation order = array position; sort by (time, generation, creation)
    idx = np.lexsort((np.arange(len(times)), gens, times))
    mk = tab.marks
    events = [Event(float(times[k]), mk[int(marks[k])], int(gens[k])) for k in idx]
    return _finish(events, list(range(len(events))), spec, options)


def simulate(spec: KernelSpec, options: SimOptions, engine: str = "auto") -> Path:
    """Simulate one path.

    ``engine`` is ``"generic"`` (kernel objects), ``"tabulated"`` (array
    kernel in the compiled or fallback core) or ``"auto"`` (tabulated when
    the kernel is tabulated).  Both engines read the same random streams.
    """
    if engine == "auto":
        engine = "tabulated" if spec.table is not None else "generic"
    if engine == "tabulated":
        if spec.table is None:
            raise ValueError("spec has no tabulated form")
        return _simulate_tabulated(spec, options)
    if engine == "generic":
        return _simulate_generic(spec, options)
    raise ValueError(f"unknown engine {engine!r}")


def simulate_many(spec: KernelSpec, options: SimOptions, n_paths: int, jobs: int = 1,
                  engine: str = "auto") -> list:
    """``n_paths`` paths; path j uses seed ``derive_seed(options.seed, j)``.

    Output order and content do not depend on ``jobs``.
    """
    opts = [SimOptions(options.horizon, options.max_generation,
                       derive_seed(options.seed, j), options.truncation)
            for j in range(n_paths)]
    if jobs <= 1:
        return [simulate(spec, o, engine) for o in opts]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(lambda o: simulate(spec, o, engine), opts))


@dataclass(frozen=True)
class BranchingSummary:
    counts: tuple            # events per generation
    offspring_means: tuple   # counts[k+1] / counts[k], 0 when counts[k] == 0


def branching_summary(path: Path, max_generation: int = None) -> BranchingSummary:
    gens = [e.generation for e in path.events]
    if any(g is None for g in gens):
        raise ValueError("path carries no generation labels")
    top = max(gens, default=-1)
    size = max(top + 1, (max_generation + 1) if max_generation is not None else 0, 1)
    counts = [0] * size
    for g in gens:
        counts[g] += 1
    means = tuple(counts[k + 1] / counts[k] if counts[k] else 0.0 for k in range(size - 1))
    return BranchingSummary(tuple(counts), means)
