"""Hawkes kernels: a base (immigrant) part plus an excitation part.

The intensity measure at time t is

    kappa(t, .) = eta(t, .) + sum over past events (s, x), s < t, of f(t, s, x, .)

Components expose total rates, per-coordinate rates, mark samplers, and the
dominating constants used by the thinning construction.

A kernel whose marks form a finite list and whose excitation is a sum of
exponential or power-law decays can be written as a :class:`TabulatedKernel`.
Tabulated kernels run through the compiled simulation and compensator loops.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .marks import DELTA, Mark, Path
from .rng import MarkDraws, RngStream

EXP = 0
POWER = 1


class BaseKernel:
    """Autonomous part eta(t, dy) of the kernel."""

    dimension: int = 1

    def total_rate(self, t: float) -> float:
        raise NotImplementedError

    def coordinate_rate(self, t: float, i: int) -> float:
        """eta(t, A^i), the mass on marks whose i-th entry is not dummy."""
        raise NotImplementedError

    def sample_mark(self, t: float, draws: MarkDraws) -> Mark:
        raise NotImplementedError

    def bound(self) -> float:
        """A constant dominating ``total_rate`` for every t >= 0."""
        raise NotImplementedError


class ExcitationKernel:
    """Feedback part f(t, s, x, dy); zero unless s < t."""

    dimension: int = 1

    def total_rate(self, t: float, s: float, x: Mark) -> float:
        raise NotImplementedError

    def coordinate_rate(self, t: float, s: float, x: Mark, i: int) -> float:
        raise NotImplementedError

    def sample_mark(self, t: float, s: float, x: Mark, draws: MarkDraws) -> Mark:
        raise NotImplementedError

    def bound(self, s: float, x: Mark) -> float:
        """A constant dominating ``total_rate(t, s, x)`` for all t > s."""
        raise NotImplementedError


class ConstantBase(BaseKernel):
    """Time-constant base rate spread over a finite list of marks."""

    def __init__(self, marks: Sequence[Mark], rates: Sequence[float]):
        if len(marks) != len(rates) or not marks:
            raise ValueError("need one rate per mark")
        if any(r < 0 for r in rates):
            raise ValueError("rates must be nonnegative")
        self.marks = [Mark(m) for m in marks]
        self.rates = [float(r) for r in rates]
        self.dimension = len(self.marks[0])
        self._total = sum(self.rates)

    def total_rate(self, t):
        return self._total

    def coordinate_rate(self, t, i):
        return sum(r for m, r in zip(self.marks, self.rates) if m[i - 1] is not DELTA)

    def sample_mark(self, t, draws):
        target = draws.uniform(0) * self._total
        cum = 0.0
        for m, r in zip(self.marks, self.rates):
            cum += r
            if r > 0 and target <= cum:
                return m
        return [m for m, r in zip(self.marks, self.rates) if r > 0][-1]

    def bound(self):
        return self._total


class ZeroExcitation(ExcitationKernel):
    """f = 0, with an arbitrary (slack) declared bound."""

    def __init__(self, dimension: int = 1, declared_bound: float = 0.0):
        self.dimension = dimension
        self.declared_bound = float(declared_bound)

    def total_rate(self, t, s, x):
        return 0.0

    def coordinate_rate(self, t, s, x, i):
        return 0.0

    def sample_mark(self, t, s, x, draws):  # pragma: no cover - never reached
        raise RuntimeError("zero excitation has no marks to sample")

    def bound(self, s, x):
        return self.declared_bound


@dataclass(frozen=True)
class TabulatedKernel:
    """Array form of a kernel over a finite mark list.

    Rows group target marks that share a rate function.  Row ``r`` has base
    rate ``base_alpha[r] + (base_init[r] - base_alpha[r]) * exp(-base_decay[r] t)``
    and receives ``impact[r, x] * decay(t - s)`` from a parent of mark type
    ``x``, where the decay is ``exp(-par1 * u)`` (kind 0) or
    ``(u + par1) ** -par2`` (kind 1).  Within a row, target marks are chosen
    with fixed probabilities ``row_weights[r]``.
    """

    marks: tuple
    base_alpha: np.ndarray
    base_init: np.ndarray
    base_decay: np.ndarray
    row_marks: tuple            # per row, tuple of mark indices
    row_weights: tuple          # per row, tuple of probabilities
    impact: np.ndarray          # (R, M)
    kind: np.ndarray            # (R, M) int
    par1: np.ndarray            # (R, M)
    par2: np.ndarray            # (R, M)
    index: dict = field(init=False, repr=False, compare=False)
    csr: tuple = field(init=False, repr=False, compare=False)
    fhat: np.ndarray = field(init=False, repr=False, compare=False)
    eta_hat: float = field(init=False, repr=False, compare=False)
    touch: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        marks = tuple(Mark(m) for m in self.marks)
        object.__setattr__(self, "marks", marks)
        R = len(self.row_marks)
        M = len(marks)
        arr = lambda a, dt=float: np.ascontiguousarray(a, dtype=dt)
        for name in ("base_alpha", "base_init", "base_decay"):
            v = arr(getattr(self, name))
            if v.shape != (R,):
                raise ValueError(f"{name} must have one entry per row")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite and nonnegative")
            object.__setattr__(self, name, v)
        for name, dt in (("impact", float), ("kind", np.int64), ("par1", float), ("par2", float)):
            v = arr(getattr(self, name), dt)
            if v.shape != (R, M):
                raise ValueError(f"{name} must have shape (rows, marks) = {(R, M)}")
            object.__setattr__(self, name, v)
        if np.any(self.impact < 0):
            raise ValueError("impacts must be nonnegative")
        live = self.impact > 0
        if np.any(live & (self.par1 <= 0)):
            raise ValueError("decay rates and power-law offsets must be positive")
        if np.any(live & (self.kind == POWER) & (self.par2 <= 0)):
            raise ValueError("power-law exponents must be positive")

        ptr = [0]
        flat_m, flat_w = [], []
        for r in range(R):
            ms = tuple(int(m) for m in self.row_marks[r])
            ws = np.asarray(self.row_weights[r], dtype=float)
            if len(ms) == 0 or len(ms) != len(ws) or np.any(ws < 0) or ws.sum() <= 0:
                raise ValueError(f"row {r}: need nonnegative weights, one per mark")
            cw = np.cumsum(ws / ws.sum())
            cw[-1] = 1.0
            flat_m.extend(ms)
            flat_w.extend(cw.tolist())
            ptr.append(len(flat_m))
        object.__setattr__(self, "csr", (np.array(ptr, dtype=np.int64),
                                         np.array(flat_m, dtype=np.int64),
                                         np.array(flat_w, dtype=float)))
        object.__setattr__(self, "index", {m: k for k, m in enumerate(marks)})
        peak = np.where(self.kind == EXP, 1.0,
                        np.where(self.impact > 0,
                                 np.power(np.where(self.par1 > 0, self.par1, 1.0),
                                          -self.par2), 0.0))
        object.__setattr__(self, "fhat", (self.impact * peak).sum(axis=0))
        object.__setattr__(self, "eta_hat",
                           float(np.maximum(self.base_alpha, self.base_init).sum()))
        d = len(marks[0])
        touch = np.array([[m[i] is not DELTA for i in range(d)] for m in marks], dtype=bool)
        object.__setattr__(self, "touch", touch)

    @property
    def dimension(self) -> int:
        return len(self.marks[0])

    @property
    def n_rows(self) -> int:
        return len(self.row_marks)

    def row_weight_for(self, target) -> np.ndarray:
        """Per-row fraction of mass landing on ``target``.

        ``target`` is ``"all"`` or a 1-based coordinate index.
        """
        if target == "all":
            return np.ones(self.n_rows)
        col = self.touch[:, target - 1]
        out = np.zeros(self.n_rows)
        for r, (ms, ws) in enumerate(zip(self.row_marks, self.row_weights)):
            ws = np.asarray(ws, dtype=float)
            out[r] = float((ws * col[list(ms)]).sum() / ws.sum())
        return out

    def base_row_rates(self, t):
        return self.base_alpha + (self.base_init - self.base_alpha) * np.exp(-self.base_decay * t)

    def exc_row_rates(self, u, x):
        g = self.impact[:, x]
        if u <= 0:
            return np.zeros_like(g)
        with np.errstate(divide="ignore"):
            dec = np.where(self.kind[:, x] == EXP,
                           np.exp(-self.par1[:, x] * u),
                           np.power(u + self.par1[:, x], -self.par2[:, x]))
        return np.where(g > 0, g * dec, 0.0)

    def arrays(self):
        """Positional arguments for the core ``cluster_tabulated`` loop."""
        ptr, flat_m, flat_w = self.csr
        return (self.base_alpha, self.base_init, self.base_decay, ptr, flat_m, flat_w,
                self.impact, self.kind, self.par1, self.par2, self.fhat, self.eta_hat)


def _pick(w, total, rates, tab):
    # mirrors the core's mark selection so both engines agree bit for bit
    ptr, flat_m, flat_w = tab.csr
    target = w * total
    cum = 0.0
    prev = 0.0
    chosen = -1
    for r, rate in enumerate(rates):
        if rate <= 0.0:
            continue
        prev = cum
        cum += rate
        chosen = r
        if target <= cum:
            break
    q = (target - prev) / rates[chosen]
    lo, hi = int(ptr[chosen]), int(ptr[chosen + 1])
    for idx in range(lo, hi):
        if q <= flat_w[idx]:
            return tab.marks[int(flat_m[idx])]
    return tab.marks[int(flat_m[hi - 1])]


class TabulatedBase(BaseKernel):
    def __init__(self, table: TabulatedKernel):
        self.table = table
        self.dimension = table.dimension
        self._a = table.base_alpha.tolist()
        self._i = table.base_init.tolist()
        self._d = table.base_decay.tolist()

    def _rates(self, t):
        out = []
        total = 0.0
        for a, i, d in zip(self._a, self._i, self._d):
            rate = a + (i - a) * math.exp(-d * t)
            out.append(rate)
            total += rate
        return out, total

    def total_rate(self, t):
        return self._rates(t)[1]

    def coordinate_rate(self, t, i):
        rates, _ = self._rates(t)
        return float(np.dot(rates, self.table.row_weight_for(i)))

    def sample_mark(self, t, draws):
        rates, total = self._rates(t)
        return _pick(draws.uniform(0), total, rates, self.table)

    def bound(self):
        return self.table.eta_hat


class TabulatedExcitation(ExcitationKernel):
    def __init__(self, table: TabulatedKernel):
        self.table = table
        self.dimension = table.dimension
        self._imp = table.impact.tolist()
        self._kind = table.kind.tolist()
        self._p1 = table.par1.tolist()
        self._p2 = table.par2.tolist()
        self._coord_w = {}

    def _rates(self, t, s, x):
        if t <= s:
            return None, 0.0
        u = t - s
        k = self.table.index[x]
        out = []
        total = 0.0
        for r in range(len(self._imp)):
            g = self._imp[r][k]
            if g == 0.0:
                out.append(0.0)
                continue
            if self._kind[r][k] == EXP:
                rate = g * math.exp(-self._p1[r][k] * u)
            else:
                rate = g / (u + self._p1[r][k]) ** self._p2[r][k]
            out.append(rate)
            total += rate
        return out, total

    def total_rate(self, t, s, x):
        return self._rates(t, s, x)[1]

    def coordinate_rate(self, t, s, x, i):
        rates, total = self._rates(t, s, x)
        if rates is None:
            return 0.0
        w = self._coord_w.get(i)
        if w is None:
            w = self._coord_w[i] = self.table.row_weight_for(i)
        return float(np.dot(rates, w))

    def sample_mark(self, t, s, x, draws):
        rates, total = self._rates(t, s, x)
        return _pick(draws.uniform(0), total, rates, self.table)

    def bound(self, s, x):
        return float(self.table.fhat[self.table.index[x]])


@dataclass(frozen=True)
class KernelSpec:
    """A complete kernel: dimension, base part and excitation part.

    ``flavors`` names each coordinate's mark space: ``"label"`` (finite
    labels) or ``"real"`` (scalars).  ``table`` is set for kernels with a
    tabulated form; ``markov`` holds the exponential-model parameters when
    the kernel is the bivariate exponential one.  ``meta`` carries builder
    diagnostics such as a branching ratio.
    """

    dimension: int
    base: BaseKernel
    excitation: ExcitationKernel
    flavors: tuple = ()
    table: Optional[TabulatedKernel] = None
    markov: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        flavors = tuple(self.flavors) or ("label",) * self.dimension
        if len(flavors) != self.dimension:
            raise ValueError("one mark flavor per coordinate")
        if any(f not in ("label", "real") for f in flavors):
            raise ValueError(f"unknown mark flavor in {flavors}")
        object.__setattr__(self, "flavors", flavors)
        if self.base.dimension != self.dimension or self.excitation.dimension != self.dimension:
            raise ValueError("base and excitation must share the spec's dimension")

    @classmethod
    def from_table(cls, table: TabulatedKernel, **kw) -> "KernelSpec":
        return cls(table.dimension, TabulatedBase(table), TabulatedExcitation(table),
                   table=table, **kw)


def _history(history):
    return history.events if isinstance(history, Path) else history


def kappa_total(spec: KernelSpec, t: float, history=()) -> float:
    """kappa(t, E) over the open interval (0, t): events at s >= t are ignored."""
    total = spec.base.total_rate(t)
    exc = spec.excitation
    for ev in _history(history):
        if ev.time < t:
            total += exc.total_rate(t, ev.time, ev.mark)
    return total


def coordinate_intensity(spec: KernelSpec, t: float, i: int, history=()) -> float:
    """kappa(t, A^i): intensity of the i-th coordinate process."""
    if not isinstance(i, int) or not 1 <= i <= spec.dimension:
        raise IndexError(f"coordinate index {i!r} outside 1..{spec.dimension}")
    total = spec.base.coordinate_rate(t, i)
    exc = spec.excitation
    for ev in _history(history):
        if ev.time < t:
            total += exc.coordinate_rate(t, ev.time, ev.mark, i)
    return total


def eta_bound(spec: KernelSpec) -> float:
    return spec.base.bound()


def f_bound(spec: KernelSpec, s: float, parent_mark: Mark) -> float:
    return spec.excitation.bound(s, parent_mark)


@dataclass
class BoundViolation:
    component: str
    t: float
    s: Optional[float]
    mark: Optional[Mark]
    rate: float
    bound: float


@dataclass
class BoundReport:
    violations: list
    n_checked: int

    @property
    def ok(self) -> bool:
        return not self.violations


def _parent_marks(spec: KernelSpec, horizon: float, n: int, seed: int):
    if spec.table is not None:
        return list(spec.table.marks)
    stream = RngStream(seed, (0x424F554E, 0))
    found = []
    for k in range(n):
        t = horizon * stream.uniform(2 * k)
        if spec.base.total_rate(t) <= 0:
            continue
        m = spec.base.sample_mark(t, MarkDraws(stream, 2 * k + 1))
        found.append(m)
        # one generation of offspring marks so feedback-only marks are covered
        if spec.excitation.total_rate(t + 1e-3, t, m) > 0:
            found.append(spec.excitation.sample_mark(
                t + 1e-3, t, m, MarkDraws(stream.child(7), k)))
    return found


def validate_bounds(spec: KernelSpec, grid_resolution: int = 1000, horizon: float = 10.0,
                    n_parents: int = 20, n_starts: int = 10, seed: int = 0) -> BoundReport:
    """Check the declared dominating constants on a time grid.

    Base rates are sampled on ``grid_resolution`` points of [0, horizon].
    For parent marks (every mark of a tabulated kernel, or ``n_parents``
    sampled ones) and ``n_starts`` parent times s, excitation rates are
    sampled on a grid of (s, horizon] that includes a point just after s.
    """
    if grid_resolution < 1:
        raise ValueError("grid_resolution must be positive")
    violations = []
    checked = 0
    eta_hat = spec.base.bound()
    for t in np.linspace(0.0, horizon, grid_resolution):
        rate = spec.base.total_rate(float(t))
        checked += 1
        if rate > eta_hat:
            violations.append(BoundViolation("base", float(t), None, None, rate, eta_hat))

    marks = _parent_marks(spec, horizon, n_parents, seed)
    starts = np.linspace(0.0, horizon, n_starts, endpoint=False)
    for x in marks:
        for s in starts:
            s = float(s)
            fh = spec.excitation.bound(s, x)
            ts = s + (horizon - s) * np.linspace(0.0, 1.0, grid_resolution)
            ts[0] = s + max(1e-12, 1e-12 * horizon)
            for t in ts:
                rate = spec.excitation.total_rate(float(t), s, x)
                checked += 1
                if rate > fh:
                    violations.append(BoundViolation("excitation", float(t), s, x, rate, fh))
    return BoundReport(violations, checked)
