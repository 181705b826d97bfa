"""Builders for the concrete models.

* ``classical``: univariate Hawkes, baseline ``lam`` and decay ``theta * exp(-beta u)``
  (or any user decay function).
* ``bivariate_exp``: two coordinates with common events and exponential
  decays; same parameters as :class:`gmhp.markov.ExpParams`.
* ``bivariate_gauss``: real-valued marks with Gaussian mark kernels.
* ``etas``: multi-location ETAS with discrete magnitude grids and power-law
  decay.
* ``finance``: up/down jump marks for d assets with co-jumps.

Parameter records serialise to and from JSON dicts through ``to_dict`` and
``from_dict``; unknown fields are rejected.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional, Union

import numpy as np

from .kernel import (EXP, POWER, BaseKernel, ConstantBase, ExcitationKernel, KernelSpec,
                     TabulatedKernel, ZeroExcitation)
from .marks import DELTA, Mark, Path
from .markov import REFERENCE_EXP, ExpParams


class SupercriticalWarning(UserWarning):
    pass


def _strict(cls, d, nested=None):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    kw = dict(d)
    for name, sub in (nested or {}).items():
        if name in kw:
            kw[name] = [sub.from_dict(x) for x in kw[name]]
    return cls(**kw)


# -- classical ---------------------------------------------------------------

@dataclass(frozen=True)
class ClassicalParams:
    """Baseline ``lam`` (number or callable of t) and decay ``theta * exp(-beta u)``.

    A custom decay ``w(u)`` replaces the exponential; then ``w_bound`` must
    dominate it (its value at 0+ for decreasing w) and ``w_integral`` is the
    total mass used for the branching ratio.  A callable ``lam`` needs
    ``lam_bound``.  Callables are not JSON-serialisable.
    """

    lam: Union[float, Callable] = 1.0
    theta: float = 0.5
    beta: float = 1.0
    lam_bound: Optional[float] = None
    w: Optional[Callable] = None
    w_bound: Optional[float] = None
    w_integral: Optional[float] = None

    def to_dict(self):
        if callable(self.lam) or self.w is not None:
            raise TypeError("callable parameters do not serialise")
        return {"lam": self.lam, "theta": self.theta, "beta": self.beta}

    @classmethod
    def from_dict(cls, d):
        out = _strict(cls, d)
        if callable(out.lam) or out.w is not None:
            raise ValueError("callables cannot come from JSON")
        return out


class FunctionBase(BaseKernel):
    def __init__(self, fn, bound):
        self.fn = fn
        self._bound = float(bound)
        self.dimension = 1
        self._mark = Mark((1,))

    def total_rate(self, t):
        return float(self.fn(t))

    def coordinate_rate(self, t, i):
        return self.total_rate(t)

    def sample_mark(self, t, draws):
        return self._mark

    def bound(self):
        return self._bound


class DecayExcitation(ExcitationKernel):
    """Univariate f(t, s, 1, {1}) = w(t - s)."""

    def __init__(self, w, bound):
        self.w = w
        self._bound = float(bound)
        self.dimension = 1
        self._mark = Mark((1,))

    def total_rate(self, t, s, x):
        return float(self.w(t - s)) if t > s else 0.0

    def coordinate_rate(self, t, s, x, i):
        return self.total_rate(t, s, x)

    def sample_mark(self, t, s, x, draws):
        return self._mark

    def bound(self, s, x):
        return self._bound


def build_classical(params: ClassicalParams) -> KernelSpec:
    if params.w is None:
        if not params.beta > 0:
            raise ValueError("beta must be positive")
        if params.theta < 0:
            raise ValueError("theta must be nonnegative")
        ratio = params.theta / params.beta
    else:
        if params.w_bound is None:
            raise ValueError("a custom decay w needs w_bound")
        ratio = params.w_integral if params.w_integral is not None else float("nan")
    if ratio == float("inf"):
        warnings.warn("decay function is not integrable; no-explosion guarantee lost",
                      SupercriticalWarning, stacklevel=2)
    elif ratio >= 1:
        warnings.warn(f"branching ratio {ratio:g} >= 1; rely on the generation cap",
                      SupercriticalWarning, stacklevel=2)
    meta = {"branching_ratio": ratio, "subcritical": bool(ratio < 1)}
    one = Mark((1,))

    if callable(params.lam):
        if params.lam_bound is None:
            raise ValueError("a callable baseline needs lam_bound")
        base = FunctionBase(params.lam, params.lam_bound)
    else:
        if params.lam < 0:
            raise ValueError("lam must be nonnegative")
        base = None

    if params.w is not None:
        exc = DecayExcitation(params.w, params.w_bound)
        base = base or ConstantBase([one], [params.lam])
        return KernelSpec(1, base, exc, ("label",), meta=meta)
    if base is not None:
        exc = DecayExcitation(lambda u: params.theta * math.exp(-params.beta * u), params.theta)
        return KernelSpec(1, base, exc, ("label",), meta=meta)

    lam = float(params.lam)
    table = TabulatedKernel(
        marks=(one,),
        base_alpha=[lam], base_init=[lam], base_decay=[0.0],
        row_marks=((0,),), row_weights=((1.0,),),
        impact=[[params.theta]], kind=[[EXP]], par1=[[params.beta]], par2=[[0.0]],
    )
    return KernelSpec.from_table(table, flavors=("label",), meta=meta)


# -- bivariate exponential ---------------------------------------------------

BIVARIATE_MARKS = (Mark((1, DELTA)), Mark((DELTA, 1)), Mark((1, 1)))


def build_bivariate_exp(params: ExpParams = REFERENCE_EXP) -> KernelSpec:
    """Three channels over marks (1,Δ), (Δ,1), (1,1); row i decays at beta_i."""
    th = params.theta_array
    beta = np.asarray(params.beta)
    table = TabulatedKernel(
        marks=BIVARIATE_MARKS,
        base_alpha=params.alpha, base_init=params.lambda0, base_decay=params.beta,
        row_marks=((0,), (1,), (2,)), row_weights=((1.0,),) * 3,
        impact=th, kind=np.zeros((3, 3), dtype=int),
        par1=np.repeat(beta[:, None], 3, axis=1), par2=np.zeros((3, 3)),
    )
    rho = float(max(abs(np.linalg.eigvals(th / beta[:, None]))))
    meta = {"spectral_radius": rho, "subcritical": rho < 1}
    return KernelSpec.from_table(table, flavors=("label", "label"), markov=params, meta=meta)


# -- bivariate Gaussian marks --------------------------------------------------

@dataclass(frozen=True)
class GaussParams:
    """Per-channel (1, 2, c) columns of the Gaussian-mark model.

    Base rates ``alpha`` with mark means ``mu`` and standard deviations
    ``sigma``; source-type decays ``beta``; offspring mean factors ``a``;
    self impacts ``g_ii`` and impacts on the common channel ``g_ci``.
    """

    alpha: tuple = (0.4, 0.4, 0.2)
    mu: tuple = (2.0, -2.0, 0.0)
    sigma: tuple = (0.16331, 0.16331, 0.16331)
    beta: tuple = (0.41175, 0.41175, 0.81175)
    a: tuple = (0.9, 0.9, 1.1)
    g_ii: tuple = (0.3, 0.3, 0.4)
    g_ci: tuple = (0.1, 0.1, 0.4)

    def __post_init__(self):
        for f in fields(self):
            v = tuple(float(x) for x in getattr(self, f.name))
            if len(v) != 3:
                raise ValueError(f"{f.name} needs three entries (1, 2, c)")
            object.__setattr__(self, f.name, v)
        if any(s <= 0 for s in self.sigma):
            raise ValueError("sigma must be positive")
        if any(b <= 0 for b in self.beta):
            raise ValueError("beta must be positive")
        if any(v < 0 for v in self.alpha + self.g_ii + self.g_ci):
            raise ValueError("rates and impacts must be nonnegative")

    def impact_matrix(self):
        """g[target][source] with rows and columns ordered 1, 2, c."""
        g = np.zeros((3, 3))
        g[0, 0] = self.g_ii[0]
        g[1, 1] = self.g_ii[1]
        g[2, 0] = self.g_ci[0]
        g[2, 1] = self.g_ci[1]
        g[2, 2] = self.g_ii[2]
        return g

    def to_dict(self):
        return {k: list(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return _strict(cls, d)


def _source(x):
    if x[0] is not DELTA and x[1] is not DELTA:
        return 2
    return 0 if x[0] is not DELTA else 1


class GaussBase(BaseKernel):
    def __init__(self, p: GaussParams):
        self.p = p
        self.dimension = 2
        self._total = sum(p.alpha)

    def total_rate(self, t):
        return self._total

    def coordinate_rate(self, t, i):
        return self.p.alpha[i - 1] + self.p.alpha[2]

    def sample_mark(self, t, draws):
        p = self.p
        target = draws.uniform(0) * self._total
        if target <= p.alpha[0]:
            return Mark((draws.normal(1, p.mu[0], p.sigma[0]), DELTA))
        if target <= p.alpha[0] + p.alpha[1]:
            return Mark((DELTA, draws.normal(1, p.mu[1], p.sigma[1])))
        return Mark((draws.normal(1, p.mu[2], p.sigma[2]), draws.normal(2, p.mu[2], p.sigma[2])))

    def bound(self):
        return self._total


class GaussExcitation(ExcitationKernel):
    """Decay depends on the parent's channel; marks are Gaussian around a * parent."""

    def __init__(self, p: GaussParams):
        self.p = p
        self.g = p.impact_matrix()
        self.colsum = self.g.sum(axis=0)
        self.dimension = 2

    def total_rate(self, t, s, x):
        if t <= s:
            return 0.0
        j = _source(x)
        return float(self.colsum[j] * math.exp(-self.p.beta[j] * (t - s)))

    def coordinate_rate(self, t, s, x, i):
        if t <= s:
            return 0.0
        j = _source(x)
        return float((self.g[i - 1, j] + self.g[2, j]) * math.exp(-self.p.beta[j] * (t - s)))

    def sample_mark(self, t, s, x, draws):
        p = self.p
        j = _source(x)
        col = self.g[:, j]
        target = draws.uniform(0) * self.colsum[j]
        x1 = x[0] if x[0] is not DELTA else None
        x2 = x[1] if x[1] is not DELTA else None
        if target <= col[0]:
            m = p.a[0] * x1 if j == 0 else 0.0
            return Mark((draws.normal(1, m, p.sigma[0]), DELTA))
        if target <= col[0] + col[1]:
            m = p.a[1] * x2 if j == 1 else 0.0
            return Mark((DELTA, draws.normal(1, m, p.sigma[1])))
        m1 = p.a[2] * x1 if x1 is not None else 0.0
        m2 = p.a[2] * x2 if x2 is not None else 0.0
        return Mark((draws.normal(1, m1, p.sigma[2]), draws.normal(2, m2, p.sigma[2])))

    def bound(self, s, x):
        return float(self.colsum[_source(x)])


def build_bivariate_gauss(params: GaussParams = GaussParams()) -> KernelSpec:
    return KernelSpec(2, GaussBase(params), GaussExcitation(params), ("real", "real"),
                      meta={"params": params})


# -- ETAS ----------------------------------------------------------------------

@dataclass(frozen=True)
class EtasLocation:
    """One seismic location: background ``mu``, self-excitation terms
    ``K0 * exp(alpha (x - cutoff)) / (u + c) ** p`` and its magnitude grid."""

    mu: float = 0.2
    K0: float = 0.05
    alpha: float = 0.5
    c: float = 0.1
    p: float = 1.2
    cutoff: float = 3.0
    magnitudes: tuple = (3.0, 3.5, 4.0)
    weights: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "magnitudes", tuple(float(m) for m in self.magnitudes))
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
            if len(self.weights) != len(self.magnitudes):
                raise ValueError("one weight per magnitude")
        if not self.magnitudes:
            raise ValueError("magnitude grid must be nonempty")
        if self.c <= 0 or self.p <= 0:
            raise ValueError("ETAS needs c > 0 and p > 0")
        if self.mu < 0 or self.K0 < 0:
            raise ValueError("rates must be nonnegative")

    @property
    def mag_weights(self):
        w = np.ones(len(self.magnitudes)) if self.weights is None else np.asarray(self.weights)
        return w / w.sum()

    @classmethod
    def from_dict(cls, d):
        return _strict(cls, d)


@dataclass(frozen=True)
class EtasCross:
    """Excitation of ``target`` by ``source``; each is a 1-based location or "c"."""

    target: Union[int, str]
    source: Union[int, str]
    K0: float
    alpha: float = 0.0
    c: float = 0.1
    p: float = 1.2

    def __post_init__(self):
        if self.c <= 0 or self.p <= 0:
            raise ValueError("ETAS needs c > 0 and p > 0")
        if self.K0 < 0:
            raise ValueError("K0 must be nonnegative")

    @classmethod
    def from_dict(cls, d):
        return _strict(cls, d)


@dataclass(frozen=True)
class EtasParams:
    locations: tuple = (EtasLocation(), EtasLocation())
    cross: tuple = (EtasCross(1, 2, 0.01), EtasCross(2, 1, 0.01),
                    EtasCross("c", 1, 0.005), EtasCross("c", 2, 0.005),
                    EtasCross(1, "c", 0.02), EtasCross(2, "c", 0.02),
                    EtasCross("c", "c", 0.02))
    common_mu: float = 0.02

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "cross", tuple(self.cross))
        if not self.locations:
            raise ValueError("need at least one location")
        d = len(self.locations)
        for cr in self.cross:
            for end in (cr.target, cr.source):
                if end != "c" and not (isinstance(end, int) and 1 <= end <= d):
                    raise ValueError(f"cross term endpoint {end!r} is not a location or 'c'")
        if self.common_mu < 0:
            raise ValueError("common_mu must be nonnegative")

    def to_dict(self):
        return {"locations": [asdict(l) for l in self.locations],
                "cross": [asdict(c) for c in self.cross],
                "common_mu": self.common_mu}

    @classmethod
    def from_dict(cls, d):
        return _strict(cls, d, {"locations": EtasLocation, "cross": EtasCross})


def build_etas(params: EtasParams = EtasParams()) -> KernelSpec:
    """Tabulated ETAS kernel over magnitude marks.

    Rows: one per location (idiosyncratic shocks) plus, when the common
    channel is used, one row of joint shocks over the product grid.  Target
    magnitudes follow each location's weights (uniform by default).
    """
    locs = params.locations
    d = len(locs)
    uses_common = params.common_mu > 0 or any(cr.target == "c" for cr in params.cross)
    marks, row_marks, row_w = [], [], []
    for i, loc in enumerate(locs):
        ids = []
        for m in loc.magnitudes:
            coords = [DELTA] * d
            coords[i] = m
            ids.append(len(marks))
            marks.append(Mark(coords))
        row_marks.append(tuple(ids))
        row_w.append(tuple(loc.mag_weights))
    if uses_common:
        if d < 2:
            raise ValueError("common shocks need at least two locations")
        ids, ws = [], []
        grids = [list(zip(l.magnitudes, l.mag_weights)) for l in locs]
        for combo in itertools.product(*grids):
            ids.append(len(marks))
            marks.append(Mark([m for m, _ in combo]))
            ws.append(float(np.prod([w for _, w in combo])))
        row_marks.append(tuple(ids))
        row_w.append(tuple(ws))
    R, M = len(row_marks), len(marks)
    crow = d  # index of the common row

    terms = {}   # (target row, source key) -> (K0, alpha, c, p)
    for i, loc in enumerate(locs):
        terms[(i, i)] = (loc.K0, loc.alpha, loc.c, loc.p)
    for cr in params.cross:
        tr = crow if cr.target == "c" else cr.target - 1
        if tr >= R:
            raise ValueError("cross term targets the common row but it is absent")
        sk = "c" if cr.source == "c" else cr.source - 1
        terms[(tr, sk)] = (cr.K0, cr.alpha, cr.c, cr.p)

    impact = np.zeros((R, M))
    par1 = np.ones((R, M))
    par2 = np.ones((R, M))
    for x, mk in enumerate(marks):
        sup = [k for k in range(d) if mk[k] is not DELTA]
        src = "c" if len(sup) > 1 else sup[0]
        excess = sum(mk[k] - locs[k].cutoff for k in sup)
        for r in range(R):
            if (r, src) not in terms:
                continue
            K0, a, c, p = terms[(r, src)]
            impact[r, x] = K0 * math.exp(a * excess)
            par1[r, x] = c
            par2[r, x] = p
    base = [loc.mu for loc in locs] + ([params.common_mu] if uses_common else [])
    table = TabulatedKernel(
        marks=tuple(marks), base_alpha=base, base_init=base, base_decay=[0.0] * R,
        row_marks=tuple(row_marks), row_weights=tuple(row_w),
        impact=impact, kind=np.full((R, M), POWER), par1=par1, par2=par2,
    )
    return KernelSpec.from_table(table, flavors=("real",) * d, meta={"params": params})


# -- finance co-jumps ----------------------------------------------------------

def _parse_cojump_mark(key: str, d: int) -> Mark:
    """``"1010"``-style key: '1' is a jump in that coordinate, '0' is Δ."""
    if len(key) != 2 * d or set(key) - {"0", "1"}:
        raise ValueError(f"mark key {key!r} must be {2 * d} characters of 0/1")
    return Mark([1 if ch == "1" else DELTA for ch in key])


def cojump_key(mark: Mark) -> str:
    return "".join("0" if c is DELTA else "1" for c in mark)


@dataclass(frozen=True)
class FinancePhi:
    """phi_{target, source}(u) = alpha * exp(-beta u)."""

    target: str
    source: str
    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha < 0 or self.beta <= 0:
            raise ValueError("phi needs alpha >= 0 and beta > 0")

    @classmethod
    def from_dict(cls, d):
        return _strict(cls, d)


@dataclass(frozen=True)
class FinanceParams:
    """``d`` assets, coordinates (up_1, down_1, ..., up_d, down_d).

    ``mu`` maps mark keys such as ``"1000"`` (asset 1 up) or ``"1010"`` (both
    assets up together) to baseline rates.
    """

    d: int = 2
    mu: dict = field(default_factory=lambda: {
        "1000": 0.5, "0100": 0.5, "0010": 0.5, "0001": 0.5, "1010": 0.1, "0101": 0.1})
    phi: tuple = (
        FinancePhi("1000", "1000", 0.2, 2.0), FinancePhi("0100", "0100", 0.2, 2.0),
        FinancePhi("0010", "0010", 0.2, 2.0), FinancePhi("0001", "0001", 0.2, 2.0),
        FinancePhi("0100", "1000", 0.3, 2.0), FinancePhi("1000", "0100", 0.3, 2.0),
        FinancePhi("0001", "0010", 0.3, 2.0), FinancePhi("0010", "0001", 0.3, 2.0),
        FinancePhi("1010", "1010", 0.5, 4.0), FinancePhi("0101", "0101", 0.5, 4.0),
        FinancePhi("1000", "1010", 0.2, 2.0), FinancePhi("0010", "1010", 0.2, 2.0),
        FinancePhi("0100", "0101", 0.2, 2.0), FinancePhi("0001", "0101", 0.2, 2.0),
    )

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("d must be a positive integer")
        object.__setattr__(self, "phi", tuple(self.phi))
        for k, v in self.mu.items():
            _parse_cojump_mark(k, self.d)
            if v < 0:
                raise ValueError("mu must be nonnegative")
        for ph in self.phi:
            _parse_cojump_mark(ph.target, self.d)
            _parse_cojump_mark(ph.source, self.d)

    def to_dict(self):
        return {"d": self.d, "mu": dict(self.mu), "phi": [asdict(p) for p in self.phi]}

    @classmethod
    def from_dict(cls, d):
        return _strict(cls, d, {"phi": FinancePhi})


def build_finance_cojump(params: FinanceParams = FinanceParams()) -> KernelSpec:
    """Tabulated kernel with one row per mark that can occur.

    Marks that are neither baseline nor target of any phi can never occur
    and are left out of the mark list.
    """
    d2 = 2 * params.d
    keys = [k for k, v in params.mu.items() if v > 0]
    for ph in params.phi:
        if ph.alpha > 0 and ph.target not in keys:
            keys.append(ph.target)
    if not keys:
        raise ValueError("model has no reachable marks")
    keys.sort(key=lambda k: (k.count("1"), k[::-1]))
    idx = {k: n for n, k in enumerate(keys)}
    marks = tuple(_parse_cojump_mark(k, params.d) for k in keys)
    M = len(keys)
    impact = np.zeros((M, M))
    par1 = np.ones((M, M))
    for ph in params.phi:
        if ph.alpha == 0 or ph.source not in idx:
            continue
        impact[idx[ph.target], idx[ph.source]] = ph.alpha
        par1[idx[ph.target], idx[ph.source]] = ph.beta
    base = [params.mu.get(k, 0.0) for k in keys]
    table = TabulatedKernel(
        marks=marks, base_alpha=base, base_init=base, base_decay=[0.0] * M,
        row_marks=tuple((k,) for k in range(M)), row_weights=((1.0,),) * M,
        impact=impact, kind=np.zeros((M, M), dtype=int), par1=par1, par2=np.zeros((M, M)),
    )
    return KernelSpec.from_table(table, flavors=("label",) * d2, meta={"params": params})


def price_paths(path: Path, d: int):
    """Signed counting prices S^i = N^{2i-1} - N^{2i} after each event.

    Returns ``(times, prices)`` with ``prices`` of shape (n_events, d).
    """
    if path.dimension != 2 * d:
        raise ValueError("path dimension must be 2 d")
    times = np.array([e.time for e in path.events])
    inc = np.zeros((len(path.events), d), dtype=np.int64)
    for n, e in enumerate(path.events):
        for i in range(d):
            up = e.mark[2 * i] is not DELTA
            down = e.mark[2 * i + 1] is not DELTA
            inc[n, i] = int(up) - int(down)
    return times, np.cumsum(inc, axis=0)


# -- registry --------------------------------------------------------------------

PRESETS = {
    "classical": (ClassicalParams, build_classical),
    "bivariate_exp": (ExpParams, build_bivariate_exp),
    "bivariate_gauss": (GaussParams, build_bivariate_gauss),
    "etas": (EtasParams, build_etas),
    "finance": (FinanceParams, build_finance_cojump),
}


def build(name: str, params: dict = None) -> KernelSpec:
    """Build a preset from its JSON parameter dict (defaults when omitted)."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cls, builder = PRESETS[name]
    if params is None:
        obj = REFERENCE_EXP if cls is ExpParams else cls()
    else:
        obj = cls.from_dict(params)
    return builder(obj)


def default_params(name: str):
    cls, _ = PRESETS[name]
    return REFERENCE_EXP if cls is ExpParams else cls()
