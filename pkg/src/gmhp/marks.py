"""Product mark space with dummy entries, events, paths and count tables.

Coordinates are numbered ``1..d`` throughout the public API, matching the
usual way the coordinates N^1, ..., N^d of a multivariate process are written.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple, Optional, Sequence


class _Dummy:
    """The dummy mark: "no event in this coordinate"."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Δ"

    def __reduce__(self):
        return (_Dummy, ())


DELTA = _Dummy()


def is_dummy(value) -> bool:
    return value is DELTA


class Mark(tuple):
    """A d-tuple of coordinate marks, some of which may be ``DELTA``.

    The all-dummy tuple is not a mark and is rejected.
    """

    __slots__ = ()

    def __new__(cls, coords):
        self = super().__new__(cls, coords)
        if len(self) == 0:
            raise ValueError("a mark needs at least one coordinate")
        for c in self:
            if c is not DELTA:
                return self
        raise ValueError("the all-dummy point (Δ, ..., Δ) is not a mark")

    @property
    def dimension(self) -> int:
        return len(self)

    def support(self) -> tuple:
        """1-based coordinates that carry a real mark."""
        return tuple(i + 1 for i, c in enumerate(self) if c is not DELTA)

    def touches(self, i: int) -> bool:
        return self[i - 1] is not DELTA

    def __repr__(self):
        return "Mark(" + ", ".join(repr(c) for c in self) + ")"


class Event(NamedTuple):
    time: float
    mark: Mark
    generation: Optional[int] = None


def _check_index(i, d):
    if not isinstance(i, int) or isinstance(i, bool) or not 1 <= i <= d:
        raise IndexError(f"coordinate index {i!r} outside 1..{d}")


@dataclass(frozen=True)
class Path:
    """Time-ordered events on (0, horizon].

    ``truncated`` is set when the generation cap was reached with a nonempty
    last generation; ``ties`` when two events share a time exactly.
    """

    events: tuple
    horizon: float
    dimension: int
    truncated: bool = False
    ties: bool = False
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.check:
            return
        last = 0.0
        for ev in self.events:
            t = ev.time
            if not (0.0 < t <= self.horizon):
                raise ValueError(f"event time {t!r} outside (0, {self.horizon}]")
            if t < last or (t == last and not self.ties):
                raise ValueError("event times must be strictly increasing")
            last = t
            if not isinstance(ev.mark, Mark) or len(ev.mark) != self.dimension:
                raise ValueError(f"invalid mark {ev.mark!r} for dimension {self.dimension}")

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def times(self):
        return [ev.time for ev in self.events]


def project_coordinate(mark: Mark, i: int):
    """The i-th coordinate of ``mark`` (1-based); ``DELTA`` if untouched."""
    _check_index(i, len(mark))
    return mark[i - 1]


def is_common_event(mark: Mark) -> bool:
    n = 0
    for c in mark:
        if c is not DELTA:
            n += 1
            if n >= 2:
                return True
    return False


def coordinate_path(path: Path, i: int) -> Path:
    """Events touching coordinate ``i`` as a one-dimensional path."""
    _check_index(i, path.dimension)
    k = i - 1
    events = tuple(Event(ev.time, Mark((ev.mark[k],)), ev.generation)
                   for ev in path.events if ev.mark[k] is not DELTA)
    return Path(events, path.horizon, 1, truncated=path.truncated,
                ties=path.ties, check=False)


@dataclass(frozen=True)
class CountTable:
    """Counts at one time.

    ``coordinate[i]`` is N^i(t); ``idio[I]`` counts events touching exactly
    the coordinate set ``I`` (a sorted tuple); ``common`` counts events
    touching two or more coordinates.
    """

    t: float
    coordinate: dict
    idio: dict
    common: int
    total: int


def count_decomposition(path: Path, t: float) -> CountTable:
    if not 0.0 <= t <= path.horizon:
        raise ValueError(f"t={t!r} outside [0, {path.horizon}]")
    d = path.dimension
    idio = {}
    for size in range(1, d + 1):
        for subset in combinations(range(1, d + 1), size):
            idio[subset] = 0
    coord = {i: 0 for i in range(1, d + 1)}
    common = 0
    total = 0
    for ev in path.events:
        if ev.time > t:
            break
        sup = ev.mark.support()
        idio[sup] += 1
        for i in sup:
            coord[i] += 1
        if len(sup) >= 2:
            common += 1
        total += 1
    return CountTable(t, coord, idio, common, total)


def label_marks(d: int, labels: Sequence = (1,)) -> list:
    """Every mark over finite label sets, idiosyncratic ones first.

    For ``d=2`` and labels ``(1,)`` this is ``[(1,Δ), (Δ,1), (1,1)]``.
    """
    out = []
    for size in range(1, d + 1):
        for subset in combinations(range(d), size):
            for combo in _product(labels, size):
                coords = [DELTA] * d
                for pos, lab in zip(subset, combo):
                    coords[pos] = lab
                out.append(Mark(coords))
    return out


def _product(labels, n):
    if n == 0:
        yield ()
        return
    for head in labels:
        for tail in _product(labels, n - 1):
            yield (head,) + tail
