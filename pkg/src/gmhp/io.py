"""Event CSV files.

Columns are ``t, gen, x_1, ..., x_d``, optionally preceded by ``path_id``.
A dummy entry is the empty field, label marks are written as text and real
marks (and times) in ``.16e`` notation.  Rows are time-ascending per path.
"""
from __future__ import annotations

import csv
from collections import defaultdict

from .marks import DELTA, Event, Mark, Path


def _fmt_coord(c, flavor):
    if c is DELTA:
        return ""
    if flavor == "real":
        return format(float(c), ".16e")
    return str(c)


def _parse_coord(text, flavor):
    if text == "":
        return DELTA
    if flavor == "real":
        return float(text)
    try:
        return int(text)
    except ValueError:
        return text


def header(d: int, with_path_id: bool):
    cols = ["t", "gen"] + [f"x_{i}" for i in range(1, d + 1)]
    return (["path_id"] + cols) if with_path_id else cols


def write_events(fh, paths, flavors, with_path_id: bool = True):
    """Write one or more paths; ``paths`` is a Path or a sequence of them."""
    if isinstance(paths, Path):
        paths = [paths]
    d = len(flavors)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header(d, with_path_id))
    for j, path in enumerate(paths):
        if path.dimension != d:
            raise ValueError("path dimension does not match the flavors")
        for e in path.events:
            row = [format(e.time, ".16e"), "" if e.generation is None else str(e.generation)]
            row += [_fmt_coord(c, f) for c, f in zip(e.mark, flavors)]
            w.writerow([str(j)] + row if with_path_id else row)


def read_events(fh, flavors, horizon: float, n_paths: int = None):
    """Read back a file written by :func:`write_events` as a list of Paths.

    Empty paths leave no rows, so pass ``n_paths`` to recover trailing ones.
    """
    r = csv.reader(fh)
    head = next(r, None)
    d = len(flavors)
    if head is None:
        raise ValueError("empty event file")
    with_id = head[:1] == ["path_id"]
    if head != header(d, with_id):
        raise ValueError(f"unexpected header {head}")
    groups = defaultdict(list)
    for row in r:
        if with_id:
            pid, row = int(row[0]), row[1:]
        else:
            pid = 0
        gen = int(row[1]) if row[1] else None
        mark = Mark([_parse_coord(x, f) for x, f in zip(row[2:], flavors)])
        groups[pid].append(Event(float(row[0]), mark, gen))
    n = max(groups, default=-1) + 1 if with_id else 1
    if n_paths is not None:
        if n_paths < n:
            raise ValueError(f"file holds {n} paths, more than n_paths={n_paths}")
        n = n_paths
    out = []
    for j in range(n):
        evs = tuple(groups.get(j, ()))
        ties = any(a.time == b.time for a, b in zip(evs, evs[1:]))
        out.append(Path(evs, horizon, d, ties=ties))
    return out
