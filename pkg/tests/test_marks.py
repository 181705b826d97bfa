import pytest
from hypothesis import given, strategies as st

from gmhp.marks import (DELTA, Event, Mark, Path, coordinate_path, count_decomposition,
                        is_common_event, label_marks, project_coordinate)


def example_path():
    return Path((Event(0.3, Mark((1, DELTA))), Event(0.7, Mark((DELTA, 1))),
                 Event(0.9, Mark((1, 1)))), 1.0, 2)


def test_projection():
    assert project_coordinate(Mark((1, DELTA)), 2) is DELTA
    assert project_coordinate(Mark((1, 1)), 1) == 1
    assert project_coordinate(Mark((DELTA, -2.0)), 2) == -2.0
    with pytest.raises(IndexError):
        project_coordinate(Mark((1, 1)), 3)
    with pytest.raises(IndexError):
        project_coordinate(Mark((1, 1)), 0)


def test_dummy_is_distinct_from_labels():
    for v in (0, 1, -2.0, "", None, "Δ"):
        assert DELTA != v
    assert repr(DELTA) == "Δ"


def test_common_event_and_all_dummy_rejected():
    assert is_common_event(Mark((1, 1)))
    assert not is_common_event(Mark((1, DELTA)))
    with pytest.raises(ValueError):
        Mark((DELTA, DELTA))


def test_coordinate_path():
    p = example_path()
    c1 = coordinate_path(p, 1)
    assert [(e.time, e.mark) for e in c1.events] == [(0.3, Mark((1,))), (0.9, Mark((1,)))]
    assert c1.dimension == 1
    assert len(coordinate_path(Path((), 1.0, 2), 1)) == 0
    one = Path((Event(0.5, Mark((1, 1))),), 1.0, 2)
    assert [(e.time, e.mark[0]) for e in coordinate_path(one, 2).events] == [(0.5, 1)]


def test_count_decomposition_examples():
    p = example_path()
    c = count_decomposition(p, 1.0)
    assert c.coordinate == {1: 2, 2: 2}
    assert c.idio[(1,)] == 1 and c.idio[(2,)] == 1 and c.idio[(1, 2)] == 1
    assert c.common == 1
    z = count_decomposition(p, 0.0)
    assert z.total == 0 and z.coordinate == {1: 0, 2: 0} and z.common == 0
    h = count_decomposition(p, 0.5)
    assert h.coordinate == {1: 1, 2: 0} and h.common == 0
    with pytest.raises(ValueError):
        count_decomposition(p, 1.5)
    with pytest.raises(ValueError):
        count_decomposition(p, -0.1)


def test_path_validation():
    m = Mark((1,))
    with pytest.raises(ValueError):
        Path((Event(0.0, m),), 1.0, 1)
    with pytest.raises(ValueError):
        Path((Event(1.5, m),), 1.0, 1)
    with pytest.raises(ValueError):
        Path((Event(0.5, m), Event(0.4, m)), 1.0, 1)
    with pytest.raises(ValueError):
        Path((Event(0.5, m), Event(0.5, m)), 1.0, 1)
    Path((Event(0.5, m), Event(0.5, m)), 1.0, 1, ties=True)
    with pytest.raises(ValueError):
        Path((Event(0.5, Mark((1, 1))),), 1.0, 1)


def test_label_marks_order():
    assert label_marks(2) == [Mark((1, DELTA)), Mark((DELTA, 1)), Mark((1, 1))]


coord = st.one_of(st.just(DELTA), st.sampled_from([1, 2]))


@st.composite
def paths(draw, d=3):
    marks = draw(st.lists(st.tuples(*[coord] * d).filter(lambda c: any(x is not DELTA for x in c)),
                          max_size=30))
    times = sorted(draw(st.lists(st.floats(0.001, 10.0), min_size=len(marks),
                                 max_size=len(marks), unique=True)))
    return Path(tuple(Event(t, Mark(m)) for t, m in zip(times, marks)), 10.0, d)


@given(paths(), st.floats(0.0, 10.0))
def test_decomposition_identity(p, t):
    c = count_decomposition(p, t)
    for i in range(1, 4):
        assert c.coordinate[i] == sum(n for I, n in c.idio.items() if i in I)


@given(paths(), st.integers(1, 3))
def test_coordinate_path_is_ordered_filter(p, i):
    q = coordinate_path(p, i)
    kept = [e.time for e in p.events if e.mark[i - 1] is not DELTA]
    assert [e.time for e in q.events] == kept
    assert len(q) <= len(p)
