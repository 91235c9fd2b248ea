import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sleepytob import _kernels_py as pure
from sleepytob import kernels

compiled = kernels.compiled()
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def plain(rows):
    return [list(r) for r in rows]


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
    if compiled is not None and not os.environ.get("SLEEPYTOB_PURE"):
        assert kernels.BACKEND == "cython"


def test_last_asleep_example():
    rows = pure.last_asleep([bytearray([1, 0, 1, 1, 0, 1])])
    assert plain(rows) == [[-1, 1, 1, 1, 4, 4]]


def test_window_counts_example():
    # validator 0 always awake and honest; 1 asleep at tick 2; 2 corrupted from tick 3
    awake = [bytearray([1] * 6), bytearray([1, 1, 0, 1, 1, 1]), bytearray([1] * 6)]
    last = pure.last_asleep(awake)
    h, f = pure.window_counts(last, [1 << 62, 1 << 62, 3], 1, 1, 0, 6)
    # h[t]: awake on [t-1, t] and honest past t+1
    assert h == [3, 3, 1, 1, 2, 2]
    assert f == [0, 0, 0, 1, 1, 1]


def test_prefix_support_example():
    counts = pure.prefix_support([(0, 1, 2), (0, 1), (0, 3)], [2, 1, 4])
    assert counts == {0: 7, 1: 3, 2: 2, 3: 4}


awake_rows = st.integers(1, 6).flatmap(
    lambda n: st.integers(1, 40).flatmap(
        lambda w: st.lists(st.binary(min_size=w, max_size=w).map(lambda b: bytearray(x & 1 for x in b)),
                           min_size=n, max_size=n)))


@needs_compiled
@settings(max_examples=200)
@given(awake_rows)
def test_last_asleep_backends_agree(rows):
    assert plain(compiled.last_asleep(rows)) == plain(pure.last_asleep(rows))


@needs_compiled
@settings(max_examples=200)
@given(awake_rows, st.data())
def test_window_counts_backends_agree(rows, data):
    n, width = len(rows), len(rows[0])
    corrupt_at = data.draw(st.lists(st.one_of(st.integers(0, width + 5), st.just(1 << 62)),
                                    min_size=n, max_size=n))
    t_s, t_c, t_b = (data.draw(st.integers(0, 8)) for _ in range(3))
    horizon = data.draw(st.integers(0, width + 3))
    expect = pure.window_counts(pure.last_asleep(rows), corrupt_at, t_s, t_c, t_b, horizon)
    # the compiled version must accept either backend's rows
    assert compiled.window_counts(compiled.last_asleep(rows), corrupt_at, t_s, t_c, t_b, horizon) == expect
    assert compiled.window_counts(pure.last_asleep(rows), corrupt_at, t_s, t_c, t_b, horizon) == expect


@needs_compiled
@given(st.lists(st.tuples(st.lists(st.integers(1, 9), max_size=6), st.integers(1, 5)), max_size=10))
def test_prefix_support_backends_agree(items):
    paths = [tuple([0] + p) for p, _ in items]
    weights = [w for _, w in items]
    assert compiled.prefix_support(paths, weights) == pure.prefix_support(paths, weights)
