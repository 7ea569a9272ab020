import math

import numpy as np
from hypothesis import given, strategies as st

from varexp._util import ordered_map, pairwise_sum, resolve_workers


@given(st.lists(st.floats(-1e6, 1e6), max_size=200))
def test_pairwise_sum_close_to_exact(values):
    assert abs(pairwise_sum(values) - math.fsum(values)) <= 1e-9 * (1 + sum(map(abs, values)))


def test_pairwise_sum_empty_and_axis():
    assert pairwise_sum([]) == 0.0
    a = np.arange(12.0).reshape(3, 4)
    np.testing.assert_array_equal(pairwise_sum(a, axis=1), a.sum(axis=1))


def test_ordered_map_keeps_order():
    assert ordered_map(lambda v: v * v, range(50), workers=8) == [v * v for v in range(50)]


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv("VAREXP_THREADS", "3")
    assert resolve_workers() == 3
    monkeypatch.setenv("VAREXP_THREADS", "0")
    assert resolve_workers() >= 1
    assert resolve_workers(2) == 2
