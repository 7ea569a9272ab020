import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from varexp.exponent import (LogHolderGrid, check_counterexample_conditions, check_log_holder,
                             counterexample_exponent, counterexample_profile, exponent_from_spec,
                             jump_exponent, lipschitz_distance_exponent, make_constant_exponent,
                             make_radial_exponent, sine_exponent, smoothstep)
from varexp.fields import Domain


def test_constant_exponent():
    p = make_constant_exponent(2, 1)
    assert p.p_minus == p.p_plus == 2
    assert p.trace(np.array([[0.3]]))[0] == 2
    assert make_constant_exponent(3.7, 2).p_minus == 3.7
    for bad in (1, 0.5, math.inf):
        with pytest.raises(ValueError):
            make_constant_exponent(bad, 1)


def test_radial_exponent_constant_profile_equals_constant():
    p = make_radial_exponent(lambda r: np.full(np.shape(r), 2.0), 2)
    q = make_constant_exponent(2, 2)
    x, y = np.random.default_rng(0).normal(size=(2, 50, 2))
    np.testing.assert_array_equal(p(x, y), q(x, y))
    assert p.kind == "constant"


def test_radial_exponent_rejects_values_at_most_one():
    with pytest.raises(ValueError):
        make_radial_exponent(lambda r: np.full(np.shape(r), 0.5), 1)


@given(st.floats(0, 3), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_radial_exponent_depends_on_distance_only(r, a, b):
    p = counterexample_exponent(2, 1.5, 7 / 6, 4.0)
    x = np.array([0.3, -0.2])
    x2 = np.array([-1.0, 0.5])
    y = x + r * np.array([math.cos(a), math.sin(a)])
    y2 = x2 + r * np.array([math.cos(b), math.sin(b)])
    assert p(x, y) == pytest.approx(float(p(x2, y2)), abs=1e-12)


def test_counterexample_exponent_values():
    p = counterexample_exponent(2, 1.5, 7 / 6, 4.0)
    assert (p.p_minus, p.p_plus) == (7 / 6, 4.0)
    prof = counterexample_profile(7 / 6, 4.0)
    r = np.array([0.0, 0.2, 1.0, 3.0])
    np.testing.assert_allclose(prof(r), [7 / 6, 7 / 6, 4.0, 4.0])
    t = np.linspace(0.25, 0.75, 400)
    assert np.all(np.diff(prof(t)) >= 0)


def test_smoothstep_limits():
    np.testing.assert_array_equal(smoothstep(np.array([-1.0, 0.0, 1.0, 2.0])), [0, 0, 1, 1])
    assert smoothstep(np.array(0.5)) == pytest.approx(0.5)


def test_counterexample_condition_messages():
    check_counterexample_conditions(2, 1.5, 7 / 6, 4.0)
    with pytest.raises(ValueError, match="p̄ < n/q fails"):
        check_counterexample_conditions(2, 1.5, 1.5, 4.0)
    with pytest.raises(ValueError, match="n/\\(q-1\\)"):
        check_counterexample_conditions(2, 1.5, 7 / 6, 3.0)
    with pytest.raises(ValueError, match="q in \\(1, n\\)"):
        check_counterexample_conditions(2, 2.5, 1.1, 9.0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sampled_values_within_bounds(n):
    dom = Domain.ball(n, 2.0) if n > 1 else Domain.interval(-2, 2)
    for p in (sine_exponent(n), make_constant_exponent(2.5, n), jump_exponent(n),
              lipschitz_distance_exponent(n)):
        lo, hi = p.check_bounds(dom)
        assert p.p_minus <= lo <= hi <= p.p_plus


def test_bounds_violation_detected():
    from varexp.exponent import ExponentField
    p = ExponentField(lambda x, y: 2 + x[..., 0], 1.5, 2.5, 1)
    with pytest.raises(ValueError, match="leaves declared"):
        p.check_bounds(Domain.interval(-2, 2))


def test_sine_exponent_symmetry_and_trace():
    p = sine_exponent(2)
    x, y = np.random.default_rng(1).normal(size=(2, 100, 2))
    np.testing.assert_array_equal(p(x, y), p(y, x))
    np.testing.assert_allclose(p.trace(x), 2 + 0.5 * np.sin(2 * x.sum(axis=-1)))


def test_log_holder_constant_exponent_ratio_exactly_one():
    rep = check_log_holder(make_constant_exponent(2, 1), Domain.interval(-2, 2), L=1.0)
    assert rep.max_ratio == 1.0
    assert rep.verdict == "bounded-by-L"


def test_log_holder_lipschitz_distance_exponent_bounded():
    # oscillation over B_r is at most r, so the ratio is at most max r^-r = e^(1/e)
    rep = check_log_holder(lipschitz_distance_exponent(1), Domain.interval(-2, 2), L=1.5)
    assert 1 <= rep.max_ratio <= math.exp(1 / math.e)
    assert rep.verdict == "bounded-by-L"


def test_log_holder_jump_exponent_violated():
    rep = check_log_holder(jump_exponent(1), Domain.interval(-2, 2), L=10.0)
    assert rep.verdict == "violated"
    # oscillation 1/2 at the smallest sampled radius
    assert rep.max_ratio == pytest.approx(1e-6 ** -0.5)


def test_log_holder_sine_bounded_by_analytic_constant():
    for n, dom in ((1, Domain.interval(-2, 2)), (2, Domain.ball(2, 2.0))):
        rep = check_log_holder(sine_exponent(n), dom, L=math.exp(math.sqrt(n) / math.e))
        assert rep.verdict == "bounded-by-L"


def test_log_holder_skips_and_inconclusive():
    grid = LogHolderGrid(np.array([[1.999]]), (0.5, 0.1))
    rep = check_log_holder(sine_exponent(1), Domain.interval(-2, 2), 10.0, grid)
    assert rep.verdict == "inconclusive" and rep.skipped == 2
    with pytest.raises(ValueError, match="empty"):
        check_log_holder(sine_exponent(1), Domain.interval(-2, 2), 10.0,
                         LogHolderGrid(np.zeros((0, 1))))
    with pytest.raises(ValueError):
        check_log_holder(sine_exponent(1), Domain.interval(-2, 2), 0.5)


def test_catalog():
    assert exponent_from_spec("const:2.5", 1).p_plus == 2.5
    assert exponent_from_spec("smooth:sine", 2).name == "smooth:sine"
    assert exponent_from_spec("radial:counterexample:1.5:1.1666:4", 2).p_plus == 4
    with pytest.raises(KeyError):
        exponent_from_spec("wiggly", 1)
    with pytest.raises(ValueError):
        exponent_from_spec("const:0.5", 1)
