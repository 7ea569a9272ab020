import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from varexp.fields import (Domain, ball_volume, bump, cell_decomposition, counterexample_field,
                           domain_from_spec, field_from_spec, linear_field, radial_profile,
                           tent_field, zero_field)

DOMAINS = [Domain.interval(-2, 2), Domain.cube(2, -1, 1), Domain.ball(2, 2.0),
           Domain.ball(3, 1.0), Domain.annulus(2, 0.5, 2.0), Domain.annulus(2, 1e-3, 8.0),
           Domain.interval(-1, 1).excise(0.1)]


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: f"{d.outer}{d.dimension}-h{d.hole}")
@pytest.mark.parametrize("level", [0, 2])
def test_cell_measures_sum_to_volume(dom, level):
    cells = cell_decomposition(dom, level)
    assert math.isclose(sum(c.measure for c in cells), dom.volume, rel_tol=1e-12)


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: f"{d.outer}{d.dimension}-h{d.hole}")
def test_cell_nodes_integrate_constant(dom):
    from varexp.quadrature import _UNIT
    total = sum(c.nodes(_UNIT)[1].sum() for c in cell_decomposition(dom, 1))
    assert math.isclose(total, dom.volume, rel_tol=1e-12)


def test_radial_cells_measure():
    dom = Domain.ball(2, 3.0)
    cells = cell_decomposition(dom, 3, radial=True)
    assert math.isclose(sum(c.measure for c in cells), 9 * math.pi, rel_tol=1e-12)


def test_cell_split_is_deterministic():
    a = cell_decomposition(Domain.ball(2, 1.0), 2, singular=True, grading_exponent=3)
    b = cell_decomposition(Domain.ball(2, 1.0), 2, singular=True, grading_exponent=3)
    assert [c.path for c in a] == [c.path for c in b]
    assert sum(c.near_singular for c in a) == 4


@given(st.sampled_from(DOMAINS), st.integers(0, 10_000))
def test_ray_segments_stay_inside(dom, seed):
    rng = np.random.default_rng(seed)
    x = dom.sample(1, seed=seed)[0]
    om = rng.normal(size=dom.dimension)
    om /= np.linalg.norm(om)
    lo, hi = dom.ray_segments(x, om)
    for a, b in zip(lo, hi):
        if b > a:
            t = a + (b - a) * np.array([1e-6, 0.25, 0.5, 0.75, 1 - 1e-6])
            assert dom.contains(x + t[:, None] * om).all()


def test_ray_segments_extra_hole():
    dom = Domain.ball(2, 4.0)
    x = np.array([1.0, 0.0])
    lo, hi = dom.ray_segments(x, np.array([-1.0, 0.0]), extra_hole=np.array(1.0))
    # y = x - rho e1 leaves |y| <= 1 for rho in [0, 2]
    np.testing.assert_allclose([lo[1], hi[1]], [2.0, 5.0])


def test_domain_basics():
    assert Domain.ball(2, 1.0).volume == pytest.approx(math.pi)
    assert ball_volume(3, 2.0) == pytest.approx(32 * math.pi / 3)
    assert domain_from_spec("annulus:2:0.5:2").hole == 0.5
    with pytest.raises(ValueError):
        domain_from_spec("torus:2")
    d = Domain.interval(0, 1)
    assert d.dist_to_boundary(np.array([[0.25]]))[0] == pytest.approx(0.25)


def test_bump_gradient_matches_differences():
    u = bump(2, 1.3)
    x = np.array([[0.2, -0.4], [0.9, 0.1], [0.0, 0.0]])
    np.testing.assert_allclose(u.gradient(x), u.fd_gradient(x, 1e-5, richardson=True), atol=1e-9)
    assert u(np.array([[2.0, 0.0]]))[0] == 0.0


def test_bump_value_at_centre():
    assert bump(1)(np.zeros((1, 1)))[0] == pytest.approx(math.exp(-1))


def test_tent_is_lipschitz_not_smooth():
    u = tent_field(1, 1.0)
    assert u.smoothness == "lipschitz"
    np.testing.assert_allclose(u.gradient(np.array([[0.5], [-0.5]]))[:, 0], [-1.0, 1.0])


def test_counterexample_profile_is_c1_and_decreasing():
    phi, dphi = radial_profile(1.5)
    t = np.linspace(0.05, 2.5, 2000)
    assert np.all(np.diff(phi(t)) <= 1e-15)
    for knot in (1.0, 2.0):
        assert phi(np.array(knot - 1e-9)) == pytest.approx(phi(np.array(knot + 1e-9)), abs=1e-7)
        assert dphi(np.array(knot - 1e-9)) == pytest.approx(dphi(np.array(knot + 1e-9)), abs=1e-7)
    assert phi(np.array(0.25)) == pytest.approx(0.25 ** -0.5)


def test_counterexample_field_rejects_q():
    with pytest.raises(ValueError, match="1 < p̄ < n/q"):
        counterexample_field(2.5, 2)


def test_linear_field_needs_bounded_domain():
    with pytest.raises(ValueError):
        linear_field(1).check_domain(Domain.box([-np.inf], [np.inf]))


def test_catalog():
    assert field_from_spec("bump:2:1.5", 2).support_radius == 1.5
    assert field_from_spec("zero", 1).is_zero
    with pytest.raises(KeyError):
        field_from_spec("nope", 1)
    assert zero_field(2)(np.ones((3, 2))).tolist() == [0, 0, 0]
