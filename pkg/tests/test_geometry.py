import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ellipe

from calr.geometry import (
    Circle,
    Ellipse,
    GeometryError,
    PerturbedCircle,
    ProblemGeometry,
    contains,
    discretize,
    distance_to_curve,
    locate,
    make_curve,
)

T = np.linspace(0, 2 * np.pi, 37)


def test_circle_frame_and_curvature():
    c = Circle(center=(0.5, -1.0), radius=2.0)
    x = c.position(T)
    np.testing.assert_allclose(np.hypot(x[:, 0] - 0.5, x[:, 1] + 1.0), 2.0, rtol=1e-15)
    # outward normal of a circle is the radial direction
    np.testing.assert_allclose(c.normal(T), (x - [0.5, -1.0]) / 2.0, atol=1e-15)
    np.testing.assert_allclose(c.curvature(T), 0.5, rtol=1e-14)
    np.testing.assert_allclose(c.speed(T), 2.0, rtol=1e-15)


def test_ellipse_curvature_closed_form():
    a, b = 2.0, 1.0
    e = Ellipse(a=a, b=b)
    expected = a * b / (a**2 * np.sin(T) ** 2 + b**2 * np.cos(T) ** 2) ** 1.5
    np.testing.assert_allclose(e.curvature(T), expected, rtol=1e-13)


def test_perimeter_matches_complete_elliptic_integral():
    a, b = 2.0, 1.0
    exact = 4 * a * ellipe(1 - (b / a) ** 2)
    bnd = discretize(Ellipse(a=a, b=b), 128)
    assert abs(bnd.perimeter - exact) < 1e-12 * exact


def test_perturbed_circle_derivatives_match_finite_differences():
    pc = PerturbedCircle(base_radius=1.0, amplitude=0.2, wavenumber=3)
    h = 1e-6
    fd = (pc.position(T + h) - pc.position(T - h)) / (2 * h)
    np.testing.assert_allclose(pc.derivative(T), fd, atol=1e-8)
    fd2 = (pc.derivative(T + h) - pc.derivative(T - h)) / (2 * h)
    np.testing.assert_allclose(pc.second_derivative(T), fd2, atol=1e-7)


def test_normals_point_outward():
    for curve in (Ellipse(a=2.0, b=1.0), PerturbedCircle(base_radius=1.0, amplitude=0.2, wavenumber=3)):
        bnd = discretize(curve, 64)
        outside = bnd.nodes + 1e-3 * bnd.normals
        inside = bnd.nodes - 1e-3 * bnd.normals
        assert np.all(locate(curve, outside) == -1)
        assert np.all(locate(curve, inside) == 1)


def test_invalid_curves_rejected():
    with pytest.raises(GeometryError):
        Circle(radius=0.0)
    with pytest.raises(GeometryError):
        Ellipse(a=1.0, b=-1.0)
    with pytest.raises(GeometryError):
        PerturbedCircle(base_radius=1.0, amplitude=0.3, wavenumber=3)
    with pytest.raises(GeometryError):
        make_curve("square", side=1.0)
    with pytest.raises(GeometryError):
        make_curve("circle")
    with pytest.raises(GeometryError):
        make_curve("circle", radius=1.0, a=2.0)
    with pytest.raises(GeometryError):
        make_curve("perturbed-circle", r0=1.0, eps=0.1, k=2.5)


def test_make_curve_builds_each_kind():
    assert make_curve("circle", radius=2.0) == Circle(radius=2.0)
    assert make_curve("ellipse", a=2.0, b=1.0, center=(1, 0)) == Ellipse(center=(1.0, 0.0), a=2.0, b=1.0)
    pc = make_curve("perturbed-circle", r0=1.0, eps=0.2, k=3)
    assert pc.wavenumber == 3 and pc.amplitude == 0.2


def test_discretize_rejects_bad_node_counts():
    for n in (15, 17, 8, 100.5):
        with pytest.raises(GeometryError):
            discretize(Circle(), n)


def test_nesting_checks():
    with pytest.raises(GeometryError):
        ProblemGeometry(Circle(radius=2.0), Circle(radius=1.0), 64, 64)
    with pytest.raises(GeometryError):
        ProblemGeometry(Ellipse(a=3.0, b=1.0), Circle(radius=2.5), 64, 64)
    with pytest.raises(GeometryError):
        ProblemGeometry.annulus(2.0, 1.0)
    g = ProblemGeometry.annulus(1.0, 2.0, 64)
    assert g.is_concentric_annulus() and g.sizes == (64, 64)
    assert not ProblemGeometry(Ellipse(a=2.0, b=1.0), Circle(radius=3.0), 64, 64).is_concentric_annulus()


def test_split_and_weights_layout():
    g = ProblemGeometry(Circle(radius=1.0), Circle(radius=2.0), 32, 64)
    vec = np.arange(96.0)
    a, b = g.split(vec)
    assert a.size == 32 and b.size == 64
    np.testing.assert_allclose(g.weights.sum(), 2 * np.pi * 3.0, rtol=1e-14)


def test_boundary_points_located_on_curve():
    e = Ellipse(a=2.0, b=1.0)
    assert np.all(locate(e, e.position(T)) == 0)
    assert contains(e, [0.0, 0.0]) and not contains(e, [2.5, 0.0])


@settings(max_examples=60, deadline=None)
@given(
    r=st.floats(0.05, 3.0).filter(lambda r: abs(r - 1.0) > 1e-3),
    angle=st.floats(0, 2 * np.pi),
)
def test_distance_and_location_for_circle(r, angle):
    c = Circle(radius=1.0)
    p = np.array([[r * np.cos(angle), r * np.sin(angle)]])
    dist, t = distance_to_curve(c, p)
    assert abs(dist[0] - abs(r - 1.0)) < 1e-12
    assert locate(c, p)[0] == (1 if r < 1 else -1)


@settings(max_examples=40, deadline=None)
@given(t0=st.floats(0, 2 * np.pi), offset=st.floats(-0.3, 0.3).filter(lambda s: abs(s) > 1e-4))
def test_distance_along_normal_for_ellipse(t0, offset):
    # a point displaced along the normal by less than the minimal radius of
    # curvature (b^2 / a = 0.5) has the foot point as its nearest point
    e = Ellipse(a=2.0, b=1.0)
    p = e.position(t0) + offset * e.normal(t0)
    dist, _ = distance_to_curve(e, p[None, :])
    assert abs(dist[0] - abs(offset)) < 1e-10
