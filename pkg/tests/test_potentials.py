import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calr import potentials as pot
from calr.geometry import Circle, Ellipse, PerturbedCircle, discretize


@pytest.fixture(scope="module")
def circle_bnd():
    return discretize(Circle(radius=1.5), 128)


@pytest.fixture(scope="module")
def ellipse_bnd():
    return discretize(Ellipse(a=2.0, b=1.0), 256)


def test_kress_weights_integrate_log_kernel_exactly():
    # int_0^{2pi} ln(4 sin^2((t - s) / 2)) e^(i m s) ds = -2 pi / |m| e^(i m t), and 0 for m = 0
    n = 32
    R = pot.kress_log_weights(n)
    t = 2 * np.pi * np.arange(n) / n
    for m in (0, 1, 5, 15):
        f = np.exp(1j * m * t)
        expected = 0.0 if m == 0 else -2 * np.pi / m * f
        np.testing.assert_allclose(R @ f, expected, atol=1e-12)
    with pytest.raises(ValueError):
        pot.kress_log_weights(31)


def test_single_layer_on_circle_is_diagonal(circle_bnd):
    # S[e^(i m t)] = -(r / (2|m|)) e^(i m t) on a circle of radius r; S[1] = r ln r
    r = 1.5
    S = pot.assemble_S_self(circle_bnd).matrix
    t = circle_bnd.t
    np.testing.assert_allclose(S @ np.ones(t.size), r * np.log(r), atol=1e-13)
    for m in (1, 4, 20):
        f = np.exp(1j * m * t)
        np.testing.assert_allclose(S @ f, -(r / (2 * m)) * f, atol=1e-13)


def test_neumann_poincare_on_circle(circle_bnd):
    # K* on a circle maps phi to its mean over the curve divided by two
    Ks = pot.assemble_Kstar_self(circle_bnd).matrix
    t = circle_bnd.t
    np.testing.assert_allclose(Ks @ np.ones(t.size), 0.5, atol=1e-14)
    np.testing.assert_allclose(Ks @ np.cos(3 * t), 0.0, atol=1e-14)


def test_ellipse_spectrum_closed_form(ellipse_bnd):
    # eigenvalues of K* on an ellipse: 1/2 and +/- ((a - b) / (a + b))^k / 2
    lam = np.linalg.eigvals(pot.assemble_Kstar_self(ellipse_bnd).matrix).real
    lam = np.sort(lam)[::-1]
    q = (2.0 - 1.0) / 3.0
    expected = np.sort(np.concatenate([[0.5], 0.5 * q ** np.arange(1, 8), -0.5 * q ** np.arange(1, 8)]))[::-1]
    top = np.sort(lam[np.argsort(-np.abs(lam))[:15]])[::-1]
    np.testing.assert_allclose(top, expected, atol=1e-12)


def test_double_layer_is_weighted_adjoint(ellipse_bnd):
    w = ellipse_bnd.weights
    Ks = pot.assemble_Kstar_self(ellipse_bnd).matrix
    K = pot.assemble_K_self(ellipse_bnd).matrix
    np.testing.assert_allclose(w[:, None] * K, (w[:, None] * Ks).T, atol=1e-15)


def test_cross_operators_on_concentric_circles():
    inner = discretize(Circle(radius=1.0), 64)
    outer = discretize(Circle(radius=2.0), 64)
    t = inner.t
    m = 3
    f = np.exp(1j * m * t)
    # single layer of the inner density on the outer circle: -(r_i / 2m)(r_i / r_e)^m
    S = pot.assemble_S_cross(inner, outer).matrix
    np.testing.assert_allclose(S @ f, -(1 / (2 * m)) * 0.5**m * f, atol=1e-14)
    # its radial derivative there: (1/2)(r_i / r_e)^(m+1)
    dS = pot.assemble_dS_cross(inner, outer).matrix
    np.testing.assert_allclose(dS @ f, 0.5 * 0.5 ** (m + 1) * f, atol=1e-14)
    with pytest.raises(ValueError):
        pot.assemble_S_cross(inner, inner)


def test_off_boundary_single_layer_of_constant_density(circle_bnd):
    # S[1](x) = r ln|x| outside and r ln r inside
    r = 1.5
    phi = np.ones(circle_bnd.n)
    x = np.array([[3.0, 0.0], [0.0, -2.5], [0.2, 0.1], [-0.5, 0.4]])
    val = pot.eval_single_layer(circle_bnd, phi, x)
    rx = np.hypot(x[:, 0], x[:, 1])
    expected = np.where(rx > r, r * np.log(rx), r * np.log(r))
    np.testing.assert_allclose(val, expected, atol=1e-12)


def test_off_boundary_gradient_matches_finite_differences(ellipse_bnd):
    phi = np.cos(2 * ellipse_bnd.t) + 0.3 * np.sin(ellipse_bnd.t)
    x = np.array([[0.3, 0.2], [2.6, 1.0], [-1.0, 1.5]])
    g = pot.eval_grad_single_layer(ellipse_bnd, phi, x)
    h = 1e-5
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (pot.eval_single_layer(ellipse_bnd, phi, x + e) - pot.eval_single_layer(ellipse_bnd, phi, x - e)) / (2 * h)
        np.testing.assert_allclose(g[:, k], fd, atol=1e-8)


def test_double_layer_of_constant_density(ellipse_bnd):
    # D[1] = 1 inside and 0 outside
    phi = np.ones(ellipse_bnd.n)
    x = np.array([[0.1, 0.2], [1.0, -0.3], [3.0, 0.0], [0.0, 2.0]])
    np.testing.assert_allclose(pot.eval_double_layer(ellipse_bnd, phi, x), [1, 1, 0, 0], atol=1e-12)


def test_near_boundary_points_rejected(circle_bnd):
    with pytest.raises(pot.NearBoundaryError):
        pot.eval_single_layer(circle_bnd, np.ones(circle_bnd.n), [[1.5, 0.0]])


def test_kernel_matrix_validates_shape(circle_bnd):
    with pytest.raises(ValueError):
        pot.KernelMatrix(np.zeros((3, 3)), "S-self", circle_bnd, circle_bnd)
    with pytest.raises(ValueError):
        pot.KernelMatrix(np.zeros((circle_bnd.n, circle_bnd.n)), "bogus", circle_bnd, circle_bnd)


@settings(max_examples=30, deadline=None)
@given(m=st.integers(0, 15), shift=st.floats(0, 2 * np.pi), factor=st.sampled_from([2, 4, 8]))
def test_fourier_upsample_exact_on_band_limited_data(m, shift, factor):
    n = 32
    t = 2 * np.pi * np.arange(n) / n
    f = np.cos(m * t + shift)
    fine = 2 * np.pi * np.arange(n * factor) / (n * factor)
    np.testing.assert_allclose(pot.fourier_upsample(f, n * factor), np.cos(m * fine + shift), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(m=st.integers(0, 15), s=st.lists(st.floats(0, 2 * np.pi), min_size=1, max_size=8))
def test_trig_eval_interpolates_band_limited_data(m, s):
    n = 32
    t = 2 * np.pi * np.arange(n) / n
    s = np.array(s)
    np.testing.assert_allclose(pot.trig_eval(np.sin(m * t), s), np.sin(m * s), atol=1e-11)


def test_trig_eval_reproduces_nodes():
    n = 16
    vals = np.random.default_rng(0).normal(size=n)
    t = 2 * np.pi * np.arange(n) / n
    np.testing.assert_allclose(pot.trig_eval(vals, t), vals, atol=1e-13)


def test_graded_rule_integrates_near_singular_kernel():
    # int_{-pi}^{pi} h / (u^2 + h^2) du = 2 atan(pi / h)
    for h in (1e-2, 1e-4, 1e-6):
        u, w = pot.graded_rule(h)
        approx = np.sum(w * h / (u**2 + h**2))
        assert abs(approx - 2 * np.arctan(np.pi / h)) < 1e-9


def test_jump_residuals_small_on_perturbed_circle():
    bnd = discretize(PerturbedCircle(base_radius=1.0, amplitude=0.2, wavenumber=3), 256)
    phi = np.cos(3 * bnd.t) + 0.5 * np.sin(bnd.t)
    rep = pot.jump_check(bnd, phi)
    assert rep.max_residual < 1e-6
    assert len(rep.offsets) == 4
