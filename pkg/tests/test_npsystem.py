import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from calr import npsystem as nps
from calr.annulus import analytic_A_eigenvalues, mode_system_matrix, source_shell_energy
from calr.geometry import Circle, ProblemGeometry
from calr.sources import Dipole, boundary_data, fourier_coeffs
from calr.verdict import Verdict


def mode_vector(geometry, m, a, b):
    ti, te = geometry.inner_bnd.t, geometry.outer_bnd.t
    return np.concatenate([a * np.exp(1j * m * ti), b * np.exp(1j * m * te)])


def band_limited_zero_mean(geometry, rng, degree=8):
    parts = []
    for bnd in (geometry.inner_bnd, geometry.outer_bnd):
        m = np.arange(1, degree + 1)
        c = rng.normal(size=(2, degree)) + 1j * rng.normal(size=(2, degree))
        parts.append(np.cos(np.outer(bnd.t, m)) @ c[0] + np.sin(np.outer(bnd.t, m)) @ c[1])
    return np.concatenate(parts)


def test_z_delta_values():
    assert nps.z_delta(2.0) == pytest.approx((-2 + 2j) / 8)
    z = nps.z_delta(1e-3)
    assert z.real < 0 < z.imag
    assert abs(z - 0.25j * 1e-3) < 1e-6


def test_density_pair_round_trip(annulus_geometry):
    vec = np.arange(512.0)
    pair = nps.DensityPair.from_stacked(vec, annulus_geometry.sizes)
    np.testing.assert_array_equal(pair.stacked, vec)
    with pytest.raises(ValueError):
        nps.DensityPair.from_stacked(vec[:-1], annulus_geometry.sizes)


def test_block_operator_matches_mode_matrix(annulus_ops, annulus_config, annulus_geometry):
    z = complex(nps.z_delta(1e-2))
    for m in (1, 3, 7):
        M = mode_system_matrix(m, z, annulus_config)
        for a, b in ((1.0, 0.0), (0.0, 1.0)):
            v = mode_vector(annulus_geometry, m, a, b)
            out = annulus_ops.Kstar @ v + z * v
            expected = mode_vector(annulus_geometry, m, M[0, 0] * a + M[0, 1] * b, M[1, 0] * a + M[1, 1] * b)
            np.testing.assert_allclose(out, expected, atol=1e-13)


def test_block_operators_are_weighted_adjoints(annulus_ops, ellipse_ops):
    for ops in (annulus_ops, ellipse_ops):
        assert ops.adjoint_defect() < 1e-13
        # the block single layer is W-symmetric
        S = ops.half_weighted(ops.S)
        assert np.abs(S - S.T).max() < 1e-13 * np.abs(S).max()


def test_calderon_and_self_adjointness(ellipse_ops):
    assert nps.calderon_residual(ellipse_ops) < 1e-6
    assert nps.self_adjointness_defect(ellipse_ops) < 1e-6


def test_zero_mean_projection(annulus_ops, annulus_geometry):
    rng = np.random.default_rng(1)
    g = rng.normal(size=512) + 3.0
    g0, removed = annulus_ops.project_zero_mean(g)
    pair = nps.DensityPair.from_stacked(g0, annulus_geometry.sizes)
    assert pair.is_zero_mean(annulus_geometry, tol=1e-13)
    g00, rem2 = annulus_ops.project_zero_mean(g0)
    np.testing.assert_allclose(g00, g0, atol=1e-13)
    assert np.abs(rem2).max() < 1e-12


def test_annulus_spectrum_invariants(annulus_spectrum, annulus_config):
    sp = annulus_spectrum
    lam = sp.eigenvalues
    assert lam.size == 510
    assert np.abs(lam).max() <= 0.5
    assert sp.kernel_dim_S == 0
    assert sp.intertwining_residual() < 1e-12
    assert sp.orthonormality_defect() < 1e-12
    assert sp.asymmetry < 1e-12
    np.testing.assert_allclose(np.sort(lam[:16]), np.sort(analytic_A_eigenvalues(annulus_config, 4)), atol=1e-12)
    # ordering: decreasing modulus
    assert np.all(np.diff(np.abs(lam)) <= 1e-15)


def test_single_layer_indefinite_on_full_space(annulus_spectrum):
    # -SS is positive on H0 only; the constants carry a sign change for r_e > 1
    ev = annulus_spectrum.S_eigenvalues
    assert ev.min() < 0 < ev.max()


def test_ellipse_spectrum_contained(ellipse_spectrum):
    lam = ellipse_spectrum.eigenvalues
    assert np.abs(lam).max() < 0.5
    assert ellipse_spectrum.intertwining_residual() < 1e-8


def test_perturbed_solve_residual_and_diagnostics(annulus_ops, annulus_geometry):
    g = boundary_data(Dipole(y=(2.5, 0.0)), annulus_geometry, with_coeffs=False).stacked
    Phi = nps.solve_perturbed(annulus_ops, 1e-3, g)
    z = complex(nps.z_delta(1e-3))
    g0, _ = annulus_ops.project_zero_mean(g)
    res = annulus_ops.Kstar @ Phi.stacked + z * Phi.stacked - g0
    assert np.linalg.norm(res) < 1e-10 * np.linalg.norm(g0)
    assert set(Phi.info) >= {"z", "cond_est", "removed_mean", "delta"}
    assert Phi.info["cond_est"] > 1.0
    assert Phi.is_zero_mean(annulus_geometry, tol=1e-10)


def test_multiple_right_hand_sides(annulus_ops):
    rng = np.random.default_rng(2)
    G = rng.normal(size=(512, 3))
    solver = nps.factorize_perturbed(annulus_ops, 1e-2)
    pairs = solver.solve(G)
    assert len(pairs) == 3
    np.testing.assert_allclose(pairs[1].stacked, solver.solve(G[:, 1]).stacked, atol=1e-12)


def test_nonzero_mean_data_removed_with_warning(annulus_ops, caplog):
    g = np.ones(512)
    with caplog.at_level("WARNING"):
        Phi = nps.solve_perturbed(annulus_ops, 1e-2, g)
    assert Phi.info["removed_mean"] > 0.5
    assert "non-zero-mean" in caplog.text


def test_spectral_energy_matches_mode_sum(annulus_spectrum, annulus_geometry, frozen):
    g = boundary_data(Dipole(y=(2.5, 0.0)), annulus_geometry, with_coeffs=False).stacked
    for d in ("0.01", "0.001"):
        e = nps.shell_energy_spectral(annulus_spectrum, float(d), g)
        ref = frozen["dipole_energies"][f"2.5:{float(d):g}"]["layer"]
        assert abs(e - ref) < 1e-8 * ref


def test_kernel_component_vanishes_for_band_limited_data(annulus_spectrum, annulus_geometry):
    g = band_limited_zero_mean(annulus_geometry, np.random.default_rng(3))
    assert nps.kernel_component(annulus_spectrum, g) < 1e-12 * np.linalg.norm(g)


def test_source_only_shell_energy(annulus_geometry, annulus_config):
    # zero densities: the quadrature integrates |grad F|^2 only
    src = Dipole(y=(3.5, 0.0))
    zero = nps.DensityPair(np.zeros(256), np.zeros(256))
    res = nps.shell_gradient_energy(annulus_geometry, zero, src)
    ref = source_shell_energy(fourier_coeffs(src, 2.0, 256), annulus_config)
    assert abs(res.energy - ref) < 1e-6 * ref


def test_direct_quadrature_warns_on_poor_refinement(annulus_geometry):
    # a density with content near the Nyquist mode is badly resolved by the strip extrapolation
    t = annulus_geometry.inner_bnd.t
    Phi = nps.DensityPair(np.cos(120 * t), np.zeros(256))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        nps.shell_gradient_energy(annulus_geometry, Phi, n_s=6, etas=(0.05, 0.04, 0.03), tol=1e-6)
    assert any(issubclass(w.category, nps.RefinementWarning) for w in caught)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_energy_form_nonnegative(annulus_spectrum, annulus_geometry, seed):
    Phi = band_limited_zero_mean(annulus_geometry, np.random.default_rng(seed), degree=20)
    assert annulus_spectrum.energy_form(Phi) >= 0.0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), alpha=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_coefficients_linear(annulus_spectrum, seed, alpha):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, 512))
    lhs = annulus_spectrum.coefficients(alpha * u + v)
    rhs = alpha * annulus_spectrum.coefficients(u) + annulus_spectrum.coefficients(v)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(alpha)))


def test_estimator_api(annulus_ops, annulus_geometry):
    est = nps.NPSymmetrizer(pinv_cutoff=1e-10)
    assert est.get_params() == {"pinv_cutoff": 1e-10, "psd_tol": 1e-6, "kernel_tol": 1e-12}
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.transform(np.zeros(512))
    est.fit(annulus_ops)
    assert est.calderon_residual_ < 1e-13
    g = boundary_data(Dipole(y=(2.5, 0.0)), annulus_geometry, with_coeffs=False).stacked
    assert est.transform(g).shape == (512,)
    assert est.transform(np.stack([g, g])).shape == (2, 512)
    assert est.shell_energy(1e-2, g) > 0
    assert isinstance(est.solve(1e-2, g), nps.DensityPair)


def test_spectral_classifier_far_source(annulus_spectrum, annulus_geometry):
    g = boundary_data(Dipole(y=(3.5, 0.0)), annulus_geometry, with_coeffs=False).stacked
    v = nps.classify_spectral(annulus_spectrum, g)
    assert v.verdict is Verdict.NO_CALR
    assert v.evidence["q_rate"] < 1
    assert "kernel_component" in v.evidence


def test_symmetrization_rejects_indefinite_single_layer():
    # flipping the sign of SS makes -SS negative definite on H0
    geo = ProblemGeometry(Circle(radius=0.3), Circle(radius=0.6), 32, 32)
    ops = nps.assemble_block_operators(geo)
    flipped = nps.BlockOperatorSet(geo, ops.Kstar, ops.K, -ops.S, ops.weights, ops.kernels)
    with pytest.raises(nps.SymmetrizationError):
        nps.build_symmetrization(flipped)
