"""Block Neumann-Poincare system for a core-shell structure.

Densities live on H = L2(Gamma_i) x L2(Gamma_e), stored stacked as
``[phi_i; phi_e]``.  The transmission problem with shell permittivity
``-1 + i delta`` reduces to ``(z_delta I + KK*) Phi = g``.

The symmetrization works in half-weighted coordinates ``u = W^(1/2) phi``
where W-adjoints become plain transposes, and on the zero-mean subspace
H0 = L2_0 x L2_0 where ``-SS`` is positive definite.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import potentials as pot
from .geometry import ProblemGeometry, distance_to_curve
from .utils.validation import check_delta, check_density_stack, check_points

logger = logging.getLogger(__name__)


class SymmetrizationError(RuntimeError):
    """-SS has a clearly negative eigenvalue on the zero-mean subspace."""


class RefinementWarning(UserWarning):
    """Successive quadrature refinements disagree by more than the threshold."""


def z_delta(delta):
    """Spectral parameter z = i delta / (2 (2 - i delta))."""
    delta = np.asarray(delta, dtype=float)
    return 1j * delta / (2 * (2 - 1j * delta))


@dataclass(frozen=True, eq=False)
class DensityPair:
    """Density on both interfaces; ``info`` carries solver diagnostics."""

    phi_i: np.ndarray
    phi_e: np.ndarray
    info: dict = field(default_factory=dict)

    @classmethod
    def from_stacked(cls, vec, sizes, info=None):
        ni, ne = sizes
        vec = np.asarray(vec)
        if vec.shape[0] != ni + ne:
            raise ValueError(f"stacked density has length {vec.shape[0]}, expected {ni + ne}")
        return cls(vec[:ni], vec[ni:], dict(info or {}))

    @property
    def stacked(self):
        return np.concatenate([self.phi_i, self.phi_e])

    def mean_defect(self, geometry):
        """Relative size of the boundary integrals, max over the two curves."""
        out = 0.0
        for phi, bnd in ((self.phi_i, geometry.inner_bnd), (self.phi_e, geometry.outer_bnd)):
            scale = np.sum(bnd.weights * np.abs(phi))
            if scale > 0:
                out = max(out, abs(np.sum(bnd.weights * phi)) / scale)
        return float(out)

    def is_zero_mean(self, geometry, tol=1e-8):
        return self.mean_defect(geometry) <= tol


@dataclass(frozen=True, eq=False)
class BlockOperatorSet:
    """Dense discretizations of KK*, KK and SS together with their blocks."""

    geometry: ProblemGeometry
    Kstar: np.ndarray
    K: np.ndarray
    S: np.ndarray
    weights: np.ndarray
    kernels: dict

    @property
    def sizes(self):
        return self.geometry.sizes

    @property
    def W(self):
        return np.diag(self.weights)

    def half_weighted(self, M):
        """``W^(1/2) M W^(-1/2)``: W-adjoints become transposes."""
        sq = np.sqrt(self.weights)
        return sq[:, None] * M / sq[None, :]

    def norm(self, M):
        return float(np.linalg.norm(self.half_weighted(M), 2))

    def adjoint_defect(self):
        """Relative W-norm distance between KK and the W-adjoint of KK*."""
        Ks = self.half_weighted(self.Kstar)
        return float(np.linalg.norm(self.half_weighted(self.K) - Ks.T, 2) / np.linalg.norm(Ks, 2))

    def mean_basis(self):
        """W-unit vectors of the two piecewise constants, half-weighted coordinates."""
        ni, ne = self.sizes
        sq = np.sqrt(self.weights)
        C = np.zeros((ni + ne, 2))
        C[:ni, 0] = sq[:ni] / np.linalg.norm(sq[:ni])
        C[ni:, 1] = sq[ni:] / np.linalg.norm(sq[ni:])
        return C

    def project_zero_mean(self, g):
        """W-orthogonal projection of a stacked vector (or columns) onto H0."""
        g = np.asarray(g)
        sq = np.sqrt(self.weights).reshape((-1,) + (1,) * (g.ndim - 1))
        C = self.mean_basis()
        u = sq * g
        removed = C @ (C.T @ u)
        return (u - removed) / sq, removed


def assemble_block_operators(geometry):
    bi, be = geometry.inner_bnd, geometry.outer_bnd
    k = {
        "Kstar_i": pot.assemble_Kstar_self(bi),
        "Kstar_e": pot.assemble_Kstar_self(be),
        "K_i": pot.assemble_K_self(bi),
        "K_e": pot.assemble_K_self(be),
        "dS_e_to_i": pot.assemble_dS_cross(be, bi),
        "dS_i_to_e": pot.assemble_dS_cross(bi, be),
        "D_e_to_i": pot.assemble_D_cross(be, bi),
        "D_i_to_e": pot.assemble_D_cross(bi, be),
        "S_i": pot.assemble_S_self(bi),
        "S_e": pot.assemble_S_self(be),
        "S_e_to_i": pot.assemble_S_cross(be, bi),
        "S_i_to_e": pot.assemble_S_cross(bi, be),
    }
    m = {name: km.matrix for name, km in k.items()}
    Kstar = np.block([[-m["Kstar_i"], -m["dS_e_to_i"]], [m["dS_i_to_e"], m["Kstar_e"]]])
    K = np.block([[-m["K_i"], m["D_e_to_i"]], [-m["D_i_to_e"], m["K_e"]]])
    S = np.block([[m["S_i"], m["S_e_to_i"]], [m["S_i_to_e"], m["S_e"]]])
    return BlockOperatorSet(geometry, Kstar, K, S, geometry.weights, k)


def calderon_residual(ops):
    """``||SS KK* - KK SS|| / (||SS|| ||KK*||)`` in W-weighted operator norms."""
    lhs = ops.S @ ops.Kstar - ops.K @ ops.S
    return ops.norm(lhs) / (ops.norm(ops.S) * ops.norm(ops.Kstar))


def self_adjointness_defect(ops):
    """Same quantity written as the W-skew part of ``SS KK*``."""
    M = ops.half_weighted(ops.S @ ops.Kstar)
    return float(np.linalg.norm(M - M.T, 2)) / (ops.norm(ops.S) * ops.norm(ops.Kstar))


@dataclass(frozen=True, eq=False)
class SymmetrizedSpectrum:
    """sqrt(-SS), the symmetrized operator AA and its eigen-decomposition.

    Matrices ``R``, ``R_pinv``, ``A`` and ``P`` act on node vectors.  The
    compressed half-weighted versions used internally are kept as ``R0``,
    ``A0`` and ``basis`` (orthonormal columns spanning H0).
    """

    ops: BlockOperatorSet
    basis: np.ndarray
    R0: np.ndarray
    R0_pinv: np.ndarray
    A0: np.ndarray
    eigenvalues: np.ndarray
    eigvecs0: np.ndarray
    kernel_mask: np.ndarray
    kernel_dim_S: int
    asymmetry: float
    S_eigenvalues: np.ndarray

    def _lift(self, M0):
        sq = np.sqrt(self.ops.weights)
        return (self.basis @ M0 @ self.basis.T) * (sq[None, :] / sq[:, None])

    @property
    def R(self):
        return self._lift(self.R0)

    @property
    def R_pinv(self):
        return self._lift(self.R0_pinv)

    @property
    def A(self):
        return self._lift(self.A0)

    @property
    def eigenvectors(self):
        """W-orthonormal eigenvectors of AA as node vectors (columns)."""
        sq = np.sqrt(self.ops.weights)
        return (self.basis @ self.eigvecs0) / sq[:, None]

    @property
    def P(self):
        V = self.eigvecs0[:, self.kernel_mask]
        return self._lift(V @ V.T)

    def coefficients(self, vec, apply_R=True):
        """Coefficients of ``R vec`` (or ``vec``) in the eigenbasis of AA."""
        vec = np.asarray(vec)
        sq = np.sqrt(self.ops.weights).reshape((-1,) + (1,) * (vec.ndim - 1))
        u = self.basis.T @ (sq * vec)
        if apply_R:
            u = self.R0 @ u
        return self.eigvecs0.T @ u

    def energy_form(self, Phi):
        """``1/2 <R Phi, R Phi> - <AA R Phi, R Phi>`` for a zero-mean density."""
        d = self.coefficients(_stacked(Phi))
        lam = self.eigenvalues.reshape((-1,) + (1,) * (d.ndim - 1))
        return np.real(np.sum((0.5 - lam) * np.abs(d) ** 2, axis=0))

    def intertwining_residual(self):
        """``||AA R - R KK*|| / (||R|| ||KK*||)`` restricted to H0."""
        k0 = self.basis.T @ self.ops.half_weighted(self.ops.Kstar) @ self.basis
        lhs = self.A0 @ self.R0 - self.R0 @ k0
        return float(np.linalg.norm(lhs, 2) / (np.linalg.norm(self.R0, 2) * np.linalg.norm(k0, 2)))

    def orthonormality_defect(self):
        V = self.eigenvectors
        G = V.T @ (self.ops.weights[:, None] * V)
        return float(np.abs(G - np.eye(G.shape[0])).max())


def build_symmetrization(ops, pinv_cutoff=1e-12, psd_tol=1e-6, kernel_tol=1e-12):
    """Symmetrize KK* with respect to -SS on the zero-mean subspace.

    Parameters
    ----------
    pinv_cutoff : float
        Eigenvalues of -SS below ``pinv_cutoff * max`` are treated as Ker SS.
    psd_tol : float
        Eigenvalues of -SS below ``-psd_tol * max`` raise
        :class:`SymmetrizationError`.
    kernel_tol : float
        Eigenvalues of AA with ``|lambda| <= kernel_tol * max|lambda|`` span
        the numerical Ker AA used by the projector P.
    """
    n = ops.weights.size
    Q, _ = np.linalg.qr(ops.mean_basis(), mode="complete")
    B = Q[:, 2:]
    Ss = -ops.half_weighted(ops.S)
    Ss = 0.5 * (Ss + Ss.T)
    full_ev = np.linalg.eigvalsh(Ss)
    logger.debug("full-space -S spectrum in [%.3e, %.3e]", full_ev[0], full_ev[-1])

    mu, U = np.linalg.eigh(B.T @ Ss @ B)
    top = mu.max()
    if mu.min() < -psd_tol * top:
        raise SymmetrizationError(
            f"-S has eigenvalue {mu.min():.3e} on the zero-mean subspace (max {top:.3e})"
        )
    keep = mu > pinv_cutoff * top
    kernel_dim_S = int((~keep).sum())
    mu_c = np.where(keep, mu, 0.0)
    R0 = (U * np.sqrt(mu_c)) @ U.T
    inv_sqrt = np.zeros_like(mu)
    inv_sqrt[keep] = 1.0 / np.sqrt(mu[keep])
    R0_pinv = (U * inv_sqrt) @ U.T

    k0 = B.T @ ops.half_weighted(ops.Kstar) @ B
    A0 = R0 @ k0 @ R0_pinv
    asym = float(np.linalg.norm(A0 - A0.T, 2) / max(np.linalg.norm(A0, 2), 1e-300))
    A0 = 0.5 * (A0 + A0.T)
    lam, V = np.linalg.eigh(A0)
    order = np.lexsort((np.sign(lam), -np.abs(lam)))
    lam, V = lam[order], V[:, order]
    kernel_mask = np.abs(lam) <= kernel_tol * np.abs(lam).max()
    logger.debug("symmetrization: n=%d asym=%.2e ker(S)=%d", n, asym, kernel_dim_S)
    return SymmetrizedSpectrum(
        ops=ops,
        basis=B,
        R0=R0,
        R0_pinv=R0_pinv,
        A0=A0,
        eigenvalues=lam,
        eigvecs0=V,
        kernel_mask=kernel_mask,
        kernel_dim_S=kernel_dim_S,
        asymmetry=asym,
        S_eigenvalues=full_ev,
    )


def _stacked(Phi):
    return Phi.stacked if isinstance(Phi, DensityPair) else np.asarray(Phi)


@dataclass(frozen=True, eq=False)
class PerturbedSolver:
    """LU factorization of ``z_delta I + KK*`` reusable for many right-hand sides."""

    ops: BlockOperatorSet
    delta: float
    z: complex
    lu: tuple
    cond_est: float

    def solve(self, g, project=True):
        g = check_density_stack(g, self.ops.weights.size)
        removed = 0.0
        if project:
            g0, rem = self.ops.project_zero_mean(g)
            sq = np.sqrt(self.ops.weights)
            denom = np.linalg.norm(sq.reshape((-1,) + (1,) * (g.ndim - 1)) * g)
            removed = float(np.linalg.norm(rem) / denom) if denom > 0 else 0.0
            if removed > 1e-8:
                logger.warning("removed non-zero-mean part of g with relative norm %.3e", removed)
            g = g0
        phi = sla.lu_solve(self.lu, g.astype(complex))
        info = {"z": self.z, "cond_est": self.cond_est, "removed_mean": removed, "delta": self.delta}
        if phi.ndim == 1:
            return DensityPair.from_stacked(phi, self.ops.sizes, info)
        return [DensityPair.from_stacked(c, self.ops.sizes, info) for c in phi.T]


def factorize_perturbed(ops, delta):
    delta = check_delta(delta)
    z = complex(z_delta(delta))
    M = ops.Kstar.astype(complex) + z * np.eye(ops.weights.size)
    anorm = np.linalg.norm(M, 1)
    lu = sla.lu_factor(M, check_finite=False)
    rcond, info = sla.lapack.zgecon(lu[0], anorm, norm="1")
    cond = float(np.inf if rcond == 0 else 1.0 / rcond)
    return PerturbedSolver(ops, float(delta), z, lu, cond)


def solve_perturbed(ops, delta, g, project=True):
    """Solve ``(z_delta I + KK*) Phi = g`` by dense LU with partial pivoting.

    ``g`` is projected onto H0 first; the removed relative norm and a
    1-norm condition estimate are stored in ``Phi.info``.
    """
    return factorize_perturbed(ops, delta).solve(g, project=project)


def shell_energy_spectral(spec, delta, g):
    """Layer-potential part of the dissipated energy via the AA eigenbasis.

    ``delta * sum_n (1/2 - lambda_n) |c_n|^2 / |lambda_n + z|^2`` with
    ``c = <R g, Psi_n>``; kernel modes enter with ``lambda = 0``.
    """
    delta = check_delta(delta)
    z = complex(z_delta(delta))
    c = spec.coefficients(_stacked(g))
    lam = np.where(spec.kernel_mask, 0.0, spec.eigenvalues)
    lam = lam.reshape((-1,) + (1,) * (c.ndim - 1))
    terms = (0.5 - lam) * np.abs(c) ** 2 / np.abs(lam + z) ** 2
    return delta * np.real(terms.sum(axis=0))


def kernel_component(spec, g):
    """``||P sqrt(-SS) g||_W``; a nonzero value certifies energy blow-up."""
    c = spec.coefficients(_stacked(g))
    return float(np.sqrt(np.sum(np.abs(c[spec.kernel_mask]) ** 2)))


# --------------------------------------------------------------------------
# off-boundary fields


def _required_factor(bnd, dist, ratio, max_factor):
    h = bnd.weights.max()
    need = np.maximum(1, np.ceil(ratio * h / np.maximum(dist, 1e-300)))
    factor = 2 ** np.ceil(np.log2(need)).astype(int)
    return np.minimum(factor, max_factor)


def layer_field(bnd, density, x, gradient=False, ratio=4.0, max_factor=256, chunk=2048, value=True):
    """Single layer (and gradient) of node densities at off-boundary points.

    The density is spectrally upsampled per point so that the node spacing is
    at most ``distance / ratio``, keeping the trapezoidal rule accurate close
    to the curve.  ``density`` may have trailing columns.
    """
    x = check_points(x)
    density = np.asarray(density)
    dist, _ = distance_to_curve(bnd.curve, x, n_samples=max(256, bnd.n))
    if np.any(dist < pot.NEAR_BOUNDARY_REL * bnd.diameter):
        raise pot.NearBoundaryError("evaluation point too close to an interface")
    factor = _required_factor(bnd, dist, ratio, max_factor)
    if np.any(factor == max_factor):
        logger.debug("%d point(s) at maximal upsampling", int((factor == max_factor).sum()))
    extra = density.shape[1:]
    val = np.zeros((x.shape[0],) + extra, dtype=complex)
    grad = np.zeros((x.shape[0], 2) + extra, dtype=complex) if gradient else None
    for f in np.unique(factor):
        sel = np.nonzero(factor == f)[0]
        fine, phi = pot.upsample(bnd, density, int(f))
        for start in range(0, sel.size, chunk):
            idx = sel[start : start + chunk]
            if value:
                val[idx] = pot.single_layer_matrix(fine, x[idx]) @ phi
            if gradient:
                gx, gy = pot.grad_single_layer_matrices(fine, x[idx])
                grad[idx, 0] = gx @ phi
                grad[idx, 1] = gy @ phi
    return (val, grad) if gradient else val


def solution_field(geometry, Phi, source, x, gradient=False):
    """``V = F + S_i[phi_i] + S_e[phi_e]`` at off-boundary points."""
    x = check_points(x)
    vi = layer_field(geometry.inner_bnd, Phi.phi_i, x, gradient)
    ve = layer_field(geometry.outer_bnd, Phi.phi_e, x, gradient)
    if source is None:
        F, dF = np.zeros(x.shape[0]), np.zeros((x.shape[0], 2))
    else:
        F, dF = source.potential(x)
    if gradient:
        return F + vi[0] + ve[0], dF + vi[1] + ve[1]
    return F + vi + ve


# --------------------------------------------------------------------------
# direct shell quadrature


@dataclass(frozen=True)
class ShellEnergyResult:
    energy: float
    levels: tuple
    etas: tuple
    refinement_gap: float


def _shell_grid(geometry, eta, n_s, n_t):
    ci, ce = geometry.inner, geometry.outer
    t = 2 * np.pi * np.arange(n_t) / n_t
    xs, ws = np.polynomial.legendre.leggauss(n_s)
    s = eta + (1 - 2 * eta) * 0.5 * (xs + 1)
    ws = ws * 0.5 * (1 - 2 * eta)
    xi, xe = ci.position(t), ce.position(t)
    di, de = ci.derivative(t), ce.derivative(t)
    pts = (1 - s)[:, None, None] * xi[None] + s[:, None, None] * xe[None]
    ds = (xe - xi)[None].repeat(n_s, 0)
    dt = (1 - s)[:, None, None] * di[None] + s[:, None, None] * de[None]
    jac = ds[..., 0] * dt[..., 1] - ds[..., 1] * dt[..., 0]
    if np.any(jac * np.sign(jac.mean()) <= 0):
        raise ValueError("blend map between the interfaces is not a diffeomorphism")
    w = np.abs(jac) * ws[:, None] * (2 * np.pi / n_t)
    return pts.reshape(-1, 2), w.reshape(-1)


def _richardson(etas, values):
    # polynomial in eta through all levels, evaluated at 0
    return pot._extrapolate_to_zero(etas, np.asarray(values))


def shell_gradient_energy(
    geometry, Phi, source=None, n_s=20, n_t=None, etas=(0.01, 0.005, 0.0025), ratio=3.0, tol=0.02
):
    """``int_shell |grad V|^2`` by blended-map quadrature with strip extrapolation.

    The shell is parametrized by ``x(s, t) = (1 - s) x_i(t) + s x_e(t)``;
    Gauss-Legendre in ``s`` over ``[eta, 1 - eta]`` and the trapezoidal rule
    in ``t``.  The excluded strips are recovered by polynomial extrapolation
    in ``eta``.  ``Phi`` may be a :class:`DensityPair` or a list of them.
    """
    pairs = [Phi] if isinstance(Phi, DensityPair) else list(Phi)
    phi_i = np.stack([p.phi_i for p in pairs], axis=1)
    phi_e = np.stack([p.phi_e for p in pairs], axis=1)
    if n_t is None:
        n_t = 2 * max(geometry.sizes)
    levels = []
    for eta in etas:
        pts, w = _shell_grid(geometry, eta, n_s, n_t)
        grad = np.zeros((pts.shape[0], 2, len(pairs)), dtype=complex)
        for bnd, dens in ((geometry.inner_bnd, phi_i), (geometry.outer_bnd, phi_e)):
            _, gr = layer_field(bnd, dens, pts, gradient=True, ratio=ratio, max_factor=1024, value=False)
            grad += gr
        if source is not None:
            grad += source.potential(pts)[1][..., None]
        levels.append(np.einsum("p,pkd->d", w, np.abs(grad) ** 2))
    levels = np.array(levels)
    energy = _richardson(etas, levels)
    gap = 0.0
    if len(etas) >= 3:
        coarse = _richardson(etas[:-1], levels[:-1])
        gap = float(np.max(np.abs(coarse - energy) / np.maximum(np.abs(energy), 1e-300)))
        if gap > tol:
            warnings.warn(f"shell quadrature refinements disagree by {gap:.2%}", RefinementWarning)
    out = [float(e) for e in np.atleast_1d(energy)]
    return ShellEnergyResult(
        energy=out[0] if isinstance(Phi, DensityPair) else out,
        levels=tuple(map(tuple, levels)),
        etas=tuple(etas),
        refinement_gap=gap,
    )


def shell_energy_direct(geometry, Phi, source, delta, **kwargs):
    """``delta * int_shell |grad V_delta|^2`` with V = F + S_i[phi_i] + S_e[phi_e]."""
    delta = check_delta(delta)
    res = shell_gradient_energy(geometry, Phi, source, **kwargs)
    e = res.energy
    return delta * e if np.isscalar(e) else [delta * v for v in e]


# --------------------------------------------------------------------------
# estimator front-end


class NPSymmetrizer(BaseEstimator):
    """Estimator-style wrapper: ``fit`` symmetrizes, ``transform`` applies sqrt(-SS).

    Parameters
    ----------
    pinv_cutoff, psd_tol, kernel_tol : float
        See :func:`build_symmetrization`.

    Attributes
    ----------
    ops_ : BlockOperatorSet
    spectrum_ : SymmetrizedSpectrum
    eigenvalues_ : ndarray
        Eigenvalues of AA sorted by decreasing magnitude.
    """

    def __init__(self, pinv_cutoff=1e-12, psd_tol=1e-6, kernel_tol=1e-12):
        self.pinv_cutoff = pinv_cutoff
        self.psd_tol = psd_tol
        self.kernel_tol = kernel_tol

    def fit(self, X, y=None):
        ops = X if isinstance(X, BlockOperatorSet) else assemble_block_operators(X)
        self.ops_ = ops
        self.spectrum_ = build_symmetrization(ops, self.pinv_cutoff, self.psd_tol, self.kernel_tol)
        self.eigenvalues_ = self.spectrum_.eigenvalues
        self.calderon_residual_ = calderon_residual(ops)
        return self

    def transform(self, g):
        """Apply sqrt(-SS) to stacked densities (rows = samples or one vector)."""
        check_is_fitted(self, "spectrum_")
        g = np.asarray(g)
        R = self.spectrum_.R
        return R @ g if g.ndim == 1 else (R @ g.T).T

    def solve(self, delta, g):
        check_is_fitted(self, "spectrum_")
        return solve_perturbed(self.ops_, delta, g)

    def shell_energy(self, delta, g):
        check_is_fitted(self, "spectrum_")
        return shell_energy_spectral(self.spectrum_, delta, g)

    def kernel_component(self, g):
        check_is_fitted(self, "spectrum_")
        return kernel_component(self.spectrum_, g)


# --------------------------------------------------------------------------
# general-geometry classification heuristic


def spectral_levels(spec, g, level_rtol=1e-6, floor=1e-11):
    """Group ``|lambda_n|`` into levels and sum ``|<R g, Psi_n>|^2`` per level.

    Returns ``(level_abs, weight)`` sorted by decreasing ``|lambda|``; levels
    below ``floor * max |lambda|`` are unresolved and dropped.
    """
    c = spec.coefficients(_stacked(g))
    lam = np.abs(spec.eigenvalues)
    keep = lam > floor * lam.max()
    lam, c2 = lam[keep], np.abs(c[keep]) ** 2
    order = np.argsort(-lam, kind="stable")
    lam, c2 = lam[order], c2[order]
    levels, weights = [], []
    for lv, w in zip(lam, c2):
        if levels and abs(lv - levels[-1]) <= level_rtol * levels[-1]:
            weights[-1] += w
        else:
            levels.append(lv)
            weights.append(w)
    return np.array(levels), np.array(weights)


def classify_spectral(spec, g, thresholds=None, noise=1e-28):
    """Growth test on the eigen-expansion of ``R g`` for arbitrary geometry.

    Level ``k`` carries ``q_k = w_k / |lambda_k|`` with gap factor
    ``|lambda_(k+1)| / |lambda_k|``, the analogue of ``rho^(m_(k+1) - m_k)``
    on the annulus.  Levels whose weight is below ``noise`` times the total
    are unresolved.  The kernel component is reported alongside.
    """
    from .classification import gp_classify

    lv, w = spectral_levels(spec, g)
    ok = w > noise * max(w.sum(), 1e-300)
    lv, w = lv[ok], w[ok]
    log_q = np.log(w) - np.log(lv)
    m = np.arange(1, lv.size + 1)
    log_gap = np.diff(np.log(lv))
    evidence = {
        "kernel_component": kernel_component(spec, g),
        "level_trace": {"abs_lambda": lv.tolist(), "log_q": log_q.tolist()},
    }
    return gp_classify(m, log_q, log_gap, thresholds, evidence)
