"""Laplace layer potentials on smooth closed curves.

Off-boundary evaluation uses the plain trapezoidal rule; on-boundary Nystrom
matrices use Kress' periodic log-quadrature for the single layer and the
continuous diagonal limit kappa/(4 pi) for the Neumann-Poincare kernels.

All dense matrices act on node samples: ``(M @ phi)[i]`` approximates the
operator applied to ``phi`` at target node ``i``.  Adjoints and symmetry are
taken with respect to ``<u, v>_W = sum_j w_j u_j conj(v_j)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import circulant

from .geometry import DiscreteBoundary, distance_to_curve, discretize

INV_2PI = 1.0 / (2.0 * np.pi)
NEAR_BOUNDARY_REL = 1e-6

KERNEL_KINDS = ("S-self", "S-cross", "Kstar-self", "K-self", "dS/dnu-cross", "D-cross", "D-self")


class NearBoundaryError(ValueError):
    """Target point too close to a curve for plain off-boundary quadrature."""


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Dense Nystrom discretization of one boundary integral operator."""

    matrix: np.ndarray
    kind: str
    source: DiscreteBoundary
    target: DiscreteBoundary

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.matrix.shape != (self.target.n, self.source.n):
            raise ValueError("matrix shape does not match target x source sizes")

    def __matmul__(self, other):
        return self.matrix @ other

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def shape(self):
        return self.matrix.shape


def weighted_norm(M, w_target, w_source=None):
    """Operator 2-norm of ``M`` between W-weighted spaces."""
    w_source = w_target if w_source is None else w_source
    Ms = np.sqrt(w_target)[:, None] * M / np.sqrt(w_source)[None, :]
    return float(np.linalg.norm(Ms, 2))


def weighted_inner(u, v, w):
    return complex(np.sum(w * u * np.conj(v)))


# --------------------------------------------------------------------------
# on-boundary matrices


def kress_log_weights(n):
    """Circulant weights R_j for the integral of ln(4 sin^2((t - s)/2)) f(s) ds.

    Exact for trigonometric polynomials of degree < n/2.
    """
    if n % 2:
        raise ValueError("Kress quadrature needs an even node count")
    half = n // 2
    tau = 2 * np.pi * np.arange(n) / n
    m = np.arange(1, half)
    col = -(4 * np.pi / n) * (np.cos(np.outer(tau, m)) / m).sum(axis=1)
    col -= (4 * np.pi / n**2) * np.cos(half * tau)
    return circulant(col)


def _pair_geometry(target_nodes, source_nodes):
    diff = target_nodes[:, None, :] - source_nodes[None, :, :]
    r2 = (diff**2).sum(-1)
    return diff, r2


def assemble_S_self(bnd):
    n = bnd.n
    R = kress_log_weights(n)
    dt = bnd.t[:, None] - bnd.t[None, :]
    diff, r2 = _pair_geometry(bnd.nodes, bnd.nodes)
    np.fill_diagonal(r2, 1.0)
    with np.errstate(divide="ignore"):
        smooth = 0.5 * np.log(r2) - 0.5 * np.log(4 * np.sin(dt / 2) ** 2 + np.eye(n))
    np.fill_diagonal(smooth, np.log(bnd.speeds))
    M = R * bnd.speeds[None, :] / (4 * np.pi) + smooth * bnd.weights[None, :] * INV_2PI
    return KernelMatrix(M, "S-self", bnd, bnd)


def assemble_Kstar_self(bnd):
    diff, r2 = _pair_geometry(bnd.nodes, bnd.nodes)
    np.fill_diagonal(r2, 1.0)
    num = (diff * bnd.normals[:, None, :]).sum(-1)
    M = INV_2PI * num / r2 * bnd.weights[None, :]
    np.fill_diagonal(M, bnd.curvatures * bnd.weights / (4 * np.pi))
    return KernelMatrix(M, "Kstar-self", bnd, bnd)


def assemble_K_self(bnd):
    """On-boundary double layer K, the W-adjoint of :func:`assemble_Kstar_self`."""
    diff, r2 = _pair_geometry(bnd.nodes, bnd.nodes)
    np.fill_diagonal(r2, 1.0)
    num = -(diff * bnd.normals[None, :, :]).sum(-1)
    M = INV_2PI * num / r2 * bnd.weights[None, :]
    np.fill_diagonal(M, bnd.curvatures * bnd.weights / (4 * np.pi))
    return KernelMatrix(M, "K-self", bnd, bnd)


def _check_separated(source, target):
    d2 = ((target.nodes[:, None, :] - source.nodes[None, :, :]) ** 2).sum(-1)
    h = max(source.weights.max(), target.weights.max())
    if np.sqrt(d2.min()) <= h:
        raise ValueError("source and target curves overlap or touch")


def assemble_S_cross(source, target):
    _check_separated(source, target)
    _, r2 = _pair_geometry(target.nodes, source.nodes)
    M = 0.5 * INV_2PI * np.log(r2) * source.weights[None, :]
    return KernelMatrix(M, "S-cross", source, target)


def assemble_dS_cross(source, target):
    """Normal derivative on ``target`` of the single layer living on ``source``."""
    _check_separated(source, target)
    diff, r2 = _pair_geometry(target.nodes, source.nodes)
    num = (diff * target.normals[:, None, :]).sum(-1)
    M = INV_2PI * num / r2 * source.weights[None, :]
    return KernelMatrix(M, "dS/dnu-cross", source, target)


def assemble_D_cross(source, target):
    """Double layer of ``source`` evaluated at ``target`` nodes."""
    _check_separated(source, target)
    diff, r2 = _pair_geometry(target.nodes, source.nodes)
    num = -(diff * source.normals[None, :, :]).sum(-1)
    M = INV_2PI * num / r2 * source.weights[None, :]
    return KernelMatrix(M, "D-cross", source, target)


# --------------------------------------------------------------------------
# off-boundary evaluation


def _as_points(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(1, 2) if x.ndim == 1 else x


def check_off_boundary(bnd, x, rel=NEAR_BOUNDARY_REL):
    dist, _ = distance_to_curve(bnd.curve, _as_points(x))
    bad = dist < rel * bnd.diameter
    if bad.any():
        raise NearBoundaryError(
            f"{int(bad.sum())} evaluation point(s) within {rel:g} x diameter of the curve"
        )


def _complex_diff(bnd, x):
    x = _as_points(x)
    X = x[:, 0] + 1j * x[:, 1]
    Y = bnd.nodes[:, 0] + 1j * bnd.nodes[:, 1]
    return X[:, None] - Y[None, :]


def single_layer_matrix(bnd, x):
    d = _complex_diff(bnd, x)
    return INV_2PI * np.log(np.abs(d)) * bnd.weights[None, :]


def grad_single_layer_matrices(bnd, x):
    """x- and y-components of the gradient kernel, weights included."""
    d = _complex_diff(bnd, x)
    # (x - y) / |x - y|^2 as a complex number is 1 / conj(x - y)
    k = (INV_2PI * bnd.weights)[None, :] / np.conj(d)
    return k.real, k.imag


def double_layer_matrix(bnd, x):
    d = _complex_diff(bnd, x)
    nu = bnd.normals[:, 0] + 1j * bnd.normals[:, 1]
    num = -(d.real * nu.real[None, :] + d.imag * nu.imag[None, :])
    return INV_2PI * num / np.abs(d) ** 2 * bnd.weights[None, :]


def eval_single_layer(bnd, density, x, check=True):
    if check:
        check_off_boundary(bnd, x)
    out = single_layer_matrix(bnd, x) @ np.asarray(density)
    return out[0] if np.ndim(x) == 1 else out


def eval_grad_single_layer(bnd, density, x, check=True):
    if check:
        check_off_boundary(bnd, x)
    gx, gy = grad_single_layer_matrices(bnd, x)
    phi = np.asarray(density)
    out = np.stack([gx @ phi, gy @ phi], axis=-1)
    return out[0] if np.ndim(x) == 1 else out


def eval_double_layer(bnd, density, x, check=True):
    if check:
        check_off_boundary(bnd, x)
    out = double_layer_matrix(bnd, x) @ np.asarray(density)
    return out[0] if np.ndim(x) == 1 else out


# --------------------------------------------------------------------------
# spectral interpolation of node densities


def fourier_upsample(values, m):
    """Trigonometric interpolation of equispaced periodic samples onto ``m`` points.

    The Nyquist coefficient is split evenly between +/- n/2 so that real data
    stays real.  ``values`` may carry extra trailing columns.
    """
    values = np.asarray(values)
    n = values.shape[0]
    if m == n:
        return values.copy()
    if m < n or m % 2 or n % 2:
        raise ValueError("upsampling needs even sizes with m >= n")
    c = np.fft.fft(values, axis=0)
    half = n // 2
    out = np.zeros((m,) + values.shape[1:], dtype=complex)
    out[:half] = c[:half]
    out[m - half + 1 :] = c[half + 1 :]
    out[half] = 0.5 * c[half]
    out[m - half] = 0.5 * c[half]
    res = np.fft.ifft(out, axis=0) * (m / n)
    return res.real if np.isrealobj(values) else res


def upsample(bnd, density, factor):
    """Refined discretization of the same curve together with the interpolated density."""
    if factor == 1:
        return bnd, np.asarray(density)
    fine = discretize(bnd.curve, bnd.n * int(factor))
    return fine, fourier_upsample(density, fine.n)


def trig_eval(values, s):
    """Evaluate the trigonometric interpolant of node samples at parameters ``s``.

    Uses the periodic cardinal function ``sin(N u / 2) cot(u / 2) / N`` of the
    even-length equispaced grid (Nyquist term split symmetrically); its value
    at ``u = 2 pi k`` is 1.
    """
    values = np.asarray(values)
    n = values.shape[0]
    s = np.asarray(s, dtype=float)
    tj = 2 * np.pi * np.arange(n) / n
    u = s[..., None] - tj
    half = 0.5 * u
    sn = np.sin(half)
    with np.errstate(divide="ignore", invalid="ignore"):
        card = np.sin(n * half) * np.cos(half) / (n * sn)
    card = np.where(np.abs(sn) < 1e-14, 1.0, card)
    return card @ values


# --------------------------------------------------------------------------
# near-boundary evaluation and the jump relations

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def graded_rule(h0):
    """Quadrature offsets/weights on [-pi, pi] geometrically graded towards 0.

    Panels [2^k h0, 2^(k+1) h0] on each side plus a central [-h0, h0] panel,
    16-point Gauss-Legendre on each.
    """
    h0 = min(h0, np.pi / 2)
    edges = [h0]
    while edges[-1] * 2 < np.pi:
        edges.append(edges[-1] * 2)
    edges.append(np.pi)
    pts = [h0 * _GL_X]
    wts = [h0 * _GL_W]
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for sign in (1, -1):
            pts.append(sign * (mid + half * _GL_X))
            wts.append(half * _GL_W)
    return np.concatenate(pts), np.concatenate(wts)


def near_layer_values(bnd, density, s0, offset, side):
    """Single layer normal derivative and double layer at ``x(s0) + side*offset*nu(s0)``.

    Accurate at distances far below the node spacing: the density is evaluated
    through its trigonometric interpolant on a rule graded towards ``s0``.
    Returns ``(dS/dnu, D)`` for each ``s0``.
    """
    curve = bnd.curve
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    speed0 = curve.speed(s0)
    u, wq = graded_rule(float(offset / speed0.max()))
    s = s0[:, None] + u[None, :]
    y = curve.position(s)
    ny = curve.normal(s)
    sy = curve.speed(s)
    nu0 = curve.normal(s0)
    x = curve.position(s0) + side * offset * nu0
    diff = x[:, None, :] - y
    r2 = (diff**2).sum(-1)
    phi = trig_eval(density, np.mod(s, 2 * np.pi))
    base = INV_2PI * wq[None, :] * sy * phi / r2
    dS = ((diff * nu0[:, None, :]).sum(-1) * base).sum(-1)
    D = (-(diff * ny).sum(-1) * base).sum(-1)
    return dS, D


@dataclass(frozen=True)
class JumpReport:
    """Residuals of the single- and double-layer jump relations at check nodes."""

    single_exterior: float
    single_interior: float
    double_exterior: float
    double_interior: float
    offsets: tuple

    @property
    def max_residual(self):
        return max(self.single_exterior, self.single_interior, self.double_exterior, self.double_interior)


def _extrapolate_to_zero(offsets, values):
    # Neville / Lagrange extrapolation of each column to t = 0
    t = np.asarray(offsets, dtype=float)
    lag = np.ones_like(t)
    for j in range(t.size):
        for m in range(t.size):
            if m != j:
                lag[j] *= t[m] / (t[m] - t[j])
    return np.tensordot(lag, values, axes=(0, 0))


def jump_check(bnd, density, offsets=None, check_nodes=None, Kstar=None, K=None):
    """Maximum residual of the jump relations for one density.

    One-sided values at ``x_j +/- t nu_j`` are extrapolated to ``t = 0`` and
    compared with ``(+/- 1/2 I + K*)[phi]`` and ``(-/+ 1/2 I + K)[phi]`` at the
    nodes.  Residuals are relative to ``max |phi|``.  By default 32 evenly
    spaced nodes are checked.
    """
    phi = np.asarray(density)
    if offsets is None:
        offsets = bnd.diameter * np.array([1e-3, 5e-4, 2.5e-4, 1.25e-4])
    offsets = tuple(float(o) for o in offsets)
    if check_nodes is None:
        check_nodes = np.arange(0, bnd.n, max(1, bnd.n // 32))
    idx = np.asarray(check_nodes)
    Kstar = assemble_Kstar_self(bnd).matrix if Kstar is None else np.asarray(Kstar)
    K = assemble_K_self(bnd).matrix if K is None else np.asarray(K)
    ks_phi = (Kstar @ phi)[idx]
    k_phi = (K @ phi)[idx]
    scale = max(np.abs(phi).max(), 1e-300)
    res = {}
    for side, label in ((1, "exterior"), (-1, "interior")):
        vals = [near_layer_values(bnd, phi, bnd.t[idx], t, side) for t in offsets]
        dS0 = _extrapolate_to_zero(offsets, np.array([v[0] for v in vals]))
        D0 = _extrapolate_to_zero(offsets, np.array([v[1] for v in vals]))
        res["single_" + label] = float(np.abs(dS0 - (side * 0.5 * phi[idx] + ks_phi)).max() / scale)
        res["double_" + label] = float(np.abs(D0 - (-side * 0.5 * phi[idx] + k_phi)).max() / scale)
    return JumpReport(offsets=offsets, **res)
