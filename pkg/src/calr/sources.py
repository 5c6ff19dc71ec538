"""Charge-conserving sources, their Newtonian potentials and boundary data.

Point sources are evaluated through the complex-variable form of the
fundamental solution: with ``X = x1 + i x2``,
``G(x - y) = Re log(X - Y) / (2 pi)``, so the dipole, quadrupole and charge
potentials are real parts of explicit holomorphic functions.  The same
expansions give the Fourier coefficients of ``-dF/dr`` on a circle in closed
form.

A coefficient sequence ``{g_n}`` describes ``F = -sum_n g_n r^|n| e^(i n theta) /
(|n| r_e^(|n|-1))`` inside the circle of radius ``r_e`` (additive constant
dropped).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .geometry import Circle, distance_to_curve, locate
from .utils.validation import check_point, check_points

SINGULAR_DISTANCE = 1e-8


class SourceError(ValueError):
    """Invalid source parameters or evaluation at a singular point."""


# --------------------------------------------------------------------------
# coefficient sequences


@dataclass(frozen=True, eq=False)
class CoeffSequence:
    """Sparse Fourier coefficients ``g_n`` (n != 0) stored as log-modulus and phase.

    Lacunary sequences such as ``n rho^(n/2)`` at ``n = 2^j`` underflow double
    precision long before the indices stop being meaningful, hence the log
    representation.  A zero coefficient has ``log_abs = -inf``.

    Parameters
    ----------
    n : array of int
        Nonzero mode indices, strictly increasing.
    log_abs, phase : array of float
    noise_floor : float
        Coefficients with ``|g_n| <= noise_floor`` are unresolved (FFT data).
    realizability : str or None
        Provenance note for coefficient-defined sources.
    """

    n: np.ndarray
    log_abs: np.ndarray
    phase: np.ndarray
    noise_floor: float = 0.0
    realizability: str | None = None

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.int64)
        la = np.asarray(self.log_abs, dtype=float)
        ph = np.asarray(self.phase, dtype=float)
        if n.ndim != 1 or la.shape != n.shape or ph.shape != n.shape:
            raise ValueError("n, log_abs and phase must be 1-D arrays of equal length")
        if np.any(n == 0):
            raise ValueError("the n = 0 mode is not part of a coefficient sequence")
        if n.size > 1 and np.any(np.diff(n) <= 0):
            raise ValueError("mode indices must be strictly increasing")
        if np.any(np.isnan(la)) or np.any(la == np.inf):
            raise ValueError("log-moduli must be finite or -inf")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "log_abs", la)
        object.__setattr__(self, "phase", np.where(np.isfinite(la), ph, 0.0))
        if not np.isfinite(self.l2_log_norm()) and np.any(np.isfinite(la)):
            raise ValueError("coefficient sequence has infinite l2 norm")

    @classmethod
    def from_values(cls, n, values, **kw):
        values = np.asarray(values, dtype=complex)
        n = np.asarray(n, dtype=np.int64)
        order = np.argsort(n)
        n, values = n[order], values[order]
        with np.errstate(divide="ignore"):
            la = np.log(np.abs(values))
        return cls(n, la, np.angle(values), **kw)

    @classmethod
    def from_dict(cls, mapping, **kw):
        keys = sorted(int(k) for k in mapping)
        return cls.from_values(keys, [complex(mapping[k] if k in mapping else mapping[str(k)]) for k in keys], **kw)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0))

    @property
    def values(self):
        with np.errstate(under="ignore"):
            return np.exp(self.log_abs) * np.exp(1j * self.phase)

    @property
    def n_max(self):
        return int(np.abs(self.n).max()) if self.n.size else 0

    def __len__(self):
        return int(self.n.size)

    def get(self, n):
        idx = np.searchsorted(self.n, n)
        if idx < self.n.size and self.n[idx] == n:
            return complex(self.values[idx])
        return 0.0j

    def l2_log_norm(self):
        """log of the l2 norm (``-inf`` for the zero sequence)."""
        la = self.log_abs[np.isfinite(self.log_abs)]
        if la.size == 0:
            return -np.inf
        return 0.5 * float(np.logaddexp.reduce(2 * la))

    def resolved(self):
        """Mask of coefficients above the noise floor and nonzero."""
        ok = np.isfinite(self.log_abs)
        if self.noise_floor > 0:
            ok &= self.log_abs > np.log(self.noise_floor)
        return ok

    def restrict(self, n_max):
        keep = np.abs(self.n) <= n_max
        return CoeffSequence(self.n[keep], self.log_abs[keep], self.phase[keep], self.noise_floor, self.realizability)

    def positive(self):
        keep = self.n > 0
        return CoeffSequence(self.n[keep], self.log_abs[keep], self.phase[keep], self.noise_floor, self.realizability)

    def to_dict(self):
        return {
            "n": [int(v) for v in self.n],
            "log_abs": [float(v) for v in self.log_abs],
            "phase": [float(v) for v in self.phase],
            "noise_floor": self.noise_floor,
            "realizability": self.realizability,
        }


# --------------------------------------------------------------------------
# source variants


def _log_terms(n, c, log_pos, Y, power):
    """Log-modulus and phase of ``c exp(log_pos) Y^(-power) / (4 pi)``."""
    with np.errstate(divide="ignore"):
        la = np.log(abs(c)) + log_pos - power * np.log(abs(Y)) - np.log(4 * np.pi)
    ph = np.angle(c) - power * np.angle(Y)
    return n, la, ph


def _cplx(x):
    return x[:, 0] + 1j * x[:, 1]


def _grad_from_holomorphic(hp):
    # u = Re h  =>  grad u = (Re h', -Im h')
    return np.stack([hp.real, -hp.imag], axis=-1)


@dataclass(frozen=True)
class SourceSpec:
    """Base class; subclasses implement :meth:`potential`."""

    kind = "source"

    def potential(self, x):
        """Return ``(F(x), grad F(x))`` at points of shape (m, 2)."""
        raise NotImplementedError

    def singular_points(self):
        """Points where the potential is singular (empty for smooth sources)."""
        return np.zeros((0, 2))

    @property
    def support_radius(self):
        """Smallest |y| over the singular support (or support) of f."""
        pts = self.singular_points()
        return float(np.linalg.norm(pts, axis=1).min()) if pts.size else np.inf

    def _check_regular(self, x):
        pts = self.singular_points()
        if pts.size:
            d = np.linalg.norm(x[:, None, :] - pts[None, :, :], axis=-1)
            if np.any(d < SINGULAR_DISTANCE):
                raise SourceError("potential evaluated at a singular point of the source")

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Dipole(SourceSpec):
    """``f = a . grad delta_y``, so ``F(x) = a . grad G(x - y)``."""

    y: tuple = (3.0, 0.0)
    a: tuple = (1.0, 0.0)

    kind = "dipole"

    def __post_init__(self):
        object.__setattr__(self, "y", tuple(check_point(self.y)))
        object.__setattr__(self, "a", tuple(check_point(self.a)))

    @property
    def alpha(self):
        return complex(self.a[0], self.a[1])

    def singular_points(self):
        return np.array([self.y])

    def potential(self, x):
        x = check_points(x)
        self._check_regular(x)
        d = _cplx(x) - complex(*self.y)
        h = self.alpha / (2 * np.pi * d)
        return h.real, _grad_from_holomorphic(-self.alpha / (2 * np.pi * d**2))

    def closed_form_coeffs(self, r_e, n_max):
        """``g_n = n r_e^(n-1) alpha Y^(-n-1) / (4 pi)`` for ``n = 1..n_max`` in log form."""
        n = np.arange(1, n_max + 1)
        Y = complex(*self.y)
        return _log_terms(n, self.alpha, np.log(n) + (n - 1) * np.log(r_e), Y, n + 1)

    def to_dict(self):
        return {"kind": "dipole", "y": list(self.y), "a": list(self.a)}


@dataclass(frozen=True)
class Quadrupole(SourceSpec):
    """``f = sum_ij A_ij d_i d_j delta_y``, so ``F = sum_ij A_ij d_i d_j G(x - y)``.

    No trace removal: ``A = I`` gives the zero potential.
    """

    y: tuple = (3.0, 0.0)
    A: tuple = ((1.0, 0.0), (0.0, 0.0))

    kind = "quadrupole"

    def __post_init__(self):
        object.__setattr__(self, "y", tuple(check_point(self.y)))
        A = np.asarray(self.A, dtype=float)
        if A.shape != (2, 2) or not np.all(np.isfinite(A)):
            raise SourceError("quadrupole matrix must be a finite 2x2 array")
        object.__setattr__(self, "A", tuple(map(tuple, A)))

    @property
    def beta(self):
        A = self.A
        return complex(A[0][0] - A[1][1], A[0][1] + A[1][0])

    def singular_points(self):
        return np.array([self.y])

    def potential(self, x):
        x = check_points(x)
        self._check_regular(x)
        d = _cplx(x) - complex(*self.y)
        h = -self.beta / (2 * np.pi * d**2)
        return h.real, _grad_from_holomorphic(self.beta / (np.pi * d**3))

    def closed_form_coeffs(self, r_e, n_max):
        """``g_n = n (n+1) r_e^(n-1) beta Y^(-n-2) / (4 pi)`` in log form."""
        n = np.arange(1, n_max + 1)
        Y = complex(*self.y)
        return _log_terms(n, self.beta, np.log(n * (n + 1.0)) + (n - 1) * np.log(r_e), Y, n + 2)

    def to_dict(self):
        return {"kind": "quadrupole", "y": list(self.y), "A": [list(r) for r in self.A]}


@dataclass(frozen=True)
class ChargeCollection(SourceSpec):
    """Point charges ``f = sum_k q_k delta_(y_k)`` with exactly vanishing total charge.

    Charges are summed as exact decimals (``Fraction(str(q))``), so
    ``0.1 + 0.2 - 0.3`` counts as neutral.
    """

    points: tuple = ()
    charges: tuple = ()

    kind = "charge-collection"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        q = tuple(self.charges)
        if pts.shape[0] != len(q) or len(q) == 0:
            raise SourceError("need one charge per point and at least one charge")
        total = sum(Fraction(str(c)) for c in q)
        if total != 0:
            raise SourceError(f"total charge must vanish exactly, got {total}")
        object.__setattr__(self, "points", tuple(map(tuple, pts)))
        object.__setattr__(self, "charges", tuple(float(c) for c in q))

    def singular_points(self):
        return np.array(self.points)

    def potential(self, x):
        x = check_points(x)
        self._check_regular(x)
        X = _cplx(x)
        F = np.zeros(X.shape)
        hp = np.zeros(X.shape, dtype=complex)
        for (p1, p2), q in zip(self.points, self.charges):
            d = X - complex(p1, p2)
            F += q * np.log(np.abs(d)) / (2 * np.pi)
            hp += q / (2 * np.pi * d)
        return F, _grad_from_holomorphic(hp)

    def closed_form_coeffs(self, r_e, n_max):
        """``g_n = r_e^(n-1) sum_k q_k Y_k^(-n) / (4 pi)`` in log form."""
        n = np.arange(1, n_max + 1)
        parts = [
            _log_terms(n, q, (n - 1) * np.log(r_e), complex(p1, p2), n)
            for (p1, p2), q in zip(self.points, self.charges)
        ]
        la = np.array([p[1] for p in parts])
        ph = np.array([p[2] for p in parts])
        shift = la.max(axis=0)
        with np.errstate(under="ignore", invalid="ignore"):
            acc = np.sum(np.exp(la - shift) * np.exp(1j * ph), axis=0)
            tot = np.where(np.isfinite(shift), np.log(np.abs(acc)) + shift, -np.inf)
        return n, np.where(np.isnan(tot), -np.inf, tot), np.angle(acc)

    def to_dict(self):
        return {"kind": "charge-collection", "points": [list(p) for p in self.points], "charges": list(self.charges)}


def coefficient_series(coeffs, r_e, x, tail_tol=1e-12, check_tail=True):
    """``F`` and ``grad F`` from ``-sum g_n r^|n| e^(in theta) / (|n| r_e^(|n|-1))``.

    Raises :class:`SourceError` when the last stored terms are not negligible at
    the evaluation radius (the truncated series would not be converged).
    """
    x = check_points(x)
    ok = np.isfinite(coeffs.log_abs)
    n = coeffs.n[ok]
    la, ph = coeffs.log_abs[ok], coeffs.phase[ok]
    if n.size == 0:
        return np.zeros(x.shape[0], dtype=complex), np.zeros((x.shape[0], 2), dtype=complex)
    m = np.abs(n).astype(float)
    r = np.maximum(np.hypot(x[:, 0], x[:, 1]), 1e-300)
    theta = np.arctan2(x[:, 1], x[:, 0])
    # term magnitude log: log|g| + m log r - log m - (m - 1) log r_e
    logmag = la[None, :] + np.outer(np.log(r), m) - np.log(m)[None, :] - (m - 1)[None, :] * np.log(r_e)
    if check_tail:
        k = max(1, min(8, n.size // 8))
        tail = np.sort(np.abs(n))[-k:]
        tail_sel = np.isin(np.abs(n), tail)
        peak = logmag.max(axis=1)
        worst = (logmag[:, tail_sel].max(axis=1) - peak).max()
        if worst > np.log(tail_tol):
            raise SourceError(
                f"coefficient series not converged at the evaluation radius: "
                f"tail/peak term ratio {np.exp(worst):.3e}"
            )
    with np.errstate(under="ignore"):
        phase = np.exp(1j * (ph[None, :] + np.outer(theta, n)))
        terms = np.exp(logmag) * phase
        F = -terms.sum(axis=1)
        # d/dr and (1/r) d/dtheta of each term, rotated to Cartesian
        dr = (terms * m[None, :]).sum(axis=1) / r
        dth = (terms * (1j * n)[None, :]).sum(axis=1) / r
    c, s = np.cos(theta), np.sin(theta)
    grad = -np.stack([dr * c - dth * s, dr * s + dth * c], axis=-1)
    return F, grad


@dataclass(frozen=True)
class FourierCoeffs(SourceSpec):
    """Source given only through its coefficients on ``|x| = r_e`` (annulus only).

    Whether the data come from a source not surrounding the annulus is not
    known in general; ``realizability`` records the construction the verdict
    relies on.
    """

    coeffs: CoeffSequence = field(default_factory=CoeffSequence.empty)
    r_e: float = 1.0
    realizability: str = "shell-bump-only"

    kind = "fourier-coeffs"

    def potential(self, x):
        return coefficient_series(self.coeffs, self.r_e, x)

    def to_dict(self):
        return {"kind": "fourier-coeffs", "r_e": self.r_e, "realizability": self.realizability, "coeffs": self.coeffs.to_dict()}


def smoothstep5(u):
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10 - 15 * u + 6 * u**2)


def smoothstep5_deriv(u):
    inside = (u > 0) & (u < 1)
    return np.where(inside, 30 * u**2 * (1 - u) ** 2, 0.0)


@dataclass(frozen=True)
class ShellBump(SourceSpec):
    """Coefficient-defined potential truncated by a radial cutoff.

    ``F~ = tau(|x|) F(x)`` with ``tau = 1`` for ``r < r1`` and ``0`` for
    ``r > r2`` (quintic smoothstep in between), so ``f~ = Laplace F~`` lives in
    ``r1 <= |x| <= r2``.
    """

    coeffs: CoeffSequence = field(default_factory=CoeffSequence.empty)
    r_e: float = 2.0
    r1: float = 2.2
    r2: float = 2.6
    r_star: float = 2.8284271247461903

    kind = "shell-bump"

    def __post_init__(self):
        if not (self.r_e < self.r1 < self.r2 < self.r_star):
            raise SourceError(
                f"shell-bump radii must satisfy r_e < r1 < r2 < r_*, got "
                f"{(self.r_e, self.r1, self.r2, self.r_star)}"
            )

    @property
    def support_radius(self):
        return self.r1

    def tau(self, r):
        return 1.0 - smoothstep5((np.asarray(r) - self.r1) / (self.r2 - self.r1))

    def potential(self, x):
        x = check_points(x)
        r = np.hypot(x[:, 0], x[:, 1])
        F = np.zeros(x.shape[0], dtype=complex)
        grad = np.zeros((x.shape[0], 2), dtype=complex)
        live = r < self.r2
        if live.any():
            Fs, gs = coefficient_series(self.coeffs, self.r_e, x[live])
            w = self.r2 - self.r1
            tau = self.tau(r[live])
            dtau = -smoothstep5_deriv((r[live] - self.r1) / w) / w
            rhat = x[live] / np.maximum(r[live], 1e-300)[:, None]
            F[live] = tau * Fs
            grad[live] = tau[:, None] * gs + (dtau * Fs)[:, None] * rhat
        return F, grad

    def to_dict(self):
        return {"kind": "shell-bump", "r_e": self.r_e, "r1": self.r1, "r2": self.r2, "r_star": self.r_star, "coeffs": self.coeffs.to_dict()}


def newtonian_potential(source, x):
    """``(F(x), grad F(x))`` for any source variant."""
    return source.potential(x)


# --------------------------------------------------------------------------
# boundary data and Fourier coefficients


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Right-hand side ``g = (dF/dnu_i, -dF/dnu_e)`` at the nodes."""

    g_i: np.ndarray
    g_e: np.ndarray
    coeffs_e: CoeffSequence | None = None
    coeffs_i: CoeffSequence | None = None

    @property
    def stacked(self):
        return np.concatenate([self.g_i, self.g_e])


def _check_clear(source, geometry):
    pts = source.singular_points()
    if pts.size == 0:
        if source.support_radius <= geometry.outer.max_radius():
            raise SourceError("source support intersects the closed outer domain")
        return
    for curve in (geometry.inner, geometry.outer):
        dist, _ = distance_to_curve(curve, pts)
        if np.any(dist < SINGULAR_DISTANCE):
            raise SourceError("source singular support lies on an interface")
    if np.any(locate(geometry.outer, pts) == 1):
        raise SourceError("point sources must lie outside the closed outer domain")


def boundary_data(source, geometry, with_coeffs=True):
    _check_clear(source, geometry)
    bi, be = geometry.inner_bnd, geometry.outer_bnd
    _, dFi = source.potential(bi.nodes)
    _, dFe = source.potential(be.nodes)
    g_i = (dFi * bi.normals).sum(-1)
    g_e = -(dFe * be.normals).sum(-1)
    ce = ci = None
    if with_coeffs and geometry.is_concentric_annulus() and geometry.outer.center == (0.0, 0.0):
        ce = _fft_coeffs(g_e, be.n // 2 - 1)
        ci = _fft_coeffs(g_i, bi.n // 2 - 1)
    return BoundaryData(g_i, g_e, ce, ci)


def _fft_coeffs(samples, n_max):
    c = np.fft.fft(samples) / samples.size
    n = np.concatenate([np.arange(-n_max, 0), np.arange(1, n_max + 1)])
    vals = c[n % samples.size]
    floor = 64 * np.finfo(float).eps * max(np.abs(c).max(), 1e-300)
    return CoeffSequence.from_values(n, vals, noise_floor=floor)


def fourier_coeffs(source, r_e, n_max, method="auto", n_samples=None):
    """Coefficients ``g_e^n`` of ``-dF/dr`` on ``|x| = r_e`` for ``1 <= |n| <= n_max``.

    ``method`` is ``"closed"`` (point sources), ``"fft"`` (sampled boundary
    data, subject to the alias limit) or ``"auto"``.  Coefficient-defined
    variants return their stored sequence.
    """
    if isinstance(source, (FourierCoeffs, ShellBump)):
        if not np.isclose(source.r_e, r_e):
            raise SourceError("coefficient source defined for a different outer radius")
        return source.coeffs.restrict(n_max)
    if method == "auto":
        method = "closed" if hasattr(source, "closed_form_coeffs") else "fft"
    if method == "closed":
        if source.support_radius <= r_e:
            raise SourceError("closed-form expansion needs the source outside |x| = r_e")
        n, la, ph = source.closed_form_coeffs(r_e, n_max)
        # real potentials: g_(-n) = conj(g_n)
        return CoeffSequence(
            np.concatenate([-n[::-1], n]),
            np.concatenate([la[::-1], la]),
            np.concatenate([-ph[::-1], ph]),
        )
    if method != "fft":
        raise ValueError(f"unknown coefficient method {method!r}")
    m = n_samples or max(64, 4 * (n_max + 1))
    if n_max > m // 2 - 1:
        raise SourceError(f"n_max = {n_max} beyond the alias limit {m // 2 - 1} of {m} samples")
    t = 2 * np.pi * np.arange(m) / m
    circle = Circle(radius=r_e)
    _, dF = source.potential(circle.position(t))
    samples = -(dF * circle.normal(t)).sum(-1)
    return _fft_coeffs(samples, n_max)
