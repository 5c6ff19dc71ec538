"""Closed-form oracle for the concentric annulus ``r_i < |x| < r_e``.

Every operator is diagonal in the Fourier basis ``e^(in theta)``, so the
transmission problem decouples into 2x2 systems per mode.  Sources are
described by the coefficients ``g_n`` of ``-dF/dr`` on ``|x| = r_e``; for a
source harmonic in ``B_{r_e}`` the inner data follow as
``g_i^n = -rho^(|n|-1) g_n``.

Powers ``rho^|n|`` are evaluated in the log domain where they could underflow.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .classification import ClassifierThresholds, gp_classify
from .npsystem import z_delta
from .sources import CoeffSequence, FourierCoeffs, ShellBump, SourceSpec, fourier_coeffs
from .utils.validation import check_delta, check_points
from .verdict import Verdict

logger = logging.getLogger(__name__)

DELTA0 = 0.1


@dataclass(frozen=True)
class AnnulusConfig:
    r_i: float
    r_e: float

    def __post_init__(self):
        if not (0 < self.r_i < self.r_e) or not np.isfinite(self.r_e):
            raise ValueError(f"annulus needs 0 < r_i < r_e, got {(self.r_i, self.r_e)}")
        if not (self.r_e < self.r_star < self.a):
            raise ValueError("radius ordering r_e < r_* < a violated")

    @property
    def rho(self):
        return self.r_i / self.r_e

    @property
    def log_rho(self):
        return float(np.log(self.r_i) - np.log(self.r_e))

    @property
    def r_star(self):
        """Critical (cloaking) radius sqrt(r_e^3 / r_i)."""
        return float(np.sqrt(self.r_e**3 / self.r_i))

    @property
    def a(self):
        """Boundedness radius r_e^2 / r_i."""
        return self.r_e**2 / self.r_i

    def to_dict(self):
        return {"r_i": self.r_i, "r_e": self.r_e, "rho": self.rho, "r_star": self.r_star, "a": self.a}


# --------------------------------------------------------------------------
# mode solutions


@dataclass(frozen=True)
class ModeSolution:
    n: int
    phi_i: complex
    phi_e: complex
    z: complex

    def residual(self, g_i, g_e, config):
        """Relative residual of the 2x2 mode system."""
        m = abs(self.n)
        rho = config.rho
        r1 = self.z * self.phi_i + 0.5 * rho ** (m - 1) * self.phi_e - g_i
        r2 = self.z * self.phi_e + 0.5 * rho ** (m + 1) * self.phi_i - g_e
        scale = max(abs(g_i) + abs(g_e), 1e-300)
        return float(max(abs(r1), abs(r2)) / scale)


def mode_system_matrix(n, z, config):
    m = abs(n)
    rho = config.rho
    return np.array([[z, 0.5 * rho ** (m - 1)], [0.5 * rho ** (m + 1), z]])


def mode_solve(n, delta, g_i, g_e, config):
    """Closed-form solution of ``(z I + KK*_n) (phi_i, phi_e) = (g_i, g_e)`` for one mode."""
    if int(n) != n or n == 0:
        raise ValueError(f"mode index must be a nonzero integer, got {n}")
    delta = check_delta(delta)
    z = complex(z_delta(delta))
    m = abs(int(n))
    p2 = np.exp(2 * m * config.log_rho)
    den = 4 * z * z - p2
    if abs(den) < 1e-300:
        raise FloatingPointError(f"mode {n}: |4 z^2 - rho^(2|n|)| underflows")
    pm = np.exp((m - 1) * config.log_rho)
    pp = np.exp((m + 1) * config.log_rho)
    phi_i = 2 * (2 * z * g_i - pm * g_e) / den
    phi_e = 2 * (2 * z * g_e - pp * g_i) / den
    return ModeSolution(int(n), complex(phi_i), complex(phi_e), z)


def harmonic_inner_data(n, g_e, config):
    """``g_i^n = -rho^(|n|-1) g_e^n`` for sources harmonic inside ``B_{r_e}``."""
    return -np.exp((np.abs(n) - 1) * config.log_rho) * g_e


def _log_z(delta):
    """Complex log of ``z_delta``, exact even where ``z`` itself underflows."""
    return np.log(delta) + 0.5j * np.pi - np.log(2.0) - np.log(2.0 - 1j * delta)


def _scaled_denominator(delta, m, config):
    """``(ls, (4 z^2 - rho^(2m)) / e^ls)`` with ``ls = log max(|4 z^2|, rho^(2m))``.

    Keeps the mode denominators representable when both terms underflow.
    """
    lr2 = 2 * m * config.log_rho
    l4z2 = np.log(4.0) + 2 * _log_z(delta)
    ls = np.maximum(l4z2.real, lr2)
    with np.errstate(under="ignore"):
        den_s = np.exp(l4z2 - ls) - np.exp(lr2 - ls)
    return ls, den_s


def _mode_densities(coeffs, delta, config):
    """Vectorized mode solve for an exterior-harmonic coefficient sequence.

    Returns ``(n, phi_i, phi_e, z)`` with underflowing terms flushed to zero.
    """
    z = complex(z_delta(delta))
    ok = np.isfinite(coeffs.log_abs)
    n = coeffs.n[ok]
    m = np.abs(n).astype(float)
    ls, den_s = _scaled_denominator(delta, m, config)
    lg = coeffs.log_abs[ok] + 1j * coeffs.phase[ok]
    # 2z + rho^2m, written as e^ln * num_s so that no intermediate overflows
    lr2 = 2 * m * config.log_rho
    l2z = np.log(2.0) + _log_z(delta)
    ln = np.maximum(l2z.real, lr2)
    with np.errstate(under="ignore"):
        num_s = np.exp(l2z - ln) + np.exp(lr2 - ln)
        phi_i = -2 * (2 * z + 1) * np.exp((m - 1) * config.log_rho + lg - ls) / den_s
        phi_e = 2 * num_s * np.exp(ln + lg - ls) / den_s
    return n, phi_i, phi_e, z


# --------------------------------------------------------------------------
# field series


def _region_factors(n, r, config):
    """Per-point, per-mode radial factors of S_i[e^(in t)] and S_e[e^(in t)]."""
    m = np.abs(n).astype(float)[None, :]
    r = r[:, None]
    ri, re = config.r_i, config.r_e
    with np.errstate(under="ignore", divide="ignore"):
        # (r_</r_>)^m on either side of each interface
        fi = -(ri / (2 * m)) * np.exp(-m * np.abs(np.log(r / ri)))
        fe = -(re / (2 * m)) * np.exp(-m * np.abs(np.log(r / re)))
    return fi, fe


def layer_series(x, delta, coeffs, config, tail_tol=1e-12, gradient=False):
    """``S_i[phi_i] + S_e[phi_e]`` (that is ``V_delta - F``) at points ``x``.

    With ``gradient=True`` also returns the Cartesian gradient, shape (m, 2).
    """
    x = check_points(x)
    delta = check_delta(delta)
    r = np.hypot(x[:, 0], x[:, 1])
    if np.any(np.isclose(r, config.r_i, rtol=1e-12, atol=0)) or np.any(np.isclose(r, config.r_e, rtol=1e-12, atol=0)):
        raise ValueError("field series evaluated on an interface")
    n, phi_i, phi_e, _ = _mode_densities(coeffs, delta, config)
    if n.size == 0:
        zero = np.zeros(x.shape[0], dtype=complex)
        return (zero, np.zeros((x.shape[0], 2), dtype=complex)) if gradient else zero
    theta = np.arctan2(x[:, 1], x[:, 0])
    fi, fe = _region_factors(n, r, config)
    ang = np.exp(1j * np.outer(theta, n))
    terms = (fi * phi_i[None, :] + fe * phi_e[None, :]) * ang
    _check_series_tail(n, np.abs(terms), tail_tol)
    V = terms.sum(axis=1)
    if not gradient:
        return V
    # each radial factor is c r^(+/-m): d/dr = (+/-m / r) * factor
    m = np.abs(n).astype(float)[None, :]
    rr = r[:, None]
    si = np.where(rr >= config.r_i, -1.0, 1.0)
    se = np.where(rr >= config.r_e, -1.0, 1.0)
    dterms = (si * fi * phi_i[None, :] + se * fe * phi_e[None, :]) * m * ang
    dr = dterms.sum(axis=1) / r
    dth = (terms * (1j * n)[None, :]).sum(axis=1) / r
    c, s_ = np.cos(theta), np.sin(theta)
    return V, np.stack([dr * c - dth * s_, dr * s_ + dth * c], axis=-1)


def _check_series_tail(n, mags, tail_tol):
    if n.size < 8:
        return
    m = np.abs(n)
    k = max(1, min(8, n.size // 8))
    top = np.sort(np.unique(m))[-k:]
    tail = mags[:, np.isin(m, top)].max(axis=1)
    total = mags.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(total > 0, tail / total, 0.0)
    if np.any(ratio > tail_tol):
        raise ValueError(
            f"mode series not converged: tail/sum ratio {ratio.max():.3e} exceeds {tail_tol:g}"
        )


def field_series(x, delta, coeffs, config, source=None, tail_tol=1e-12):
    """``V_delta(x)`` from the mode expansion in every region.

    ``F`` is taken from ``source`` when given; otherwise from the coefficient
    series (modulo constants), which must converge at ``|x|``.
    """
    from .sources import coefficient_series

    x = check_points(x)
    v = layer_series(x, delta, coeffs, config, tail_tol)
    if source is not None:
        F = source.potential(x)[0]
    else:
        F = coefficient_series(coeffs, config.r_e, x, tail_tol)[0]
    return F + v


# --------------------------------------------------------------------------
# energies


@dataclass(frozen=True)
class EnergySeries:
    """Series estimate, exact full energy and exact layer-part energy at one delta."""

    delta: float
    series: float
    exact: float
    exact_layer: float
    n_terms: int
    tail_ratio: float


def _log_g2(coeffs):
    ok = np.isfinite(coeffs.log_abs)
    return coeffs.n[ok], 2 * coeffs.log_abs[ok]


def energy_series(delta, coeffs, config, delta0=DELTA0):
    """Mode sums for the energy dissipated in the shell.

    ``series`` is ``sum_n delta |g_n|^2 / (|n| (delta^2 + rho^(2|n|)))``.
    ``exact`` is ``delta int_shell |grad V|^2`` summed mode by mode:
    ``2 pi delta r_e^2 sum |2z+1|^2 (1 - rho^2m)(rho^2m + 4|z|^2) |g|^2 / (m |rho^2m - 4z^2|^2)``.
    ``exact_layer`` is the same for ``V - F`` alone.
    """
    delta = check_delta(delta)
    if delta > delta0:
        warnings.warn(f"delta = {delta:g} above the validity threshold {delta0:g} of the series estimate")
    n, lg2 = _log_g2(coeffs)
    if n.size == 0:
        return EnergySeries(delta, 0.0, 0.0, 0.0, 0, 0.0)
    m = np.abs(n).astype(float)
    lr2 = 2 * m * config.log_rho
    log_s = np.log(delta) + lg2 - np.log(m) - np.logaddexp(2 * np.log(delta), lr2)
    z = complex(z_delta(delta))
    ls, den_s = _scaled_denominator(delta, m, config)
    with np.errstate(under="ignore"):
        p2 = np.exp(lr2)
        # (rho^2m + 4|z|^2) |g|^2 / |rho^2m - 4 z^2|^2 with both factors scaled by e^-ls
        num_s = np.exp(lr2 - ls) + np.exp(np.log(4.0) + 2 * _log_z(delta).real - ls)
        shape_g2 = np.abs(2 * z + 1) ** 2 * (1 - p2) * num_s * np.exp(lg2 - ls) / np.abs(den_s) ** 2
        series_terms = np.exp(log_s)
        exact_terms = 2 * np.pi * delta * config.r_e**2 * shape_g2 / m
    n_, phi_i, phi_e, _ = _mode_densities(coeffs, delta, config)
    a = -config.r_i * phi_i / (2 * m)
    b = -config.r_e * phi_e / (2 * m)
    layer_terms = 2 * np.pi * delta * m * (np.abs(a) ** 2 + np.abs(b) ** 2) * (1 - p2)
    total = series_terms.sum()
    tail = series_terms[np.argsort(m)[-1]] / total if total > 0 else 0.0
    return EnergySeries(
        delta=delta,
        series=float(total),
        exact=float(exact_terms.sum()),
        exact_layer=float(layer_terms.sum()),
        n_terms=int(n.size),
        tail_ratio=float(tail),
    )


def source_shell_energy(coeffs, config):
    """``int_shell |grad F|^2 = 2 pi r_e^2 sum |g_n|^2 (1 - rho^2m) / m`` for source-free F in the shell."""
    n, lg2 = _log_g2(coeffs)
    if n.size == 0:
        return 0.0
    m = np.abs(n).astype(float)
    with np.errstate(under="ignore"):
        return float(2 * np.pi * config.r_e**2 * np.sum(np.exp(lg2) * -np.expm1(2 * m * config.log_rho) / m))


def energy_sweep(deltas, coeffs, config, **kw):
    return [energy_series(d, coeffs, config, **kw) for d in deltas]


# --------------------------------------------------------------------------
# spectrum


def analytic_A_eigenvalues(config, n_max):
    """``+/- rho^n / 2`` for ``n = 1..n_max``, each twice, by decreasing modulus."""
    if int(n_max) != n_max or n_max < 1:
        raise ValueError("n_max must be a positive integer")
    n = np.arange(1, int(n_max) + 1)
    mag = 0.5 * np.exp(n * config.log_rho)
    return np.repeat(np.stack([mag, -mag], axis=1).ravel(), 2)


# --------------------------------------------------------------------------
# classification


def log_q_trace(coeffs, config):
    """``log q_m = log(|g|^2 / (m rho^m))`` per ``m = |n|`` (max over signs)."""
    ok = coeffs.resolved()
    n = np.abs(coeffs.n[ok])
    if n.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    lq = 2 * coeffs.log_abs[ok] - np.log(n) - n * config.log_rho
    ms = np.unique(n)
    out = np.full(ms.size, -np.inf)
    np.maximum.at(out, np.searchsorted(ms, n), lq)
    return ms, out


def classify(coeffs, config, thresholds=None):
    """CALR / WeakCALR / NoCALR / Inconclusive from the coefficient growth.

    * GP test: along consecutive resolved modes ``m_k``, the products
      ``p_k = rho^(m_(k+1) - m_k) q_(m_k)``; CALR when at least
      ``min_witnesses`` modes in the upper third of the range have
      ``p_k > growth`` and ``log p`` trends upward there.
    * WeakCALR: ``max q > growth`` and the upper half of the range reaches a
      higher ``q`` than the lower half, while GP fails.
    * NoCALR: the fitted per-mode ratio ``exp(b)`` is below one with the
      confidence band excluding one.
    """
    ms, lq = log_q_trace(coeffs, config)
    evidence = {"r_star": config.r_star, "a": config.a, "q_trace": {"n": ms.tolist(), "log_q": lq.tolist()}}
    return gp_classify(ms, lq, np.diff(ms) * config.log_rho, thresholds, evidence)


# --------------------------------------------------------------------------
# lacunary counterexample


def counterexample(config, j_max):
    """``g_n = n rho^(n/2)`` at ``n = 2^j`` (``j = 1..j_max``), zero elsewhere.

    Returns the sequence and ``delta_k = rho^(2^k + 2^(k-1))`` for
    ``k = 1..j_max - 1``; values below the smallest positive double are
    omitted.
    """
    if int(j_max) != j_max or not 1 <= j_max <= 40:
        raise ValueError("j_max must be an integer in [1, 40]")
    j = np.arange(1, int(j_max) + 1)
    n = np.power(2, j).astype(np.int64)
    la = np.log(n.astype(float)) + 0.5 * n * config.log_rho
    seq = CoeffSequence(n, la, np.zeros(n.size), realizability="shell-bump-only")
    k = np.arange(1, int(j_max))
    nk = 2.0**k + 2.0 ** (k - 1)
    with np.errstate(under="ignore"):
        deltas = np.exp(nk * config.log_rho)
    return seq, deltas[deltas > 0]


def counterexample_bound(config, tol=1e-16):
    """``sum_j 2^j rho^(2^(j-2))`` summed until terms fall below ``tol``."""
    total, j = 0.0, 1
    while True:
        term = 2.0**j * np.exp(2.0 ** (j - 2) * config.log_rho)
        total += term
        if term < tol * total or j > 80:
            return total
        j += 1


# --------------------------------------------------------------------------
# blow-up rate


@dataclass(frozen=True)
class BlowupFit:
    slope: float
    log_coef: float
    intercept: float
    r2: float


def blowup_exponent_fit(deltas, energies, min_decades=5.0):
    """Fit ``log E = c + s L + t log L`` with ``L = log(1/delta)``.

    Returns the slope ``s`` (energy grows like ``delta^(-s)``), the log
    correction ``t`` and the coefficient of determination.
    """
    d = np.asarray(deltas, dtype=float)
    E = np.asarray(energies, dtype=float)
    if d.shape != E.shape or d.size < 4:
        raise ValueError("need matching delta/energy arrays with at least 4 points")
    if np.any(E <= 0) or not np.all(np.isfinite(E)):
        raise ValueError("energies must be finite and strictly positive")
    if np.any(d <= 0) or np.any(d >= 1):
        raise ValueError("deltas must lie in (0, 1)")
    if np.log10(d.max() / d.min()) < min_decades - 1e-9:
        raise ValueError(f"delta grid spans fewer than {min_decades:g} decades")
    L = np.log(1 / d)
    X = np.column_stack([np.ones(L.size), L, np.log(L)])
    y = np.log(E)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
    return BlowupFit(slope=float(coef[1]), log_coef=float(coef[2]), intercept=float(coef[0]), r2=r2)


def dominant_balance_exponent(r_y, config):
    """``2 ln(r_e^2 / (r_i r_y)) / ln(r_e / r_i) - 1`` for a source at radius ``r_y``."""
    return 2 * np.log(config.r_e**2 / (config.r_i * r_y)) / np.log(config.r_e / config.r_i) - 1


# --------------------------------------------------------------------------
# invisibility


def circle_points(radius, count):
    t = 2 * np.pi * np.arange(count) / count
    return np.column_stack([radius * np.cos(t), radius * np.sin(t)])


def invisibility_gap(source, delta, config, sample_count=256, n_max=256):
    """``sup |V_delta - F|`` over ``sample_count`` points on ``|x| = r_*``.

    ``source`` is a :class:`SourceSpec` outside ``B_{r_*}`` or a
    :class:`CoeffSequence`, taken as such.
    """
    if isinstance(source, CoeffSequence):
        coeffs = source
    else:
        if source.support_radius <= config.r_star:
            raise ValueError(
                f"source at radius {source.support_radius:.6g} inside the critical radius {config.r_star:.6g}"
            )
        coeffs = fourier_coeffs(source, config.r_e, n_max)
    pts = circle_points(config.r_star, sample_count)
    return float(np.abs(layer_series(pts, delta, coeffs, config)).max())


def source_coeffs(source, config, n_max=256):
    """Coefficients of ``source`` on ``|x| = r_e``.

    ``n_max`` truncates point sources only; coefficient-defined sources keep
    their full (possibly lacunary) index set.
    """
    if isinstance(source, CoeffSequence):
        return source
    if isinstance(source, (FourierCoeffs, ShellBump)):
        if not np.isclose(source.r_e, config.r_e):
            raise ValueError("coefficient source defined for a different outer radius")
        return source.coeffs
    if not isinstance(source, SourceSpec):
        raise TypeError("expected a SourceSpec or a CoeffSequence")
    return fourier_coeffs(source, config.r_e, n_max)


# --------------------------------------------------------------------------
# estimator wrapper


class CalrClassifier(ClassifierMixin, BaseEstimator):
    """Coefficient-growth classifier for a fixed concentric annulus.

    ``predict`` accepts a list of :class:`CoeffSequence` or
    :class:`SourceSpec` objects and returns verdict labels.

    Parameters
    ----------
    r_i, r_e : float
        Core and shell radii.
    growth, min_witnesses, confidence
        See :class:`ClassifierThresholds`.
    n_max : int
        Modes computed for :class:`SourceSpec` inputs.

    Examples
    --------
    >>> from calr.sources import Dipole
    >>> CalrClassifier().fit().predict([Dipole(y=(3.5, 0.0))])
    array(['NoCALR'], dtype=object)
    """

    def __init__(self, r_i=1.0, r_e=2.0, growth=1e3, min_witnesses=3, confidence=0.95, n_max=256):
        self.r_i = r_i
        self.r_e = r_e
        self.growth = growth
        self.min_witnesses = min_witnesses
        self.confidence = confidence
        self.n_max = n_max

    def fit(self, X=None, y=None):
        """Validate the parameters; no data are needed."""
        self.config_ = AnnulusConfig(float(self.r_i), float(self.r_e))
        self.thresholds_ = ClassifierThresholds(float(self.growth), int(self.min_witnesses), float(self.confidence))
        if not 0 < self.thresholds_.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if self.thresholds_.min_witnesses < 3:
            raise ValueError("at least 3 witnesses are required for a CALR verdict")
        self.classes_ = np.array([v.value for v in Verdict], dtype=object)
        return self

    def classify_one(self, source):
        check_is_fitted(self, "config_")
        return classify(source_coeffs(source, self.config_, self.n_max), self.config_, self.thresholds_)

    def predict(self, X):
        check_is_fitted(self, "config_")
        if isinstance(X, (CoeffSequence, SourceSpec)):
            X = [X]
        return np.array([self.classify_one(s).label for s in X], dtype=object)
