"""Finite-range growth tests shared by the annulus and general-geometry classifiers.

Both classifiers reduce their input to a trace ``(m_k, log q_k)`` over
increasing levels plus the log "gap" ``log g_k <= 0`` between consecutive
levels.  For the annulus ``m`` is the mode index, ``q_m = |g_m|^2 / (m rho^m)``
and the gap is ``(m_(k+1) - m_k) log rho``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .verdict import CalrVerdict, Verdict


@dataclass(frozen=True)
class ClassifierThresholds:
    """Growth factor, witness count and confidence level of the decay fit."""

    growth: float = 1e3
    min_witnesses: int = 3
    confidence: float = 0.95


def decay_fit(m, log_q, confidence=0.95):
    """OLS fit ``log q = a + b m + c log m``.

    Returns ``(b, c, half_width_b, r2)``; the half width is the two-sided
    t-interval of ``b`` at ``confidence``.
    """
    m = np.asarray(m, dtype=float)
    X = np.column_stack([np.ones(m.size), m, np.log(m)])
    coef, *_ = np.linalg.lstsq(X, log_q, rcond=None)
    resid = log_q - X @ coef
    dof = m.size - 3
    sst = float(np.sum((log_q - log_q.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
    if dof <= 0:
        return float(coef[1]), float(coef[2]), np.inf, r2
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.pinv(X.T @ X)
    half = stats.t.ppf(0.5 + confidence / 2, dof) * np.sqrt(max(cov[1, 1], 0.0))
    return float(coef[1]), float(coef[2]), float(half), r2


def gp_classify(m, log_q, log_gap, thresholds=None, evidence=None):
    """Apply the GP / weak-growth / decay rules to a level trace.

    Parameters
    ----------
    m : int array
        Increasing level indices.
    log_q : float array
        ``log q`` per level.
    log_gap : float array
        ``log`` of the gap factor between level ``k`` and ``k + 1`` (length
        ``len(m) - 1``).
    """
    th = thresholds or ClassifierThresholds()
    m = np.asarray(m)
    log_q = np.asarray(log_q, dtype=float)
    evidence = dict(evidence or {})
    if m.size < 4:
        return CalrVerdict(Verdict.INCONCLUSIVE, [], dict(evidence, reason="fewer than 4 resolved levels"))
    log_thr = np.log(th.growth)
    log_p = np.asarray(log_gap) + log_q[:-1]
    start = m.size - max(m.size // 3, th.min_witnesses + 1)
    tail = np.arange(max(start, 0), m.size - 1)
    wit = tail[log_p[tail] > log_thr]
    b, c, half, r2 = decay_fit(m, log_q, th.confidence)
    evidence.update(q_rate=float(np.exp(b)), q_log_power=c, q_rate_halfwidth=half, fit_r2=r2)
    trend = np.polyfit(m[wit].astype(float), log_p[wit], 1)[0] if wit.size >= 2 else -np.inf
    if wit.size >= th.min_witnesses and trend > 0:
        return CalrVerdict(
            Verdict.CALR,
            [int(v) for v in m[wit]],
            dict(evidence, gp_log_products=log_p[wit].tolist(), gp_trend=float(trend)),
        )
    mid = m.size // 2
    growing = log_q[mid:].max() > log_q[:mid].max() + np.log(10.0)
    if log_q.max() > log_thr and growing:
        return CalrVerdict(Verdict.WEAK_CALR, [int(m[np.argmax(log_q)])], dict(evidence, max_log_q=float(log_q.max())))
    if b + half < 0:
        return CalrVerdict(Verdict.NO_CALR, [], evidence)
    return CalrVerdict(Verdict.INCONCLUSIVE, [], dict(evidence, reason="no decisive trend"))
