"""Importance weights and the standard / self-normalised estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DirichletParams, ModelError, dirichlet_log_normaliser
from .sampling import SampleBatch


class DegenerateWeightsError(ArithmeticError):
    """All importance weights vanished (or are unusable) for some target."""


@dataclass(frozen=True, eq=False)
class LogWeights:
    """Unnormalised log weights ``ln w'_t(x_i)`` for one target ``t``."""

    logw: np.ndarray
    target_t: tuple[float, ...]
    source: DirichletParams

    @property
    def n(self) -> int:
        return self.logw.size


@dataclass(frozen=True)
class EstimateReport:
    estimate: float
    sigma_hat: float
    ess: float
    n: int
    kind: str


def log_unnormalised_weights(s: float, t, q: DirichletParams, batch: SampleBatch) -> LogWeights:
    """``ln w'_t(x_i) = sum_j (s t_j - s_q t_q_j) ln x_ij`` without normalising constants."""
    t = np.asarray(t, dtype=float)
    if t.size != batch.k or q.k != batch.k:
        raise ModelError(f"dimension mismatch: t has {t.size}, batch has {batch.k}, q has {q.k}")
    if np.any(batch.points <= 0):
        raise ModelError("sample has non-positive coordinates")
    expo = s * t - q.alpha
    logw = batch.log_points @ expo
    if not np.all(np.isfinite(logw)):
        raise DegenerateWeightsError("non-finite log weight")
    return LogWeights(logw, tuple(t.tolist()), q)


def log_density_ratio(s: float, t, q: DirichletParams, batch: SampleBatch) -> np.ndarray:
    """``ln(p_t(x_i) / q(x_i))`` with both normalisers included."""
    lw = log_unnormalised_weights(s, t, q, batch).logw
    return lw + dirichlet_log_normaliser(DirichletParams(s, tuple(t))) - dirichlet_log_normaliser(q)


def _shifted(logw: np.ndarray) -> np.ndarray:
    logw = np.asarray(logw, dtype=float)
    if logw.size == 0 or not np.all(np.isfinite(logw)):
        raise DegenerateWeightsError("log weights must be finite and non-empty")
    u = np.exp(logw - logw.max())
    return u


def _ess(u: np.ndarray) -> float:
    total = u.sum()
    if not total > 0:
        raise DegenerateWeightsError("degenerate weights")
    ess = total * total / (u @ u)
    return float(min(max(ess, 1.0), u.size))


def _weighted_mean(u: np.ndarray, f: np.ndarray, total: float) -> float:
    # a convex combination; clipping only removes rounding excursions
    return float(min(max(u @ f / total, f.min()), f.max()))


def effective_sample_size(w) -> float:
    """``(sum w)^2 / sum w^2``, computed on max-shifted weights; accepts LogWeights or raw log weights."""
    logw = w.logw if isinstance(w, LogWeights) else w
    return _ess(_shifted(logw))


def self_normalised_estimate(w, fvals) -> EstimateReport:
    """Self-normalised importance sampling estimate with its standard error and ESS."""
    logw = w.logw if isinstance(w, LogWeights) else np.asarray(w, dtype=float)
    f = np.asarray(fvals, dtype=float)
    if f.shape != logw.shape:
        raise ModelError(f"{f.size} gamble values for {logw.size} weights")
    n = f.size
    if n < 2:
        raise ModelError("need at least two samples")
    u = _shifted(logw)
    total = u.sum()
    if not total > 0:
        raise DegenerateWeightsError("degenerate weights")
    est = _weighted_mean(u, f, total)
    resid = f - est
    num = np.mean(u * u * resid * resid)
    den = (total / n) ** 2
    sigma2 = num / den / (n - 1)
    return EstimateReport(est, float(np.sqrt(sigma2)), _ess(u), n, "self_normalised")


def standard_estimate(w_normalised, fvals) -> EstimateReport:
    """Plain importance sampling estimate ``mean(w f)`` from true density ratios."""
    w = np.asarray(w_normalised, dtype=float)
    f = np.asarray(fvals, dtype=float)
    if w.shape != f.shape:
        raise ModelError(f"{f.size} gamble values for {w.size} weights")
    if not np.all(np.isfinite(w)):
        raise DegenerateWeightsError("non-finite weight")
    n = f.size
    if n < 2:
        raise ModelError("need at least two samples")
    wf = w * f
    est = float(wf.mean())
    sigma2 = float(np.sum((wf - est) ** 2) / (n - 1))
    return EstimateReport(est, float(np.sqrt(sigma2)), _ess(w), n, "standard")
