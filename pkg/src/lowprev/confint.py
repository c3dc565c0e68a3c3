"""Confidence intervals for a lower prevision from replicated envelope estimates."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .envelope import OptimizerConfig, tau, upper_estimate
from .estimator import DegenerateWeightsError
from .model import ModelError, Problem
from .sampling import derive_seed, sample_dirichlet


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    N: int
    n: int
    ybar_lower: float
    ybar_upper: float
    s_lower: float
    s_upper: float
    tau_bar: tuple[float, ...] | None = None
    ess_bar: float | None = None
    empty: bool = False
    method: str = "exact"

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float) -> bool:
        return not self.empty and self.lo <= value <= self.hi


# -- Student-t critical values ---------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, 100_000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def reg_incomplete_beta(a: float, b: float, x: float, one_minus_x: float | None = None) -> float:
    """Regularised incomplete beta ``I_x(a, b)``; pass ``1 - x`` separately when it is small."""
    y = 1.0 - x if one_minus_x is None else one_minus_x
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log(y)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, y) / b


def _t_two_sided_tail(t: float, df: float) -> float:
    """``P(|T| > t)`` for Student-t with ``df`` degrees of freedom."""
    t2 = t * t
    return reg_incomplete_beta(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2))


def _t_pdf(t: float, df: float) -> float:
    log_c = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)
    return math.exp(log_c - (df + 1) / 2 * math.log1p(t * t / df))


def t_critical(df: int, level: float = 0.95) -> float:
    """Two-sided Student-t critical value: the ``1 - (1 - level)/2`` quantile.

    Brackets and bisects the two-sided tail probability, then polishes
    with Newton steps on the density.
    """
    if df < 1:
        raise ValueError("df must be at least 1")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    alpha = 1.0 - level
    lo, hi = 0.0, 1.0
    while _t_two_sided_tail(hi, df) > alpha:
        lo, hi = hi, hi * 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _t_two_sided_tail(mid, df) > alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * hi:
            break
    t = 0.5 * (lo + hi)
    for _ in range(3):
        step = (_t_two_sided_tail(t, df) - alpha) / (2.0 * _t_pdf(t, df))
        t_new = t + step
        if not lo <= t_new <= hi:
            break
        t = t_new
        if abs(step) <= 1e-15 * t:
            break
    return t


# -- replicated envelope estimates -------------------------------------------


def _replicate(problem: Problem, n: int, cfg: OptimizerConfig, master_seed: int, r: int, fast: bool):
    q = problem.q
    try:
        chi = sample_dirichlet(q, n, derive_seed(master_seed, r, "primary"))
        chi_p = sample_dirichlet(q, n, derive_seed(master_seed, r, "paired"))
        f = problem.gamble.evaluate(chi.points)
        f_p = problem.gamble.evaluate(chi_p.points)
        low = tau(chi, problem.gamble, problem.s, problem.T, cfg, fvals=f)
        if fast:
            up = upper_estimate(chi_p, low.tau, problem.gamble, problem.s, problem.T, fvals=f_p)
        else:
            other = tau(chi_p, problem.gamble, problem.s, problem.T, cfg, fvals=f_p)
            up = upper_estimate(chi, other.tau, problem.gamble, problem.s, problem.T, fvals=f)
    except (DegenerateWeightsError, ModelError) as exc:
        raise type(exc)(f"replication {r}: {exc}") from exc
    return low.value, up, low.tau, low.ess_at_tau


def _run_replications(problem, n, cfg, master_seed, N, fast, workers):
    args = [(problem, n, cfg, master_seed, r, fast) for r in range(N)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_replicate, *zip(*args)))
    return [_replicate(*a) for a in args]


def _interval(rows, level, n, method, fast) -> ConfidenceInterval:
    lower = np.array([r[0] for r in rows])
    upper = np.array([r[1] for r in rows])
    N = lower.size
    tc = t_critical(N - 1, level)
    yl, yu = float(lower.mean()), float(upper.mean())
    sl, su = float(lower.std(ddof=1)), float(upper.std(ddof=1))
    lo = yl - tc * sl / math.sqrt(N)
    hi = yu + tc * su / math.sqrt(N)
    tau_bar = tuple(np.mean([r[2] for r in rows], axis=0).tolist())
    ess_bar = float(np.mean([r[3] for r in rows]))
    return ConfidenceInterval(
        lo, hi, level, N, n, yl, yu, sl, su, tau_bar, ess_bar, empty=fast and lo > hi, method=method
    )


def confidence_interval_exact(
    master_seed: int,
    N: int,
    n: int,
    problem: Problem,
    cfg: OptimizerConfig | None = None,
    level: float = 0.95,
    workers: int = 1,
) -> ConfidenceInterval:
    """Interval from ``N`` lower estimates and ``N`` upper estimates on paired independent batches.

    Replication ``r`` uses the ``primary`` and ``paired`` streams of
    ``derive_seed(master_seed, r, .)``; ``2N`` optimisations in total.
    """
    if N < 2:
        raise ValueError("need N >= 2 replications")
    rows = _run_replications(problem, n, cfg or OptimizerConfig(), master_seed, N, False, workers)
    return _interval(rows, level, n, "exact", fast=False)


def confidence_interval_fast(
    master_seed: int,
    N: int,
    n: int,
    problem: Problem,
    cfg: OptimizerConfig | None = None,
    level: float = 0.95,
    workers: int = 1,
) -> ConfidenceInterval:
    """Like :func:`confidence_interval_exact`, but the upper estimate reuses ``tau`` of the primary batch.

    Only ``N`` optimisations; the interval may come out empty, which is flagged.
    """
    if N < 2:
        raise ValueError("need N >= 2 replications")
    rows = _run_replications(problem, n, cfg or OptimizerConfig(), master_seed, N, True, workers)
    return _interval(rows, level, n, "fast", fast=True)


def confidence_interval_biased(ci: ConfidenceInterval, beta: float) -> ConfidenceInterval:
    """Widen both ends by a uniform bias bound ``beta``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return replace(ci, lo=ci.lo - beta, hi=ci.hi + beta)


def direct_mean_ci(t, total_samples: int, problem: Problem, seed: int, level: float = 0.95) -> ConfidenceInterval:
    """Plain t-interval for ``E_{p_t}[f]`` from ``total_samples`` direct draws."""
    if total_samples < 2:
        raise ValueError("need at least two samples")
    t = problem.T.validate(t)
    batch = sample_dirichlet(problem.density(t), total_samples, seed)
    f = problem.gamble.evaluate(batch.points)
    mean = float(f.mean())
    sd = float(f.std(ddof=1))
    half = t_critical(total_samples - 1, level) * sd / math.sqrt(total_samples)
    return ConfidenceInterval(
        mean - half, mean + half, level, 1, total_samples, mean, mean, sd, sd,
        tau_bar=tuple(t.tolist()), ess_bar=float(total_samples), method="direct",
    )
