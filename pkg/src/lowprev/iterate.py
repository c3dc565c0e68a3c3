"""Iterated importance sampling: move the sampling density toward the minimiser."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .confint import ConfidenceInterval, confidence_interval_exact, direct_mean_ci
from .envelope import OptimizerConfig, tau
from .estimator import DegenerateWeightsError
from .model import ModelError, Problem
from .sampling import derive_seed, sample_dirichlet


@dataclass(frozen=True)
class IterationRecord:
    t_in: tuple[float, ...]
    tau_out: tuple[float, ...]
    ess: float
    value: float
    wall_time: float


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    terminated_by: str | None = None

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def final_t(self) -> tuple[float, ...]:
        return self.records[-1].tau_out


class IterationError(ArithmeticError):
    """An iteration failed; ``trace`` holds the completed iterations."""

    def __init__(self, message: str, trace: IterationTrace):
        super().__init__(message)
        self.trace = trace


def iterate_importance(
    problem: Problem,
    initial_t,
    n: int,
    master_seed: int,
    ess_fraction: float = 0.95,
    max_iter: int = 10,
    cfg: OptimizerConfig | None = None,
    fresh_seeds: bool = False,
) -> tuple[np.ndarray, IterationTrace]:
    """Resample from ``p_t``, set ``t`` to the envelope minimiser, repeat until the ESS saturates.

    Every pass reuses the seed of ``("iteration", 0)`` unless ``fresh_seeds``
    is set, so successive passes differ only through ``t``.
    """
    if max_iter < 1:
        raise ValueError("no iterations permitted")
    if not 0.0 < ess_fraction <= 1.0:
        raise ValueError("ess_fraction must be in (0, 1]")
    t = problem.T.validate(initial_t)
    trace = IterationTrace()
    for i in range(max_iter):
        stream = ("iteration", i if fresh_seeds else 0)
        start = time.perf_counter()
        try:
            batch = sample_dirichlet(problem.density(t), n, derive_seed(master_seed, 0, stream))
            res = tau(batch, problem.gamble, problem.s, problem.T, cfg)
        except (DegenerateWeightsError, ModelError) as exc:
            raise IterationError(f"iteration {i + 1}: {exc}", trace) from exc
        trace.records.append(
            IterationRecord(
                tuple(t.tolist()),
                tuple(res.tau.tolist()),
                res.ess_at_tau,
                res.value,
                time.perf_counter() - start,
            )
        )
        if res.ess_at_tau >= ess_fraction * n:
            trace.terminated_by = "ess_saturation"
            return res.tau, trace
        t = res.tau
    trace.terminated_by = "max_iterations"
    return t, trace


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    max_tau_deviation: float
    min_ess: float


def stability_check(
    problem: Problem,
    t,
    n: int,
    master_seed: int,
    N_small: int = 8,
    tol_tau: float = 0.02,
    ess_fraction: float = 0.95,
    cfg: OptimizerConfig | None = None,
) -> StabilityReport:
    """Rerun the envelope estimate on ``N_small`` fresh batches from ``p_t``.

    Stable when every run keeps the ESS near ``n`` and lands close to ``t``.
    """
    t = problem.T.validate(t)
    p = problem.density(t)
    devs, esss = [], []
    for r in range(N_small):
        batch = sample_dirichlet(p, n, derive_seed(master_seed, r, "stability"))
        res = tau(batch, problem.gamble, problem.s, problem.T, cfg)
        devs.append(float(np.max(np.abs(res.tau - t))))
        esss.append(res.ess_at_tau)
    max_dev, min_ess = max(devs), min(esss)
    return StabilityReport(bool(min_ess >= ess_fraction * n and max_dev <= tol_tau), max_dev, min_ess)


@dataclass
class PipelineResult:
    final_t: np.ndarray
    trace: IterationTrace
    stability: StabilityReport
    ci: ConfidenceInterval
    mode: str
    fell_back: bool


def run_full_pipeline(
    problem: Problem,
    initial_t,
    n: int,
    N: int,
    master_seed: int,
    fast: bool = False,
    level: float = 0.95,
    ess_fraction: float = 0.95,
    max_iter: int = 10,
    N_small: int = 8,
    tol_tau: float = 0.02,
    cfg: OptimizerConfig | None = None,
    workers: int = 1,
    fresh_seeds: bool = False,
) -> PipelineResult:
    """Iterate, check stability, then build the interval.

    The direct interval (``N * n`` draws from ``p_t``) is used only when
    ``fast`` is requested and the stability check passes; otherwise the
    exact paired interval is computed with ``q = p_t``.
    """
    try:
        final_t, trace = iterate_importance(
            problem, initial_t, n, master_seed, ess_fraction, max_iter, cfg, fresh_seeds
        )
    except IterationError as exc:
        raise IterationError(f"iterate: {exc}", exc.trace) from exc
    try:
        stab = stability_check(problem, final_t, n, master_seed, N_small, tol_tau, ess_fraction, cfg)
    except (DegenerateWeightsError, ModelError) as exc:
        raise type(exc)(f"stability: {exc}") from exc
    try:
        if fast and stab.stable:
            ci = direct_mean_ci(final_t, N * n, problem, derive_seed(master_seed, 0, "direct"), level)
            mode = "direct"
        else:
            ci = confidence_interval_exact(
                master_seed, N, n, problem.with_sampling(final_t), cfg, level, workers
            )
            mode = "exact"
    except (DegenerateWeightsError, ModelError) as exc:
        raise type(exc)(f"confint: {exc}") from exc
    return PipelineResult(final_t, trace, stab, ci, mode, fell_back=fast and not stab.stable)
