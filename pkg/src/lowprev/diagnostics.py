"""Empirical checks on envelope estimators.

Residual processes, the pseudo-metric between parameters, bias decay of
grid-minimum estimators, coherence audits, and the two-level Monte Carlo
baseline with shared versus independent seeds.  Residual-based routines
use the standard (unnormalised) estimator with exact density ratios and
need a linear gamble so the exact expectations are known.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envelope import OptimizerConfig, tau
from .estimator import (
    log_density_ratio,
    log_unnormalised_weights,
    self_normalised_estimate,
    standard_estimate,
)
from .model import (
    ConstrainedSimplex,
    DirichletParams,
    GambleSpec,
    ModelError,
    Problem,
    exact_expectation_linear,
)
from .sampling import SampleBatch, derive_seed, sample_dirichlet


def _exact_values(gamble: GambleSpec, grid: np.ndarray) -> np.ndarray:
    if gamble.kind != "linear":
        raise ModelError("exact expectations need a linear gamble")
    return np.array([exact_expectation_linear(gamble.coeffs, t) for t in grid])


def _density_ratios(problem: Problem, grid: np.ndarray, batch: SampleBatch) -> np.ndarray:
    """n x m matrix of true ratios ``p_t(x_i) / q(x_i)``."""
    return np.exp(np.column_stack([log_density_ratio(problem.s, t, batch.source, batch) for t in grid]))


def _standard_estimates(problem, grid, n, seed, independent):
    """Standard estimates at every grid point for one replication."""
    m = len(grid)
    if not independent:
        batch = sample_dirichlet(problem.q, n, seed)
        w = _density_ratios(problem, grid, batch)
        f = problem.gamble.evaluate(batch.points)
        return (w * f[:, None]).mean(axis=0)
    out = np.empty(m)
    for j in range(m):
        batch = sample_dirichlet(problem.q, n, derive_seed(seed, j, "primary"))
        w = _density_ratios(problem, grid[j : j + 1], batch)[:, 0]
        out[j] = np.mean(w * problem.gamble.evaluate(batch.points))
    return out


@dataclass(frozen=True, eq=False)
class ResidualProcessSample:
    """``residuals[r, j]`` is estimate minus exact value at ``grid[j]`` in replication ``r``."""

    grid: np.ndarray
    residuals: np.ndarray
    n: int

    @property
    def N(self) -> int:
        return self.residuals.shape[0]

    @property
    def m(self) -> int:
        return self.residuals.shape[1]


def residual_process(
    problem: Problem,
    grid,
    n: int,
    N: int,
    seed: int,
    independent: bool = False,
) -> ResidualProcessSample:
    """Sample ``N`` replications of the residual process on ``grid``.

    With ``independent=True`` every grid point gets its own batch, which
    destroys the correlation across parameters.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] < 2:
        raise ModelError("residual process needs at least two grid points")
    exact = _exact_values(problem.gamble, grid)
    rows = [
        _standard_estimates(problem, grid, n, derive_seed(seed, r, "diagnostic"), independent) - exact
        for r in range(N)
    ]
    return ResidualProcessSample(grid, np.array(rows), n)


def empirical_d1(sample: ResidualProcessSample, i: int, j: int) -> float:
    """Root-mean-square difference of residuals at grid points ``i`` and ``j``."""
    m = sample.m
    if not (0 <= i < m and 0 <= j < m):
        raise IndexError(f"grid indices ({i}, {j}) out of range for {m} points")
    if i == j:
        return 0.0
    a, b = (i, j) if i < j else (j, i)
    diff = sample.residuals[:, a] - sample.residuals[:, b]
    return float(np.sqrt(np.mean(diff * diff)))


def empirical_d1_se(sample: ResidualProcessSample, i: int, j: int) -> float:
    """Delta-method standard error of :func:`empirical_d1`."""
    d = empirical_d1(sample, i, j)
    if d == 0.0:
        return 0.0
    diff2 = (sample.residuals[:, i] - sample.residuals[:, j]) ** 2
    return float(diff2.std(ddof=1) / (2.0 * d * np.sqrt(sample.N)))


def scaling_check_dn(sample_n: ResidualProcessSample, sample_1: ResidualProcessSample) -> float:
    """Largest relative deviation of ``d_n * sqrt(n / n_ref)`` from ``d_ref`` over grid pairs."""
    if not np.array_equal(sample_n.grid, sample_1.grid):
        raise ModelError("samples must share the grid")
    factor = np.sqrt(sample_n.n / sample_1.n)
    worst = 0.0
    for i in range(sample_n.m):
        for j in range(i + 1, sample_n.m):
            ref = empirical_d1(sample_1, i, j)
            if ref == 0.0:
                continue
            worst = max(worst, abs(empirical_d1(sample_n, i, j) * factor / ref - 1.0))
    return worst


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def dn_slope(samples: list[ResidualProcessSample]) -> float:
    """Log-log slope of the mean pairwise ``d_n`` against ``n``."""
    means = []
    for smp in samples:
        pairs = [empirical_d1(smp, i, j) for i in range(smp.m) for j in range(i + 1, smp.m)]
        means.append(np.mean(pairs))
    return loglog_slope([s.n for s in samples], means)


@dataclass
class ErrorTable:
    """Per-sample-size error summary of a grid-minimum estimator."""

    n: list[int] = field(default_factory=list)
    bias: list[float] = field(default_factory=list)
    bias_se: list[float] = field(default_factory=list)
    mean_abs_error: list[float] = field(default_factory=list)
    mean_abs_error_se: list[float] = field(default_factory=list)

    @property
    def slope(self) -> float:
        return loglog_slope(self.n, self.mean_abs_error)

    def inversions(self) -> int:
        e = self.mean_abs_error
        return sum(1 for a, b in zip(e, e[1:]) if b >= a)

    def rows(self):
        header = ["n", "bias", "bias_se", "mean_abs_error", "mean_abs_error_se"]
        return header, list(zip(self.n, self.bias, self.bias_se, self.mean_abs_error, self.mean_abs_error_se))


def _grid_min_errors(problem, grid, n_list, N, seed) -> ErrorTable:
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    theta_star = float(_exact_values(problem.gamble, grid).min())
    table = ErrorTable()
    for n in n_list:
        size_seed = derive_seed(seed, int(n), "diagnostic")
        errs = np.array(
            [
                _standard_estimates(problem, grid, n, derive_seed(size_seed, r, "primary"), False).min()
                - theta_star
                for r in range(N)
            ]
        )
        table.n.append(int(n))
        table.bias.append(float(errs.mean()))
        table.bias_se.append(float(errs.std(ddof=1) / np.sqrt(N)))
        table.mean_abs_error.append(float(np.abs(errs).mean()))
        table.mean_abs_error_se.append(float(np.abs(errs).std(ddof=1) / np.sqrt(N)))
    return table


def empirical_bias_scaling(problem: Problem, grid, n_list, N: int, seed: int) -> ErrorTable:
    """Mean absolute error of the grid-minimum standard estimator for each ``n``; see ``ErrorTable.slope``."""
    return _grid_min_errors(problem, grid, n_list, N, seed)


def finite_T_consistency(problem: Problem, grid, n_list, N: int, seed: int) -> ErrorTable:
    """Same estimator as :func:`empirical_bias_scaling`, read as a consistency check on a finite set."""
    return _grid_min_errors(problem, grid, n_list, N, seed)


# -- coherence -------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    check: str
    index: int
    magnitude: float


@dataclass
class CoherenceReport:
    estimator: str
    tolerance: float
    violations: list[Violation] = field(default_factory=list)
    max_gap: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, check: str) -> int:
        return sum(1 for v in self.violations if v.check == check)


def _lower_functional(batch, s, T, grid, cfg, estimator):
    q = batch.source
    if grid is not None:
        grid = np.atleast_2d(np.asarray(grid, dtype=float))
        if estimator == "self_normalised":
            logws = [log_unnormalised_weights(s, t, q, batch) for t in grid]

            def lower(f):
                vals = f.evaluate(batch.points)
                return min(self_normalised_estimate(lw, vals).estimate for lw in logws)

        elif estimator == "standard":
            ws = [np.exp(log_density_ratio(s, t, q, batch)) for t in grid]

            def lower(f):
                vals = f.evaluate(batch.points)
                return min(standard_estimate(w, vals).estimate for w in ws)

        else:
            raise ValueError(f"unknown estimator {estimator!r}")
        return lower
    if estimator != "self_normalised":
        raise ValueError("optimizer-based audit supports the self-normalised estimator only")
    cfg = cfg or OptimizerConfig()
    return lambda f: tau(batch, f, s, T, cfg).value


def coherence_audit(
    batch: SampleBatch,
    pairs,
    s: float,
    T: ConstrainedSimplex,
    grid=None,
    cfg: OptimizerConfig | None = None,
    estimator: str = "self_normalised",
    scales=(2.5,),
    shifts=(0.75,),
    tol: float | None = None,
) -> CoherenceReport:
    """Audit the lower estimator on one shared batch for a list of gamble pairs.

    Checks lower(f) >= min f(x_i), superadditivity, positive homogeneity for
    each of ``scales`` and constant additivity for each of ``shifts``.  With
    ``grid`` the minimum is taken over those points exactly (default
    tolerance 1e-10); otherwise the optimizer is used (default 1e-6).
    """
    lower = _lower_functional(batch, s, T, grid, cfg, estimator)
    tol = tol if tol is not None else (1e-10 if grid is not None else 1e-6)
    report = CoherenceReport(estimator, tol)
    gaps = {"bound": 0.0, "superadditivity": 0.0, "homogeneity": 0.0, "constant_additivity": 0.0}

    def record(check, idx, gap):
        gaps[check] = max(gaps[check], gap)
        if gap > tol:
            report.violations.append(Violation(check, idx, gap))

    for idx, (f, g) in enumerate(pairs):
        lf, lg = lower(f), lower(g)
        record("bound", idx, max(0.0, float(f.evaluate(batch.points).min()) - lf))
        record("superadditivity", idx, max(0.0, lf + lg - lower(f + g)))
        for lam in scales:
            record("homogeneity", idx, abs(lower(f.scaled(lam)) - lam * lf))
        for c in shifts:
            record("constant_additivity", idx, abs(lower(f.shifted(c)) - lf - c))
    report.max_gap = gaps
    return report


# -- two-level Monte Carlo --------------------------------------------------


@dataclass(frozen=True, eq=False)
class TwoLevelResult:
    estimate: float
    per_point: np.ndarray


def two_level_mc(grid, gamble: GambleSpec, s: float, n: int, shared_seed: bool, seed: int) -> TwoLevelResult:
    """Grid minimum of plain Monte Carlo means, each from ``n`` direct draws of ``p_t``.

    ``shared_seed`` reuses one seed for every grid point (common random
    numbers); otherwise each point gets its own derived seed.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    means = np.empty(len(grid))
    for j, t in enumerate(grid):
        sd = seed if shared_seed else derive_seed(seed, j, "diagnostic")
        batch = sample_dirichlet(DirichletParams(s, tuple(t)), n, sd)
        means[j] = gamble.evaluate(batch.points).mean()
    return TwoLevelResult(float(means.min()), means)


@dataclass(frozen=True)
class BiasEstimate:
    bias: float
    se: float


def two_level_bias(grid, gamble: GambleSpec, s: float, n: int, N: int, seed: int, shared_seed: bool) -> BiasEstimate:
    """Bias of the two-level envelope over ``N`` replications (linear gambles only)."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    theta_star = float(_exact_values(gamble, grid).min())
    errs = np.array(
        [
            two_level_mc(grid, gamble, s, n, shared_seed, derive_seed(seed, r, "diagnostic")).estimate - theta_star
            for r in range(N)
        ]
    )
    return BiasEstimate(float(errs.mean()), float(errs.std(ddof=1) / np.sqrt(N)))
