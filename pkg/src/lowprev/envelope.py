"""Lower envelope of self-normalised estimates over a constrained simplex.

``tau`` finds the parameter minimising the self-normalised estimate on a
fixed batch.  The search runs Nelder-Mead in softmax coordinates (so every
probe is feasible) from several starts, and also probes the vertices of
the feasible set, where minimisers of these problems typically sit.
"""

from __future__ import annotations

import types
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

from .estimator import DegenerateWeightsError, _weighted_mean, self_normalised_estimate
from .model import ConstrainedSimplex, GambleSpec, ModelError
from .sampling import SampleBatch

CLAMP_TOL = 1e-6
CORNER_LOGIT = 3.0


@dataclass(frozen=True)
class OptimizerConfig:
    """Nelder-Mead settings; ``max_evals=None`` means ``500 * k``.

    ``restarts`` counts the runs after the first one.  The first run starts
    from ``start`` ("barycenter", "lb-corner" or a warm point in T); restart
    ``r`` starts near the vertex of coordinate ``r mod k``.  ``None`` means k.
    """

    max_evals: int | None = None
    xtol: float = 1e-8
    ftol: float = 1e-9
    restarts: int | None = None
    start: object = "barycenter"
    step: float = 1.0
    probe_vertices: bool = True

    def __post_init__(self):
        if not (self.xtol > 0 and self.ftol > 0 and self.step > 0):
            raise ValueError("tolerances and step must be positive")
        if self.max_evals is not None and self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.restarts is not None and self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if isinstance(self.start, str):
            if self.start not in ("barycenter", "lb-corner"):
                raise ValueError(f"unknown start {self.start!r}")
        else:
            object.__setattr__(self, "start", tuple(float(v) for v in self.start))

    def budget(self, k: int) -> int:
        return self.max_evals if self.max_evals is not None else 500 * k

    def n_restarts(self, k: int) -> int:
        return self.restarts if self.restarts is not None else k


@dataclass(frozen=True, eq=False)
class EnvelopeResult:
    tau: np.ndarray
    value: float
    ess_at_tau: float
    sigma_at_tau: float
    optimizer_evals: int
    converged: bool


@dataclass
class MinimizeResult:
    point: np.ndarray
    value: float
    evals: int
    converged: bool


def simplex_reparam(u, T: ConstrainedSimplex) -> np.ndarray:
    """Map ``u`` in R^(k-1) into the interior of ``T`` via softmax with the last logit pinned at 0."""
    u = np.asarray(u, dtype=float)
    if u.shape != (T.k - 1,):
        raise ModelError(f"expected {T.k - 1} coordinates, got shape {u.shape}")
    z = np.append(u, 0.0)
    z = np.exp(z - z.max())
    return T.lb_array + T.slack * (z / z.sum())


def inverse_reparam(t, T: ConstrainedSimplex) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape != (T.k,):
        raise ModelError(f"expected a point of dimension {T.k}")
    excess = t - T.lb_array
    if np.any(excess <= 0):
        raise ModelError("boundary point has no preimage")
    logz = np.log(excess)
    return logz[:-1] - logz[-1]


def clamp_to_boundary(t, T: ConstrainedSimplex, tol: float = CLAMP_TOL) -> np.ndarray:
    """Snap coordinates within ``tol`` of their bound onto it; the rest absorb the difference."""
    lb = T.lb_array
    t = np.asarray(t, dtype=float)
    excess = np.maximum(t - lb, 0.0)
    snap = excess <= tol
    if snap.all():
        snap[int(np.argmax(excess))] = False
    free = ~snap
    out = lb.copy()
    share = excess[free]
    total = share.sum()
    out[free] += T.slack * (share / total if total > 0 else 1.0 / share.size)
    return out


def _nm_core(data, x0, step, budget, xtol, ftol):
    # Written in the numba subset. ``_objective`` is a module global so the
    # compiled copy can be cached; the interpreted copy for Python objectives
    # rebinds it (see ``_nm_core_py``).
    dim = x0.size
    f0 = _objective(x0, data)
    evals = 1
    xs = np.empty((dim + 1, dim))
    fs = np.empty(dim + 1)
    xs[0] = x0
    fs[0] = f0
    if budget <= 1:
        return x0.copy(), f0, evals, False
    for i in range(dim):
        if evals >= budget:
            best = int(np.argmin(fs[: i + 1]))
            return xs[best].copy(), fs[best], evals, False
        x = x0.copy()
        x[i] += step
        v = _objective(x, data)
        evals += 1
        xs[i + 1] = x
        fs[i + 1] = v if np.isfinite(v) else np.inf
    converged = False
    while evals < budget:
        order = np.argsort(fs, kind="mergesort")
        xs = xs[order]
        fs = fs[order]
        fspread = fs[dim] - fs[0]
        if fspread == 0.0 or fspread <= ftol * abs(fs[0]):
            xspread = 0.0
            for i in range(1, dim + 1):
                for j in range(dim):
                    d = abs(xs[i, j] - xs[0, j])
                    if d > xspread:
                        xspread = d
            if xspread <= xtol:
                converged = True
                break
        centroid = np.zeros(dim)
        for i in range(dim):
            centroid += xs[i]
        centroid /= dim
        worst = xs[dim].copy()
        xr = centroid + (centroid - worst)
        fr = _objective(xr, data)
        evals += 1
        if not np.isfinite(fr):
            fr = np.inf
        if fr < fs[0]:
            if evals >= budget:
                xs[dim] = xr
                fs[dim] = fr
                break
            xe = centroid + 2.0 * (centroid - worst)
            fe = _objective(xe, data)
            evals += 1
            if not np.isfinite(fe):
                fe = np.inf
            if fe < fr:
                xs[dim] = xe
                fs[dim] = fe
            else:
                xs[dim] = xr
                fs[dim] = fr
            continue
        if fr < fs[dim - 1]:
            xs[dim] = xr
            fs[dim] = fr
            continue
        if evals >= budget:
            break
        if fr < fs[dim]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = _objective(xc, data)
            evals += 1
            if not np.isfinite(fc):
                fc = np.inf
            if fc <= fr:
                xs[dim] = xc
                fs[dim] = fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = _objective(xc, data)
            evals += 1
            if not np.isfinite(fc):
                fc = np.inf
            if fc < fs[dim]:
                xs[dim] = xc
                fs[dim] = fc
                continue
        for i in range(1, dim + 1):
            if evals >= budget:
                break
            xs[i] = xs[0] + 0.5 * (xs[i] - xs[0])
            v = _objective(xs[i], data)
            evals += 1
            fs[i] = v if np.isfinite(v) else np.inf
    best = int(np.argmin(fs))
    return xs[best].copy(), fs[best], evals, converged


def _call_python(x, fun):
    return float(fun(x))


_nm_core_py = types.FunctionType(_nm_core.__code__, {**globals(), "_objective": _call_python})


def minimize_downhill_simplex(
    objective: Callable[[np.ndarray], float],
    start,
    cfg: OptimizerConfig | None = None,
) -> MinimizeResult:
    """Nelder-Mead with reflection 1, expansion 2, contraction 1/2 and shrink 1/2.

    Non-finite objective values away from the start are treated as +inf.
    Stops when both the value spread (relative to the best value) and the
    vertex spread fall below tolerance, or the evaluation budget is spent.
    """
    cfg = cfg or OptimizerConfig()
    x0 = np.atleast_1d(np.asarray(start, dtype=float)).copy()
    if not np.isfinite(objective(x0)):
        raise ValueError("objective is not finite at the start point")
    point, value, evals, converged = _nm_core_py(
        objective, x0, cfg.step, cfg.budget(x0.size + 1), cfg.xtol, cfg.ftol
    )
    return MinimizeResult(point, float(value), int(evals), bool(converged))


@numba.njit(cache=True)
def _reparam_jit(u, lb, slack):
    k = lb.size
    zmax = 0.0
    for j in range(k - 1):
        if u[j] > zmax:
            zmax = u[j]
    z = np.empty(k)
    total = 0.0
    for j in range(k - 1):
        z[j] = np.exp(u[j] - zmax)
        total += z[j]
    z[k - 1] = np.exp(-zmax)
    total += z[k - 1]
    return lb + slack * (z / total)


@numba.njit(cache=True)
def _envelope_value_jit(u, data):
    logx, alpha, s, fvals, lb, slack = data
    t = _reparam_jit(u, lb, slack)
    expo = s * t - alpha
    lw = logx @ expo
    m = lw.max()
    num = 0.0
    den = 0.0
    for i in range(lw.size):
        w = np.exp(lw[i] - m)
        num += w * fvals[i]
        den += w
    if not (den > 0.0):
        return np.inf
    return num / den


_objective = _envelope_value_jit
_nm_core_jit = numba.njit(cache=True)(_nm_core)


class EnvelopeObjective:
    """``t -> self-normalised estimate`` on a fixed batch, with the gamble evaluated once."""

    def __init__(self, batch: SampleBatch, fvals: np.ndarray, s: float):
        self.batch = batch
        self.fvals = np.asarray(fvals, dtype=float)
        self.s = float(s)
        self._logx = batch.log_points
        self._alpha = batch.source.alpha

    def logw(self, t) -> np.ndarray:
        # same expression as log_unnormalised_weights so values recompute bit-exactly
        return self._logx @ (self.s * np.asarray(t, dtype=float) - self._alpha)

    def value(self, t) -> float:
        lw = self.logw(t)
        u = np.exp(lw - lw.max())
        total = u.sum()
        if not (total > 0 and np.isfinite(total)):
            return np.inf
        return _weighted_mean(u, self.fvals, total)

    def report(self, t):
        return self_normalised_estimate(self.logw(t), self.fvals)


def _start_points(T: ConstrainedSimplex, cfg: OptimizerConfig) -> list[np.ndarray]:
    k = T.k
    if isinstance(cfg.start, tuple):
        t0 = T.validate(cfg.start)
        first = inverse_reparam(clamp_interior(t0, T), T)
    elif cfg.start == "lb-corner":
        first = _corner_logits(0, k)
    else:
        first = np.zeros(k - 1)
    starts = [first]
    for r in range(cfg.n_restarts(k)):
        starts.append(_corner_logits(r % k, k))
    return starts


def _corner_logits(j: int, k: int) -> np.ndarray:
    z = np.zeros(k)
    z[j] = CORNER_LOGIT
    return z[:-1] - z[-1]


def clamp_interior(t, T: ConstrainedSimplex, eps: float = 1e-9) -> np.ndarray:
    """Pull a point of ``T`` slightly inside so it has a softmax preimage."""
    t = np.asarray(t, dtype=float)
    return (1 - eps) * t + eps * T.barycenter()


def tau(
    batch: SampleBatch,
    gamble: GambleSpec,
    s: float,
    T: ConstrainedSimplex,
    cfg: OptimizerConfig | None = None,
    fvals: np.ndarray | None = None,
) -> EnvelopeResult:
    """Minimise the self-normalised estimate over ``T`` for one batch.

    Candidates from all runs and vertex probes are compared by value, ties
    broken by the lexicographically smallest parameter.
    """
    cfg = cfg or OptimizerConfig()
    if batch.k != T.k:
        raise ModelError(f"batch dimension {batch.k} != parameter dimension {T.k}")
    if fvals is None:
        fvals = gamble.evaluate(batch.points)
    obj = EnvelopeObjective(batch, fvals, s)

    candidates: list[tuple[float, tuple, np.ndarray]] = []
    evals = 0
    converged = T.is_singleton
    best_run = np.inf
    starts = [] if T.is_singleton else _start_points(T, cfg)
    if T.is_singleton:
        candidates.append((obj.value(T.lb_array), T.lb, T.lb_array))
    data = (batch.log_points, batch.source.alpha, obj.s, obj.fvals, T.lb_array, T.slack)
    for u0 in starts:
        if not np.isfinite(_envelope_value_jit(u0, data)):
            evals += 1
            continue
        point, fbest, nev, conv = _nm_core_jit(
            data, u0, cfg.step, cfg.budget(T.k), cfg.xtol, cfg.ftol
        )
        evals += nev
        t = clamp_to_boundary(simplex_reparam(point, T), T)
        v = obj.value(t)
        evals += 1
        if fbest < best_run:
            best_run, converged = fbest, conv
        candidates.append((v, tuple(t.tolist()), t))
    if cfg.probe_vertices:
        for t in T.vertices():
            candidates.append((obj.value(t), tuple(t.tolist()), t))
            evals += 1
    finite = [c for c in candidates if np.isfinite(c[0])]
    if not finite:
        raise DegenerateWeightsError("weights degenerate at every probe")
    value, _, best_t = min(finite, key=lambda c: (c[0], c[1]))
    rep = obj.report(best_t)
    return EnvelopeResult(best_t, rep.estimate, rep.ess, rep.sigma_hat, evals, converged)


def lower_estimate(batch, gamble, s, T, cfg=None) -> float:
    """The envelope estimate ``min_t theta_hat(x, t)``."""
    return tau(batch, gamble, s, T, cfg).value


def upper_estimate(batch: SampleBatch, tau_external, gamble: GambleSpec, s: float, T: ConstrainedSimplex | None = None, fvals=None) -> float:
    """Self-normalised estimate on ``batch`` at a parameter chosen from an independent batch."""
    t = np.asarray(tau_external, dtype=float)
    if T is not None and not T.contains(t):
        raise ModelError(f"external parameter {t.tolist()} is not in T")
    if fvals is None:
        fvals = gamble.evaluate(batch.points)
    return EnvelopeObjective(batch, fvals, s).report(t).estimate
