"""Imprecise Dirichlet model: parameter sets, gambles and exact reference values."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

SIMPLEX_TOL = 1e-12


class ModelError(ValueError):
    """Invalid model input (dimension mismatch, infeasible set, bad point)."""


def check_simplex(x, lb=None, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate a simplex point and return it as a float array.

    The point is renormalised only when it already sums to one within
    ``tol``; anything further off is rejected.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ModelError(f"simplex point must be a vector of length >= 2, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ModelError("simplex point has non-finite entries")
    total = x.sum()
    if abs(total - 1.0) > tol:
        raise ModelError(f"point sums to {total!r}, not 1")
    floor = np.zeros_like(x) if lb is None else np.asarray(lb, dtype=float)
    if np.any(x < floor - tol):
        raise ModelError(f"point {x.tolist()} violates lower bounds {floor.tolist()}")
    return x / total


@dataclass(frozen=True)
class ConstrainedSimplex:
    """The set ``{t in simplex : t_j >= lb_j}``.

    Bounds summing to one describe a single point; this is allowed.
    """

    lb: tuple[float, ...]

    def __post_init__(self):
        lb = tuple(float(v) for v in self.lb)
        object.__setattr__(self, "lb", lb)
        if len(lb) < 2:
            raise ModelError("need k >= 2")
        if any(v < 0 or not np.isfinite(v) for v in lb):
            raise ModelError(f"lower bounds must be finite and >= 0, got {lb}")
        if sum(lb) > 1.0 + SIMPLEX_TOL:
            raise ModelError(f"lower bounds sum to {sum(lb)} > 1: empty set")

    @classmethod
    def uniform(cls, k: int, bound: float) -> "ConstrainedSimplex":
        return cls((bound,) * k)

    @property
    def k(self) -> int:
        return len(self.lb)

    @property
    def lb_array(self) -> np.ndarray:
        return np.array(self.lb)

    @property
    def slack(self) -> float:
        return max(1.0 - sum(self.lb), 0.0)

    @property
    def is_singleton(self) -> bool:
        return self.slack <= SIMPLEX_TOL

    def contains(self, t, tol: float = SIMPLEX_TOL) -> bool:
        t = np.asarray(t, dtype=float)
        if t.shape != (self.k,):
            return False
        return bool(abs(t.sum() - 1.0) <= tol and np.all(t >= self.lb_array - tol))

    def validate(self, t) -> np.ndarray:
        t = check_simplex(t, self.lb_array)
        if t.size != self.k:
            raise ModelError(f"expected a point of dimension {self.k}, got {t.size}")
        return t

    def vertex(self, j: int) -> np.ndarray:
        """The vertex putting all free mass on coordinate ``j``."""
        t = self.lb_array.copy()
        t[j] += self.slack
        return t

    def vertices(self) -> np.ndarray:
        return np.array([self.vertex(j) for j in range(self.k)])

    def barycenter(self) -> np.ndarray:
        return self.lb_array + self.slack / self.k


@dataclass(frozen=True)
class DirichletParams:
    """Dirichlet distribution with concentration ``s`` and mean ``t``."""

    s: float
    t: tuple[float, ...]

    def __post_init__(self):
        if not (self.s > 0 and np.isfinite(self.s)):
            raise ModelError(f"concentration s must be positive, got {self.s}")
        t = check_simplex(self.t)
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "t", tuple(float(v) for v in t))

    @property
    def k(self) -> int:
        return len(self.t)

    @property
    def alpha(self) -> np.ndarray:
        return self.s * np.array(self.t)


def eval_linear_gamble(coeffs, x) -> float | np.ndarray:
    """Evaluate ``sum_j coeffs_j x_j``; ``x`` may be a single point or an n x k matrix."""
    coeffs = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != coeffs.size:
        raise ModelError(f"gamble has {coeffs.size} coefficients but point has dimension {x.shape[-1]}")
    out = x @ coeffs
    return float(out) if out.ndim == 0 else out


def eval_entropy_gamble(x) -> float | np.ndarray:
    """Shannon entropy ``-sum x ln x`` with ``0 ln 0 = 0``; rows of a matrix are evaluated separately."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(x > 0, -x * np.log(np.where(x > 0, x, 1.0)), 0.0)
    out = terms.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GambleSpec:
    """A bounded function on the simplex.

    ``kind`` is one of ``"linear"``, ``"entropy"`` or ``"custom"``.  Custom
    gambles supply ``evaluator``, a pure function mapping an ``(n, k)``
    matrix of points to ``n`` values.
    """

    kind: str
    coeffs: tuple[float, ...] | None = None
    evaluator: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "linear":
            if self.coeffs is None:
                raise ModelError("linear gamble needs coeffs")
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        elif self.kind == "entropy":
            pass
        elif self.kind == "custom":
            if self.evaluator is None:
                raise ModelError("custom gamble needs an evaluator")
        else:
            raise ModelError(f"unknown gamble kind {self.kind!r}")

    @classmethod
    def linear(cls, coeffs) -> "GambleSpec":
        return cls("linear", coeffs=tuple(coeffs))

    @classmethod
    def entropy(cls) -> "GambleSpec":
        return cls("entropy")

    @classmethod
    def custom(cls, evaluator) -> "GambleSpec":
        return cls("custom", evaluator=evaluator)

    def evaluate(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "linear":
            vals = eval_linear_gamble(self.coeffs, points)
        elif self.kind == "entropy":
            vals = eval_entropy_gamble(points)
        else:
            vals = np.asarray(self.evaluator(points), dtype=float)
        vals = np.atleast_1d(np.asarray(vals, dtype=float))
        if vals.shape != (points.shape[0],):
            raise ModelError(f"gamble returned shape {vals.shape} for {points.shape[0]} points")
        if not np.all(np.isfinite(vals)):
            raise ModelError("gamble is not finite on the sample")
        return vals

    def __add__(self, other: "GambleSpec") -> "GambleSpec":
        if self.kind == other.kind == "linear":
            return GambleSpec.linear(np.add(self.coeffs, other.coeffs))
        return GambleSpec.custom(lambda x, f=self, g=other: f.evaluate(x) + g.evaluate(x))

    def scaled(self, lam: float) -> "GambleSpec":
        if self.kind == "linear":
            return GambleSpec.linear(lam * np.asarray(self.coeffs))
        return GambleSpec.custom(lambda x, f=self: lam * f.evaluate(x))

    def shifted(self, c: float) -> "GambleSpec":
        # on the simplex a constant equals c * sum_j x_j, so linear gambles stay linear
        if self.kind == "linear":
            return GambleSpec.linear(np.asarray(self.coeffs) + c)
        return GambleSpec.custom(lambda x, f=self: f.evaluate(x) + c)


def exact_expectation_linear(coeffs, t) -> float:
    """Mean of a linear gamble under any Dirichlet with mean ``t``."""
    coeffs = np.asarray(coeffs, dtype=float)
    t = np.asarray(t, dtype=float)
    if coeffs.shape != t.shape:
        raise ModelError(f"dimension mismatch: {coeffs.size} coefficients vs point of size {t.size}")
    return float(coeffs @ t)


def exact_lower_linear(coeffs, T: ConstrainedSimplex) -> tuple[float, np.ndarray]:
    """Minimise a linear gamble's mean over ``T`` by greedy mass allocation.

    All free mass goes to the smallest coefficient; ties are broken by the
    lowest index so the argmin is deterministic.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size != T.k:
        raise ModelError(f"dimension mismatch: {coeffs.size} coefficients for k={T.k}")
    t = T.vertex(int(np.argmin(coeffs)))
    return float(coeffs @ t), t


def dirichlet_logpdf(p: DirichletParams, x) -> float | np.ndarray:
    """Log density of ``Dirichlet(s t)`` at ``x`` (a point or an n x k matrix)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.k:
        raise ModelError(f"point dimension {x.shape[-1]} != model dimension {p.k}")
    alpha = p.alpha
    if np.any(x < 0):
        raise ModelError("point outside the simplex")
    on_boundary = x <= 0
    if np.any(on_boundary & (alpha < 1)):
        raise ModelError("density is infinite at this boundary point")
    with np.errstate(divide="ignore", invalid="ignore"):
        logx = np.log(x)
        terms = np.where(on_boundary & (alpha == 1), 0.0, (alpha - 1) * logx)
    out = gammaln(p.s) - gammaln(alpha).sum() + terms.sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def dirichlet_log_normaliser(p: DirichletParams) -> float:
    """``ln Gamma(s) - sum_j ln Gamma(s t_j)``."""
    return float(gammaln(p.s) - gammaln(p.alpha).sum())


@dataclass(frozen=True)
class Problem:
    """A lower-prevision estimation problem: ``min_{t in T} E_{p_t}[f]`` with ``p_t = Dirichlet(s t)``.

    ``q_t`` is the mean of the sampling density ``q = Dirichlet(s q_t)``.
    """

    s: float
    T: ConstrainedSimplex
    gamble: GambleSpec
    q_t: tuple[float, ...] | None = None

    def __post_init__(self):
        q_t = self.T.barycenter() if self.q_t is None else check_simplex(self.q_t)
        if len(q_t) != self.T.k:
            raise ModelError(f"sampling mean has dimension {len(q_t)}, T has {self.T.k}")
        object.__setattr__(self, "q_t", tuple(float(v) for v in q_t))
        if self.gamble.kind == "linear" and len(self.gamble.coeffs) != self.T.k:
            raise ModelError(f"gamble has {len(self.gamble.coeffs)} coefficients, T has dimension {self.T.k}")
        DirichletParams(self.s, self.q_t)

    @property
    def k(self) -> int:
        return self.T.k

    @property
    def q(self) -> DirichletParams:
        return DirichletParams(self.s, self.q_t)

    def with_sampling(self, q_t) -> "Problem":
        return Problem(self.s, self.T, self.gamble, tuple(q_t))

    def density(self, t) -> DirichletParams:
        return DirichletParams(self.s, tuple(t))
