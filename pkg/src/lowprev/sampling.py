"""Seed-addressable Dirichlet sampling.

Random numbers come from SplitMix64 used in counter mode: the value at
counter ``c`` under seed ``s`` is ``mix64(s + (c + 1) * GOLDEN)``.  Every
gamma variate owns its own counter range (variate index in the high 32
bits, draw index in the low 32 bits), so a variate does not depend on how
many draws its neighbours needed and batches for nearby shape parameters
stay coupled under a shared seed.

Gamma variates use the Marsaglia-Tsang squeeze method.  Shapes below one
are boosted, ``Gamma(a) = Gamma(a + 1) * U**(1/a)``, and everything is
kept in log space until the final normalisation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .model import DirichletParams, ModelError

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_GOLDEN_U = np.uint64(GOLDEN)
_MIX1_U = np.uint64(_MIX1)
_MIX2_U = np.uint64(_MIX2)

# draws per variate: slot 0 is the boost uniform, then 3 per squeeze round
_MAX_ROUNDS = 64

_STREAM_CODES = {"primary": 0, "paired": 1, "stability": 2, "direct": 3, "diagnostic": 4}
_ITERATION_BASE = 1 << 16


def mix64(z: int) -> int:
    """SplitMix64 finaliser, a bijection on 64-bit integers."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _MIX1_U
    z = z ^ (z >> np.uint64(27))
    z = z * _MIX2_U
    return z ^ (z >> np.uint64(31))


def counter_uniforms(seed: int, counters: np.ndarray) -> np.ndarray:
    """Uniforms on the open interval (0, 1) at the given counters."""
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + (counters + np.uint64(1)) * _GOLDEN_U
        bits = _mix64_array(z)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def stream_code(stream) -> int:
    """Encode a stream label: a name, or ``("iteration", i)``."""
    if isinstance(stream, tuple):
        name, idx = stream
        if name != "iteration" or not 0 <= int(idx) < (1 << 31):
            raise ValueError(f"bad stream {stream!r}")
        return _ITERATION_BASE + int(idx)
    try:
        return _STREAM_CODES[stream]
    except KeyError:
        raise ValueError(f"unknown stream {stream!r}") from None


def derive_seed(master: int, replication: int, stream="primary") -> int:
    """Seed for one (replication, stream) cell of an experiment.

    Injective in ``(replication, stream)`` for a fixed master since both the
    key encoding and ``mix64`` are injective.
    """
    if not 0 <= replication < (1 << 32):
        raise ValueError("replication index must fit in 32 bits")
    key = (stream_code(stream) << 32) | replication
    return mix64(mix64(master) ^ key)


def log_gamma_variates(shapes: np.ndarray, seed: int) -> np.ndarray:
    """Logs of independent ``Gamma(shape, 1)`` draws, one per entry of ``shapes``."""
    shapes = np.asarray(shapes, dtype=float).ravel()
    m = shapes.size
    if m >= (1 << 32):
        raise ValueError("too many variates for one seed")
    if np.any(~(shapes > 0)):
        raise ModelError("gamma shapes must be positive")
    base = np.arange(m, dtype=np.uint64) << np.uint64(32)
    boosted = shapes < 1.0
    a = np.where(boosted, shapes + 1.0, shapes)
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)

    out = np.empty(m)
    todo = np.arange(m)
    for r in range(_MAX_ROUNDS):
        if todo.size == 0:
            break
        slot = np.uint64(1 + 3 * r)
        cnt = base[todo] + slot
        u1 = counter_uniforms(seed, cnt)
        u2 = counter_uniforms(seed, cnt + np.uint64(1))
        u = counter_uniforms(seed, cnt + np.uint64(2))
        x = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        dd, cc = d[todo], c[todo]
        v = 1.0 + cc * x
        ok = v > 0
        v3 = np.where(ok, v, 1.0) ** 3
        x2 = x * x
        accept = ok & (
            (u < 1.0 - 0.0331 * x2 * x2) | (np.log(u) < 0.5 * x2 + dd * (1.0 - v3 + np.log(v3)))
        )
        out[todo[accept]] = np.log(dd[accept] * v3[accept])
        todo = todo[~accept]
    if todo.size:
        raise ModelError("gamma sampler failed to accept within the round limit")

    if np.any(boosted):
        ub = counter_uniforms(seed, base[boosted])
        out[boosted] += np.log(ub) / shapes[boosted]
    return out


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """``n`` i.i.d. draws from ``source`` generated under ``seed``."""

    points: np.ndarray
    log_points: np.ndarray
    source: DirichletParams
    seed: int

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def k(self) -> int:
        return self.points.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# seed={self.seed} s={self.source.s!r} t={' '.join(map(repr, self.source.t))}\n")
            writer = csv.writer(fh)
            writer.writerow([f"x{j + 1}" for j in range(self.k)])
            for row in self.points:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "SampleBatch":
        lines = Path(path).read_text().splitlines()
        meta = dict(tok.split("=", 1) for tok in lines[0][2:].split(" ", 2))
        s = float(meta["s"])
        t = tuple(float(v) for v in meta["t"].split())
        rows = np.array([[float(v) for v in line.split(",")] for line in lines[2:] if line])
        return cls(rows, np.log(rows), DirichletParams(s, t), int(meta["seed"]))


def sample_dirichlet(q: DirichletParams, n: int, seed: int) -> SampleBatch:
    """Draw ``n`` points from ``Dirichlet(q.s * q.t)``, reproducibly in ``seed``.

    Row ``i`` depends only on ``(q, seed, i)``, so a batch of size ``n`` is
    the prefix of any larger batch with the same source and seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    shapes = np.tile(q.alpha, n)
    log_g = log_gamma_variates(shapes, seed).reshape(n, q.k)
    log_x = log_g - logsumexp(log_g, axis=1, keepdims=True)
    if np.any(log_x < -745.0):
        raise ModelError("a Dirichlet coordinate underflowed to zero; shape parameters too small")
    x = np.exp(log_x)
    x /= x.sum(axis=1, keepdims=True)
    return SampleBatch(x, log_x, q, seed)
