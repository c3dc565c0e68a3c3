"""Experiment configuration files (INI syntax, one section per concern)."""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envelope import OptimizerConfig
from .model import ConstrainedSimplex, GambleSpec, ModelError, Problem

DIAGNOSTICS = ("d1", "bias", "coherence", "two-level", "consistency")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass
class RunConfig:
    N: int = 128
    n: int = 128
    sizes: list[int] = field(default_factory=list)
    level: float = 0.95
    seed: int = 0
    mode: str = "exact"
    beta: float = 0.0
    ess_fraction: float = 0.95
    max_iter: int = 10
    n_small: int = 8
    tol_tau: float = 0.02
    fresh_seeds: bool = False


@dataclass
class DiagnoseConfig:
    diagnostics: list[str] = field(default_factory=list)
    replications: int = 200
    grid_size: int = 3
    grid_mix: float = 0.05
    dn_sizes: list[int] = field(default_factory=lambda: [1, 16])
    bias_sizes: list[int] = field(default_factory=lambda: [16, 64, 256, 1024])
    consistency_sizes: list[int] = field(default_factory=lambda: [16, 64, 256, 1024, 4096])
    coherence_pairs: int = 50
    coherence_probes: int = 20
    coherence_n: int = 128
    two_level_n: int = 256
    two_level_step: float = 0.02


@dataclass
class ExperimentConfig:
    problem: Problem
    initial_t: tuple[float, ...]
    run: RunConfig
    optimizer: OptimizerConfig
    diagnose: DiagnoseConfig
    output: Path
    digest: str

    def with_overrides(self, seed=None, out=None) -> "ExperimentConfig":
        if seed is not None:
            self.run.seed = int(seed)
        if out is not None:
            self.output = Path(out)
        return self


def _floats(text: str, path: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{path}: expected a list of numbers, got {text!r}") from None


def _ints(text: str, path: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{path}: expected a list of integers, got {text!r}") from None


def _get(cp, section, key, conv, default=None, required=False):
    path = f"{section}.{key}"
    if not cp.has_option(section, key) or cp.get(section, key).strip() == "":
        if required:
            raise ConfigError(f"{path}: missing")
        return default
    raw = cp.get(section, key).strip()
    try:
        if conv is bool:
            return cp.getboolean(section, key)
        if conv in (_floats, _ints):
            return conv(raw, path)
        return conv(raw)
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"{path}: cannot parse {raw!r}") from None


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # N and n are distinct keys
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None

    k = _get(cp, "model", "k", int, required=True)
    if k < 2:
        raise ConfigError("model.k: must be >= 2")
    s = _get(cp, "model", "s", float, required=True)
    if not s > 0:
        raise ConfigError("model.s: must be positive")
    lb = _get(cp, "model", "lb", _floats, required=True)
    if len(lb) == 1:
        lb = lb * k
    if len(lb) != k:
        raise ConfigError(f"model.lb: expected {k} values, got {len(lb)}")
    try:
        T = ConstrainedSimplex(tuple(lb))
    except ModelError as exc:
        raise ConfigError(f"model.lb: {exc}") from None

    def point(key, default):
        v = _get(cp, "model", key, _floats)
        if v is None:
            return tuple(default)
        if len(v) != k:
            raise ConfigError(f"model.{key}: expected {k} values, got {len(v)}")
        return tuple(v)

    sampling_t = point("sampling_t", T.barycenter())
    initial_t = point("initial_t", T.barycenter())
    if not T.contains(initial_t):
        raise ConfigError(f"model.initial_t: {list(initial_t)} is not in T")

    kind = _get(cp, "gamble", "kind", str, required=True)
    if kind == "linear":
        coeffs = _get(cp, "gamble", "coeffs", _floats, required=True)
        if len(coeffs) != k:
            raise ConfigError(f"gamble.coeffs: expected {k} values, got {len(coeffs)}")
        gamble = GambleSpec.linear(coeffs)
    elif kind == "entropy":
        gamble = GambleSpec.entropy()
    else:
        raise ConfigError(f"gamble.kind: must be 'linear' or 'entropy', got {kind!r}")
    try:
        problem = Problem(s, T, gamble, sampling_t)
    except ModelError as exc:
        raise ConfigError(f"model.sampling_t: {exc}") from None

    run = RunConfig()
    for key, conv in [
        ("N", int), ("n", int), ("sizes", _ints), ("level", float), ("seed", int), ("mode", str),
        ("beta", float), ("ess_fraction", float), ("max_iter", int), ("n_small", int),
        ("tol_tau", float), ("fresh_seeds", bool),
    ]:
        v = _get(cp, "run", key, conv)
        if v is not None:
            setattr(run, key, v)
    if run.N < 2:
        raise ConfigError("run.N: must be >= 2")
    if run.n < 2:
        raise ConfigError("run.n: must be >= 2")
    if any(v < 2 for v in run.sizes):
        raise ConfigError("run.sizes: every size must be >= 2")
    if not 0 < run.level < 1:
        raise ConfigError("run.level: must be in (0, 1)")
    if run.mode not in ("exact", "fast"):
        raise ConfigError(f"run.mode: must be 'exact' or 'fast', got {run.mode!r}")
    if run.max_iter < 1:
        raise ConfigError("run.max_iter: no iterations permitted")
    if not 0 < run.ess_fraction <= 1:
        raise ConfigError("run.ess_fraction: must be in (0, 1]")
    if run.beta < 0:
        raise ConfigError("run.beta: must be >= 0")
    if not 0 <= run.seed < 2**64:
        raise ConfigError("run.seed: must be an unsigned 64-bit integer")

    opt_kwargs = {}
    for key, conv in [("max_evals", int), ("xtol", float), ("ftol", float), ("restarts", int), ("step", float)]:
        v = _get(cp, "optimizer", key, conv)
        if v is not None:
            opt_kwargs[key] = v
    start = _get(cp, "optimizer", "start", str)
    if start is not None:
        opt_kwargs["start"] = start if start in ("barycenter", "lb-corner") else tuple(_floats(start, "optimizer.start"))
    try:
        optimizer = OptimizerConfig(**opt_kwargs)
    except ValueError as exc:
        raise ConfigError(f"optimizer: {exc}") from None

    diag = DiagnoseConfig()
    names = _get(cp, "diagnose", "diagnostics", str)
    if names is not None:
        diag.diagnostics = names.replace(",", " ").split()
    for key, conv in [
        ("replications", int), ("grid_size", int), ("grid_mix", float), ("dn_sizes", _ints),
        ("bias_sizes", _ints), ("consistency_sizes", _ints), ("coherence_pairs", int),
        ("coherence_probes", int), ("coherence_n", int), ("two_level_n", int), ("two_level_step", float),
    ]:
        v = _get(cp, "diagnose", key, conv)
        if v is not None:
            setattr(diag, key, v)

    out = _get(cp, "output", "path", str, default="out")
    output = Path(out)
    if base_dir is not None and not output.is_absolute():
        output = base_dir / output
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    return ExperimentConfig(problem, initial_t, run, optimizer, diag, output, digest)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    return parse_config(text)


def grid_points(T: ConstrainedSimplex, size: int, mix: float) -> np.ndarray:
    """``size`` points pulled from the barycenter toward distinct vertices by ``mix``."""
    if not 1 <= size <= T.k:
        raise ConfigError(f"diagnose.grid_size: must be between 1 and {T.k}")
    bary = T.barycenter()
    return np.array([(1 - mix) * bary + mix * T.vertex(j) for j in range(size)])
