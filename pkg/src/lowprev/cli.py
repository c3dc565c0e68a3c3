"""Command-line experiment runner.

    lowprev plain     --config cfg.ini [--seed S] [--out DIR] [--threads K]
    lowprev iterate   --config cfg.ini ...
    lowprev direct-ci --config cfg.ini ...
    lowprev diagnose  --config cfg.ini ...

Every CSV starts with a ``#`` provenance line (config digest, seed,
command).  Wall-clock times go to a separate ``*_timing.csv`` so the
result files are byte-identical across runs and worker counts.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 diagnostic violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from pathlib import Path

import numpy as np

from .config import DIAGNOSTICS, ConfigError, ExperimentConfig, grid_points, load_config
from .confint import ConfidenceInterval, confidence_interval_biased, confidence_interval_fast, direct_mean_ci
from .diagnostics import (
    coherence_audit,
    dn_slope,
    empirical_bias_scaling,
    empirical_d1,
    empirical_d1_se,
    finite_T_consistency,
    residual_process,
    scaling_check_dn,
    two_level_bias,
)
from .estimator import DegenerateWeightsError
from .iterate import IterationError, run_full_pipeline
from .model import DirichletParams, GambleSpec, ModelError
from .sampling import counter_uniforms, derive_seed, sample_dirichlet

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VIOLATION = 0, 2, 3, 4


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, cfg: ExperimentConfig, command: str, header, rows) -> None:
    buf = io.StringIO()
    buf.write(f"# config={cfg.digest} seed={cfg.run.seed} command={command}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def _ci_rows(label: str, ci: ConfidenceInterval, k: int):
    rows = [
        (label, "lower", ci.lo),
        (label, "upper", ci.hi),
        (label, "level", ci.level),
        (label, "N", ci.N),
        (label, "n", ci.n),
        (label, "ybar_lower", ci.ybar_lower),
        (label, "ybar_upper", ci.ybar_upper),
        (label, "s_lower", ci.s_lower),
        (label, "s_upper", ci.s_upper),
    ]
    if ci.tau_bar is not None:
        rows += [(label, f"tau_bar_{j + 1}", ci.tau_bar[j]) for j in range(k)]
    rows += [(label, "ess_bar", ci.ess_bar), (label, "empty", ci.empty)]
    return rows


def cmd_plain(cfg: ExperimentConfig, workers: int = 1) -> int:
    """Fast-variant intervals for each size in ``run.sizes`` (N = n), one column per size."""
    p, r = cfg.problem, cfg.run
    sizes = r.sizes or [r.n]
    cols, times = [], []
    for size in sizes:
        start = time.perf_counter()
        ci = confidence_interval_fast(r.seed, size, size, p, cfg.optimizer, r.level, workers)
        times.append(time.perf_counter() - start)
        cols.append(ci)
    labels = ["N", "n", "lower", "upper"] + [f"tau_bar_{j + 1}" for j in range(p.k)] + ["ess_bar", "empty"]
    columns = [[size, size, ci.lo, ci.hi, *ci.tau_bar, ci.ess_bar, ci.empty] for size, ci in zip(sizes, cols)]
    table = [[label] + [col[i] for col in columns] for i, label in enumerate(labels)]
    header = ["quantity"] + [f"size_{s}" for s in sizes]
    write_csv(cfg.output / "plain.csv", cfg, "plain", header, table)
    write_csv(cfg.output / "plain_timing.csv", cfg, "plain", header, [["seconds"] + times])
    return EXIT_OK


def cmd_iterate(cfg: ExperimentConfig, workers: int = 1) -> int:
    """Iterated importance sampling followed by the selected interval."""
    p, r = cfg.problem, cfg.run
    res = run_full_pipeline(
        p, cfg.initial_t, r.n, r.N, r.seed, fast=r.mode == "fast", level=r.level,
        ess_fraction=r.ess_fraction, max_iter=r.max_iter, N_small=r.n_small, tol_tau=r.tol_tau,
        cfg=cfg.optimizer, workers=workers, fresh_seeds=r.fresh_seeds,
    )
    k = p.k
    header = ["iteration", "ess", "value"] + [f"t_in_{j + 1}" for j in range(k)] + [f"tau_{j + 1}" for j in range(k)]
    rows = [
        [i + 1, rec.ess, rec.value, *rec.t_in, *rec.tau_out] for i, rec in enumerate(res.trace.records)
    ]
    write_csv(cfg.output / "iterate_trace.csv", cfg, "iterate", header, rows)
    ci = confidence_interval_biased(res.ci, r.beta) if r.beta > 0 else res.ci
    summary = [
        ("pipeline", "terminated_by", res.trace.terminated_by),
        ("pipeline", "iterations", res.trace.iterations),
        ("pipeline", "mode", res.mode),
        ("pipeline", "fell_back", res.fell_back),
        ("pipeline", "beta", r.beta),
        ("stability", "stable", res.stability.stable),
        ("stability", "max_tau_deviation", res.stability.max_tau_deviation),
        ("stability", "min_ess", res.stability.min_ess),
    ] + [("pipeline", f"final_t_{j + 1}", res.final_t[j]) for j in range(k)]
    write_csv(
        cfg.output / "iterate_ci.csv", cfg, "iterate", ["section", "quantity", "value"],
        summary + _ci_rows(res.mode, ci, k),
    )
    write_csv(
        cfg.output / "iterate_timing.csv", cfg, "iterate", ["iteration", "seconds"],
        [[i + 1, rec.wall_time] for i, rec in enumerate(res.trace.records)],
    )
    return EXIT_OK


def cmd_direct_ci(cfg: ExperimentConfig, workers: int = 1) -> int:
    """Plain t-interval from ``N * n`` draws of ``p_t`` at ``model.initial_t``."""
    p, r = cfg.problem, cfg.run
    ci = direct_mean_ci(cfg.initial_t, r.N * r.n, p, derive_seed(r.seed, 0, "direct"), r.level)
    write_csv(cfg.output / "direct_ci.csv", cfg, "direct-ci", ["section", "quantity", "value"], _ci_rows("direct", ci, p.k))
    return EXIT_OK


def _random_linear_pairs(k: int, count: int, seed: int):
    u = counter_uniforms(seed, np.arange(2 * count * k)).reshape(count, 2, k)
    coeffs = 10.0 * u - 5.0
    return [(GambleSpec.linear(c[0]), GambleSpec.linear(c[1])) for c in coeffs]


def _probe_grid(T, count: int, seed: int) -> np.ndarray:
    flat = sample_dirichlet(DirichletParams(float(T.k), tuple([1.0 / T.k] * T.k)), count, seed).points
    return T.lb_array + T.slack * flat


def cmd_diagnose(cfg: ExperimentConfig, workers: int = 1) -> int:
    """Run the diagnostics listed in ``diagnose.diagnostics``; each writes ``diag_<name>.csv``."""
    d, p, r = cfg.diagnose, cfg.problem, cfg.run
    if not d.diagnostics:
        raise ConfigError(f"diagnose.diagnostics: empty; choose from {', '.join(DIAGNOSTICS)}")
    unknown = [x for x in d.diagnostics if x not in DIAGNOSTICS]
    if unknown:
        raise ConfigError(f"diagnose.diagnostics: unknown {unknown}; valid names are {', '.join(DIAGNOSTICS)}")
    needs_linear = {"d1", "bias", "two-level", "consistency"} & set(d.diagnostics)
    if needs_linear and p.gamble.kind != "linear":
        raise ConfigError(f"gamble.kind: diagnostics {sorted(needs_linear)} need a linear gamble")
    status = EXIT_OK
    grid = grid_points(p.T, d.grid_size, d.grid_mix)
    for name in d.diagnostics:
        seed = derive_seed(r.seed, DIAGNOSTICS.index(name), "diagnostic")
        if name == "d1":
            samples = [residual_process(p, grid, n, d.replications, derive_seed(seed, n, "primary")) for n in d.dn_sizes]
            ref = samples[0]
            rows = []
            for i in range(len(grid)):
                for j in range(i + 1, len(grid)):
                    for smp in samples:
                        rows.append(["pair", i, j, smp.n, empirical_d1(smp, i, j), empirical_d1_se(smp, i, j)])
            for smp in samples[1:]:
                rows.append(["max_rel_dev", "", "", smp.n, scaling_check_dn(smp, ref), ""])
            if len(samples) >= 2:
                rows.append(["slope", "", "", "", dn_slope(samples), ""])
            write_csv(cfg.output / "diag_d1.csv", cfg, "diagnose", ["row", "i", "j", "n", "value", "se"], rows)
        elif name in ("bias", "consistency"):
            fn = empirical_bias_scaling if name == "bias" else finite_T_consistency
            sizes = d.bias_sizes if name == "bias" else d.consistency_sizes
            table = fn(p, grid, sizes, d.replications, seed)
            header, rows = table.rows()
            rows = [list(row) for row in rows]
            rows.append(["slope", table.slope, "", "", ""])
            rows.append(["inversions", table.inversions(), "", "", ""])
            write_csv(cfg.output / f"diag_{name}.csv", cfg, "diagnose", header, rows)
        elif name == "coherence":
            batch = sample_dirichlet(p.q, d.coherence_n, derive_seed(seed, 0, "primary"))
            pairs = _random_linear_pairs(p.k, d.coherence_pairs, derive_seed(seed, 1, "primary"))
            probes = _probe_grid(p.T, d.coherence_probes, derive_seed(seed, 2, "primary"))
            rows = []
            for est in ("self_normalised", "standard"):
                rep = coherence_audit(batch, pairs, p.s, p.T, grid=probes, estimator=est)
                for check, gap in rep.max_gap.items():
                    rows.append([est, check, gap, rep.count(check)])
                if est == "self_normalised" and not rep.ok:
                    status = EXIT_VIOLATION
            write_csv(cfg.output / "diag_coherence.csv", cfg, "diagnose", ["estimator", "check", "max_gap", "violations"], rows)
        elif name == "two-level":
            # the minimising vertex plus small mass shifts away from it
            jmin = int(np.argmin(p.gamble.coeffs))
            e = np.eye(p.k)
            t_star = p.T.vertex(jmin)
            tl_grid = np.array([t_star] + [t_star + d.two_level_step * (e[j] - e[jmin]) for j in range(p.k) if j != jmin])
            rows = []
            for shared in (True, False):
                b = two_level_bias(tl_grid, p.gamble, p.s, d.two_level_n, d.replications, seed, shared)
                rows.append(["shared" if shared else "independent", b.bias, b.se])
            write_csv(cfg.output / "diag_two_level.csv", cfg, "diagnose", ["seeding", "bias", "se"], rows)
    return status


COMMANDS = {"plain": cmd_plain, "iterate": cmd_iterate, "direct-ci": cmd_direct_ci, "diagnose": cmd_diagnose}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lowprev", description="Lower prevision estimation by imprecise importance sampling.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="experiment config (INI)")
        sp.add_argument("--seed", type=int, default=None, help="override run.seed (u64)")
        sp.add_argument("--out", default=None, help="override output.path")
        sp.add_argument("--threads", type=int, default=1, help="worker processes for replications")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, out=args.out)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed: must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        return COMMANDS[args.command](cfg, workers=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateWeightsError, IterationError, ArithmeticError, ModelError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
