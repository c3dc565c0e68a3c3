import numpy as np
import pytest

from lowprev import iterate as iterate_mod
from lowprev.estimator import DegenerateWeightsError
from lowprev.iterate import (
    IterationError,
    StabilityReport,
    iterate_importance,
    run_full_pipeline,
    stability_check,
)
from lowprev.model import ConstrainedSimplex, GambleSpec, Problem

from conftest import ACCEPTANCE_SEED, T_STAR


def _strip_times(trace):
    return [(r.t_in, r.tau_out, r.ess, r.value) for r in trace.records]


class TestIterate:
    def test_dirichlet_converges(self, dirichlet_problem):
        t, trace = iterate_importance(dirichlet_problem, (0.2,) * 5, 128, ACCEPTANCE_SEED)
        assert trace.terminated_by == "ess_saturation" and trace.iterations <= 5
        assert trace.records[-1].ess >= 0.95 * 128
        assert np.max(np.abs(t - T_STAR)) <= 0.02
        assert dirichlet_problem.T.contains(t)

    def test_ess_non_decreasing_on_golden_seeds(self, dirichlet_problem, entropy_problem):
        for prob, t0, n in [(dirichlet_problem, (0.2,) * 5, 128), (entropy_problem, (0.35, 0.65), 1000)]:
            _, trace = iterate_importance(prob, t0, n, ACCEPTANCE_SEED)
            ess = [r.ess for r in trace.records]
            assert all(b >= a for a, b in zip(ess, ess[1:]))
            assert all(1 <= e <= n for e in ess)

    def test_entropy_converges(self, entropy_problem):
        t, trace = iterate_importance(entropy_problem, (0.35, 0.65), 1000, ACCEPTANCE_SEED)
        assert trace.iterations <= 3
        assert np.max(np.abs(t - (0.3, 0.7))) <= 1e-3

    def test_singleton_one_iteration(self):
        p = Problem(2.0, ConstrainedSimplex(T_STAR), GambleSpec.linear((1, 2, 5, 4, -3)))
        t, trace = iterate_importance(p, T_STAR, 64, 1)
        assert trace.iterations == 1 and trace.records[0].ess == 64

    def test_reproducible(self, dirichlet_problem):
        a = iterate_importance(dirichlet_problem, (0.2,) * 5, 64, 9)[1]
        b = iterate_importance(dirichlet_problem, (0.2,) * 5, 64, 9)[1]
        assert _strip_times(a) == _strip_times(b)

    def test_fresh_seeds_flag(self, dirichlet_problem):
        a = iterate_importance(dirichlet_problem, (0.2,) * 5, 64, 9, max_iter=3, ess_fraction=1.0)[1]
        b = iterate_importance(dirichlet_problem, (0.2,) * 5, 64, 9, max_iter=3, ess_fraction=1.0, fresh_seeds=True)[1]
        assert a.records[0].value == b.records[0].value
        if a.iterations > 1 and b.iterations > 1:
            assert a.records[1].t_in != b.records[1].t_in or a.records[1].value != b.records[1].value

    def test_max_iterations(self, dirichlet_problem):
        t, trace = iterate_importance(dirichlet_problem, (0.2,) * 5, 16, 3, ess_fraction=1.0, max_iter=1)
        assert trace.terminated_by in ("max_iterations", "ess_saturation") and trace.iterations == 1
        assert np.array_equal(t, np.array(trace.final_t))

    def test_argument_errors(self, dirichlet_problem):
        with pytest.raises(ValueError, match="no iterations permitted"):
            iterate_importance(dirichlet_problem, (0.2,) * 5, 16, 3, max_iter=0)
        with pytest.raises(ValueError):
            iterate_importance(dirichlet_problem, (0.2,) * 5, 16, 3, ess_fraction=0.0)
        with pytest.raises(ValueError):
            iterate_importance(dirichlet_problem, (0.05, 0.15, 0.2, 0.2, 0.4), 16, 3)

    def test_error_carries_trace(self, dirichlet_problem, monkeypatch):
        real_tau = iterate_mod.tau
        calls = {"n": 0}

        def flaky(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 2:
                raise DegenerateWeightsError("degenerate weights")
            return real_tau(*args, **kwargs)

        monkeypatch.setattr(iterate_mod, "tau", flaky)
        with pytest.raises(IterationError, match="iteration 2") as info:
            iterate_importance(dirichlet_problem, (0.2,) * 5, 64, 1, ess_fraction=1.0, fresh_seeds=True)
        assert info.value.trace.iterations == 1


class TestStability:
    def test_stable_at_tstar(self, dirichlet_problem):
        rep = stability_check(dirichlet_problem, T_STAR, 128, ACCEPTANCE_SEED)
        assert rep.stable and rep.min_ess >= 0.95 * 128

    def test_unstable_at_uniform(self, dirichlet_problem):
        rep = stability_check(dirichlet_problem, (0.2,) * 5, 128, ACCEPTANCE_SEED)
        assert not rep.stable and rep.min_ess < 0.95 * 128

    def test_singleton_always_stable(self):
        p = Problem(10.0, ConstrainedSimplex((0.3, 0.7)), GambleSpec.entropy())
        assert stability_check(p, (0.3, 0.7), 50, 1).stable


class TestPipeline:
    def test_exact_mode(self, dirichlet_problem):
        res = run_full_pipeline(dirichlet_problem, (0.2,) * 5, 128, 128, ACCEPTANCE_SEED)
        assert res.mode == "exact" and not res.fell_back
        assert res.ci.contains(-0.6) and res.ci.width <= 0.12

    def test_fast_mode(self, dirichlet_problem):
        res = run_full_pipeline(dirichlet_problem, (0.2,) * 5, 128, 128, ACCEPTANCE_SEED, fast=True)
        assert res.mode == "direct" and res.ci.n == 128 * 128
        assert res.ci.contains(-0.6)

    def test_fallback(self, dirichlet_problem, monkeypatch):
        monkeypatch.setattr(iterate_mod, "stability_check", lambda *a, **k: StabilityReport(False, 0.5, 3.0))
        res = run_full_pipeline(dirichlet_problem, (0.2,) * 5, 32, 4, 1, fast=True)
        assert res.mode == "exact" and res.fell_back

    def test_stage_labels(self, dirichlet_problem, monkeypatch):
        def fail(*a, **k):
            raise DegenerateWeightsError("degenerate weights")

        monkeypatch.setattr(iterate_mod, "stability_check", fail)
        with pytest.raises(DegenerateWeightsError, match="^stability:"):
            run_full_pipeline(dirichlet_problem, (0.2,) * 5, 32, 4, 1)
        monkeypatch.setattr(iterate_mod, "tau", fail)
        with pytest.raises(IterationError, match="^iterate:"):
            run_full_pipeline(dirichlet_problem, (0.2,) * 5, 32, 4, 1)
