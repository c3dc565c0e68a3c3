import numpy as np
import pytest
from scipy import stats

from lowprev import confint
from lowprev.confint import (
    ConfidenceInterval,
    confidence_interval_biased,
    confidence_interval_exact,
    confidence_interval_fast,
    direct_mean_ci,
    reg_incomplete_beta,
    t_critical,
)
from lowprev.estimator import DegenerateWeightsError
from lowprev.model import ConstrainedSimplex, GambleSpec, Problem

from conftest import DIRICHLET_COEFFS, ENTROPY_EXACT, T_STAR


class TestTCritical:
    def test_examples(self):
        assert t_critical(10**6, 0.95) == pytest.approx(1.95997, abs=1e-5)
        assert t_critical(1, 0.95) == pytest.approx(12.7062, abs=1e-4)
        # the oracle gives 1.978820 at df=127; the often-quoted 1.97867 is the df=128 value
        assert t_critical(127, 0.95) == pytest.approx(1.978820, abs=1e-6)
        assert t_critical(128, 0.95) == pytest.approx(1.97867, abs=1e-5)

    def test_monotone(self):
        dfs = [1, 2, 3, 5, 10, 30, 127, 1000]
        levels = [0.5, 0.8, 0.9, 0.95, 0.99]
        grid = np.array([[t_critical(d, lv) for lv in levels] for d in dfs])
        assert np.all(np.diff(grid, axis=0) < 0)
        assert np.all(np.diff(grid, axis=1) > 0)

    def test_errors(self):
        with pytest.raises(ValueError):
            t_critical(0, 0.95)
        with pytest.raises(ValueError):
            t_critical(5, 1.0)

    def test_incomplete_beta_against_scipy(self):
        from scipy.special import betainc

        for a, b, x in [(0.5, 0.5, 0.3), (2.0, 3.0, 0.9), (50.0, 0.5, 0.99), (1.0, 1.0, 0.25)]:
            assert reg_incomplete_beta(a, b, x) == pytest.approx(betainc(a, b, x), rel=1e-12)

    def test_against_scipy_ppf(self):
        for df in (1, 4, 9, 63, 500):
            for lv in (0.8, 0.95, 0.999):
                assert t_critical(df, lv) == pytest.approx(stats.t.ppf(1 - (1 - lv) / 2, df), rel=1e-9)


@pytest.fixture
def tstar_problem(dirichlet_problem):
    return dirichlet_problem.with_sampling(T_STAR)


class TestReplicatedIntervals:
    def test_exact_dirichlet(self, tstar_problem):
        ci = confidence_interval_exact(1, 128, 128, tstar_problem)
        assert ci.contains(-0.6) and ci.width <= 0.12 and ci.lo <= ci.hi
        assert np.max(np.abs(np.array(ci.tau_bar) - T_STAR)) <= 0.01
        assert 120 <= ci.ess_bar <= 128
        assert ci.method == "exact" and not ci.empty

    def test_fast_close_to_exact(self, tstar_problem):
        e = confidence_interval_exact(2, 64, 128, tstar_problem)
        f = confidence_interval_fast(2, 64, 128, tstar_problem)
        # the lower halves share every replication; the upper halves differ only by noise
        assert f.lo == e.lo
        assert abs(f.hi - e.hi) <= 3 * np.hypot(e.s_upper, f.s_upper) / np.sqrt(64)

    def test_constant_gamble(self, dirichlet_T):
        p = Problem(2.0, dirichlet_T, GambleSpec.linear((0.4,) * 5))
        for fn in (confidence_interval_exact, confidence_interval_fast):
            ci = fn(3, 4, 16, p)
            assert ci.lo == pytest.approx(0.4, abs=1e-14) and ci.hi == pytest.approx(0.4, abs=1e-14)
            assert not ci.empty

    def test_fast_empty_flag(self):
        # singleton T: lower and upper values are i.i.d., so with N=2 some seeds give lo > hi
        p = Problem(2.0, ConstrainedSimplex((0.2, 0.8)), GambleSpec.linear((1.0, -1.0)), (0.5, 0.5))
        found = None
        for seed in range(400):
            ci = confidence_interval_fast(seed, 2, 8, p, level=0.5)
            assert ci.empty == (ci.lo > ci.hi)
            if ci.empty:
                found = ci
                break
        assert found is not None and not found.contains(found.ybar_lower)
        # the exact construction never comes out reversed on the same seeds
        assert not confidence_interval_exact(seed, 2, 8, p, level=0.5).empty

    def test_workers_do_not_change_result(self, tstar_problem):
        a = confidence_interval_exact(5, 6, 32, tstar_problem, workers=1)
        b = confidence_interval_exact(5, 6, 32, tstar_problem, workers=2)
        assert a == b

    def test_replication_index_in_error(self, tstar_problem, monkeypatch):
        def boom(*args, **kwargs):
            raise DegenerateWeightsError("degenerate weights")

        monkeypatch.setattr(confint, "tau", boom)
        with pytest.raises(DegenerateWeightsError, match="replication 0"):
            confidence_interval_exact(1, 3, 8, tstar_problem)

    def test_needs_two_replications(self, tstar_problem):
        with pytest.raises(ValueError):
            confidence_interval_exact(1, 1, 8, tstar_problem)


class TestBiased:
    def _ci(self, lo, hi):
        return ConfidenceInterval(lo, hi, 0.95, 128, 128, lo, hi, 0.1, 0.1)

    def test_identity_and_widening(self):
        ci = self._ci(-0.640, -0.585)
        assert confidence_interval_biased(ci, 0.0) == ci
        wide = confidence_interval_biased(ci, 0.1)
        assert wide.lo == pytest.approx(-0.740) and wide.hi == pytest.approx(-0.485)
        assert wide.N == ci.N and wide.ybar_lower == ci.ybar_lower

    @pytest.mark.parametrize("beta", [1e-9, 0.01, 0.5, 3.0])
    def test_nesting(self, beta):
        ci = self._ci(-0.640, -0.585)
        wide = confidence_interval_biased(ci, beta)
        assert wide.lo < ci.lo and wide.hi > ci.hi

    def test_negative_beta(self):
        with pytest.raises(ValueError):
            confidence_interval_biased(self._ci(0, 1), -0.1)


class TestDirect:
    def test_dirichlet(self, dirichlet_problem):
        ci = direct_mean_ci(T_STAR, 16384, dirichlet_problem, 11)
        assert ci.contains(-0.6)
        # reference interval [-0.638, -0.584] has width 0.054
        assert ci.width == pytest.approx(0.054, rel=0.15)

    def test_entropy(self, entropy_problem):
        ci = direct_mean_ci((0.3, 0.7), 10_000, entropy_problem, 12)
        assert ci.contains(ENTROPY_EXACT)
        # reference interval [0.56133, 0.56609] has width 0.00476
        assert ci.width == pytest.approx(0.00476, rel=0.15)

    def test_constant(self, dirichlet_T):
        p = Problem(2.0, dirichlet_T, GambleSpec.linear((-2.0,) * 5))
        ci = direct_mean_ci(T_STAR, 100, p, 1)
        assert ci.lo == pytest.approx(-2.0, abs=1e-14) and ci.hi == pytest.approx(-2.0, abs=1e-14)

    def test_rejects_tiny_sample(self, dirichlet_problem):
        with pytest.raises(ValueError):
            direct_mean_ci(T_STAR, 1, dirichlet_problem, 1)
