import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lowprev.estimator import (
    DegenerateWeightsError,
    effective_sample_size,
    log_density_ratio,
    log_unnormalised_weights,
    self_normalised_estimate,
    standard_estimate,
)
from lowprev.model import DirichletParams, ModelError, dirichlet_logpdf, exact_expectation_linear
from lowprev.sampling import SampleBatch, derive_seed, sample_dirichlet

from conftest import DIRICHLET_COEFFS


def _batch(points, q):
    points = np.asarray(points, dtype=float)
    with np.errstate(divide="ignore"):
        return SampleBatch(points, np.log(points), q, 0)


class TestLogWeights:
    def test_identical_densities(self):
        q = DirichletParams(2.0, (0.2,) * 5)
        b = sample_dirichlet(q, 30, 1)
        assert np.all(log_unnormalised_weights(2.0, q.t, q, b).logw == 0)

    def test_hand_arithmetic(self):
        q = DirichletParams(2.0, (0.5, 0.5))
        lw = log_unnormalised_weights(2.0, (0.6, 0.4), q, _batch([[0.5, 0.5]], q))
        assert lw.logw[0] == pytest.approx((1.2 - 1) * np.log(0.5) + (0.8 - 1) * np.log(0.5), abs=1e-15)
        assert lw.logw[0] == pytest.approx(0.0, abs=1e-15)

    def test_pdf_ratio_constancy(self):
        q = DirichletParams(2.0, (0.2,) * 5)
        t = (0.1, 0.1, 0.1, 0.1, 0.6)
        b = sample_dirichlet(q, 200, 2)
        lw = log_unnormalised_weights(2.0, t, q, b).logw
        ratio = dirichlet_logpdf(DirichletParams(2.0, t), b.points) - dirichlet_logpdf(q, b.points)
        const = ratio - lw
        assert np.ptp(np.exp(const)) <= 1e-10 * np.exp(const).mean()
        assert np.allclose(log_density_ratio(2.0, t, q, b), ratio, atol=1e-10)

    def test_rejects_boundary_points(self):
        q = DirichletParams(2.0, (0.5, 0.5))
        with pytest.raises(ModelError):
            log_unnormalised_weights(2.0, (0.5, 0.5), q, _batch([[0.0, 1.0]], q))


class TestSelfNormalised:
    def test_constant_weights(self):
        f = np.array([1.0, 4.0, -2.0, 0.5])
        rep = self_normalised_estimate(np.full(4, -3.0), f)
        assert rep.estimate == pytest.approx(f.mean()) and rep.ess == 4

    def test_constant_gamble(self):
        rep = self_normalised_estimate(np.array([0.0, -5.0, 2.0, 1.3]), np.full(4, 2.7))
        assert rep.estimate == 2.7 and rep.sigma_hat == 0.0

    def test_hand_example(self):
        rep = self_normalised_estimate(np.log([1.0, 1.0, 2.0]), np.array([0.0, 1.0, 1.0]))
        assert rep.estimate == pytest.approx(0.75, abs=1e-15)
        assert rep.ess == pytest.approx(16 / 6, abs=1e-14)
        # sigma^2 = 1/(n-1) * mean(u^2 (f - est)^2) / mean(u)^2 with max-shifted u = (1/2, 1/2, 1)
        u = np.array([0.5, 0.5, 1.0])
        f = np.array([0.0, 1.0, 1.0])
        ref = np.sqrt(np.mean(u**2 * (f - 0.75) ** 2) / np.mean(u) ** 2 / 2)
        assert rep.sigma_hat == pytest.approx(ref, rel=1e-14)

    def test_degenerate(self):
        with pytest.raises(DegenerateWeightsError):
            self_normalised_estimate(np.array([np.nan, 0.0]), np.zeros(2))
        with pytest.raises(DegenerateWeightsError):
            self_normalised_estimate(np.array([-np.inf, -np.inf]), np.zeros(2))

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            self_normalised_estimate(np.zeros(1), np.zeros(1))


class TestStandard:
    def test_hand_example(self):
        assert standard_estimate(np.array([2.0, 0.0]), np.array([1.0, 5.0])).estimate == 1.0

    def test_plain_mc(self):
        f = np.array([3.0, 1.0, 2.0])
        assert standard_estimate(np.ones(3), f).estimate == pytest.approx(2.0)

    def test_unbiased(self):
        q = DirichletParams(2.0, (0.2,) * 5)
        t = (0.1, 0.1, 0.1, 0.1, 0.6)
        ests = []
        for r in range(200):
            b = sample_dirichlet(q, 64, derive_seed(5, r, "diagnostic"))
            w = np.exp(log_density_ratio(2.0, t, q, b))
            ests.append(standard_estimate(w, b.points @ np.array(DIRICHLET_COEFFS)).estimate)
        ests = np.array(ests)
        se = ests.std(ddof=1) / np.sqrt(ests.size)
        assert abs(ests.mean() - exact_expectation_linear(DIRICHLET_COEFFS, t)) <= 3 * se

    def test_nonfinite_weight(self):
        with pytest.raises(DegenerateWeightsError):
            standard_estimate(np.array([np.inf, 1.0]), np.ones(2))


class TestESS:
    def test_examples(self):
        assert effective_sample_size(np.zeros(7)) == 7
        assert effective_sample_size(np.array([0.0, -1000.0, -2000.0])) == 1
        assert effective_sample_size(np.log([1.0, 1.0, 2.0])) == pytest.approx(16 / 6)


logws = arrays(np.float64, st.integers(2, 40), elements=st.floats(-50, 50))


@settings(max_examples=200, deadline=None)
@given(logws, st.floats(-300, 300), st.data())
def test_shift_invariance(lw, c, data):
    f = data.draw(arrays(np.float64, lw.size, elements=st.floats(-100, 100)))
    a = self_normalised_estimate(lw, f)
    b = self_normalised_estimate(lw + c, f)
    assert b.estimate == pytest.approx(a.estimate, rel=1e-9, abs=1e-9)
    assert b.sigma_hat == pytest.approx(a.sigma_hat, rel=1e-9, abs=1e-9)
    assert b.ess == pytest.approx(a.ess, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(logws, st.data())
def test_range_and_ess_bounds(lw, data):
    f = data.draw(arrays(np.float64, lw.size, elements=st.floats(-100, 100)))
    rep = self_normalised_estimate(lw, f)
    assert f.min() <= rep.estimate <= f.max()
    assert 1 <= rep.ess <= lw.size
    assert rep.sigma_hat >= 0


@settings(max_examples=200, deadline=None)
@given(logws, st.data())
def test_monotone_dominance(lw, data):
    f = data.draw(arrays(np.float64, lw.size, elements=st.floats(-100, 100)))
    gap = data.draw(arrays(np.float64, lw.size, elements=st.floats(0, 10)))
    assert self_normalised_estimate(lw, f).estimate <= self_normalised_estimate(lw, f + gap).estimate
