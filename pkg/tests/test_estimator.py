import math

import numpy as np
import pytest

import mhtggsp.estimator as est
from mhtggsp.errors import EmptySample, ModelOrderError, NumericalError
from mhtggsp.estimator import (
    FitResult,
    SampleSet,
    bic_select,
    bic_value,
    fit_mle,
    gradient,
    log_likelihood,
)
from mhtggsp.pvalue_model import SIGMOID_BETA, MixtureFamily, sigmoid


def random_samples(rng, M, N, a=0.5):
    v = rng.integers(0, N, M)
    t = rng.uniform(-np.pi, np.pi, M)
    p = rng.random(M) ** (1 / a)
    return SampleSet.from_arrays(v, t, p)


def constant_mle(p):
    """Stationary point of sum ln(a p^(a-1)) in a: a = M / sum ln(1/p)."""
    return len(p) / np.sum(-np.log(p))


def fd_gradient(Xi, samples, basis, h=1e-5):
    g = np.zeros_like(Xi)
    for idx in np.ndindex(Xi.shape):
        e = np.zeros_like(Xi)
        e[idx] = h
        g[idx] = (log_likelihood(Xi + e, samples, basis) - log_likelihood(Xi - e, samples, basis)) / (2 * h)
    return g


class TestLogLikelihood:
    def test_single_sample(self, basis20):
        s = SampleSet.from_arrays([0], [0.0], [1.0])
        assert log_likelihood(np.zeros((1, 1)), s, basis20) == pytest.approx(-0.6931472, abs=1e-7)

    def test_zero_coefficients(self, basis20):
        s = random_samples(np.random.default_rng(0), 50, 20)
        expected = 50 * np.log(0.5) - 0.5 * np.sum(np.log(s.p))
        assert log_likelihood(np.zeros((2, 3)), s, basis20) == pytest.approx(expected, rel=1e-12)

    def test_additive(self, basis20):
        rng = np.random.default_rng(1)
        a, b = random_samples(rng, 30, 20), random_samples(rng, 40, 20)
        Xi = rng.uniform(-3, 3, (2, 2))
        total = log_likelihood(Xi, a.concat(b), basis20)
        assert total == pytest.approx(log_likelihood(Xi, a, basis20) + log_likelihood(Xi, b, basis20), rel=1e-12)

    def test_nonfinite_reports_index(self, basis20):
        class Broken(MixtureFamily):
            def log_density(self, p, zeta):
                out = np.zeros_like(p)
                out[3] = np.nan
                return out

        s = random_samples(np.random.default_rng(2), 10, 20)
        with pytest.raises(NumericalError) as exc:
            log_likelihood(np.zeros((1, 1)), s, basis20, fam=Broken())
        assert exc.value.index == 3

    def test_empty(self, basis20):
        with pytest.raises(EmptySample):
            log_likelihood(np.zeros((1, 1)), SampleSet.from_arrays([], [], []), basis20)


class TestGradient:
    def test_single_sample_score(self, basis20):
        s = SampleSet.from_arrays([0], [0.0], [1.0])
        g = gradient(np.zeros((1, 1)), s, basis20)
        c = 1 / np.sqrt(20) / np.sqrt(2 * np.pi)
        assert g[0, 0] == pytest.approx(0.5 * c)

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, basis20, seed):
        rng = np.random.default_rng(seed)
        s = random_samples(rng, 200, 20, a=rng.uniform(0.2, 0.9))
        Xi = rng.uniform(-5, 5, (2, 3))
        g = gradient(Xi, s, basis20)
        fd = fd_gradient(Xi, s, basis20)
        assert np.max(np.abs(g - fd)) / np.max(np.abs(g)) <= 1e-5

    def test_zero_at_closed_form(self, small_basis):
        rng = np.random.default_rng(7)
        s = random_samples(rng, 400, 3, a=0.4)
        a_hat = constant_mle(s.p)
        xi = math.log(a_hat / (1 - a_hat)) * math.sqrt(2 * math.pi * 3)
        assert np.max(np.abs(gradient([[xi]], s, small_basis))) <= 1e-6


class TestFit:
    @pytest.mark.parametrize("seed", range(5))
    def test_constant_model_oracle(self, small_basis, seed):
        rng = np.random.default_rng(seed)
        s = random_samples(rng, 500, 3, a=rng.uniform(0.3, 0.7))
        fr = fit_mle(s, small_basis, 1, 1)
        a_fit = sigmoid(fr.Xi_hat[0, 0] / math.sqrt(2 * math.pi * 3))
        assert fr.converged
        assert abs(a_fit - constant_mle(s.p)) <= 1e-4

    def test_boundary_when_data_look_null(self, small_basis):
        rng = np.random.default_rng(3)
        s = SampleSet.from_arrays(rng.integers(0, 3, 100), rng.uniform(-np.pi, np.pi, 100),
                                  rng.uniform(0.5, 1, 100))
        assert np.sum(-np.log(s.p)) <= len(s)
        fr = fit_mle(s, small_basis, 1, 1, box=10.0)
        assert fr.converged
        assert fr.Xi_hat[0, 0] == 10.0

    def test_ascent_projection_and_bic(self, basis20):
        rng = np.random.default_rng(4)
        s = random_samples(rng, 300, 20, a=0.3)
        fr = fit_mle(s, basis20, 3, 3, box=2.0)
        assert np.all(np.diff(fr.history) >= 0)
        assert np.all(np.abs(fr.Xi_hat) <= 2.0)
        assert fr.loglik >= log_likelihood(np.zeros((3, 3)), s, basis20)
        assert fr.bic == 9 * math.log(300) - 2 * fr.loglik

    def test_init_respected(self, basis20):
        rng = np.random.default_rng(5)
        s = random_samples(rng, 300, 20, a=0.3)
        init = rng.uniform(-1, 1, (2, 2))
        fr = fit_mle(s, basis20, 2, 2, init=init, max_iters=1)
        assert fr.iterations == 1
        assert fr.loglik >= log_likelihood(init, s, basis20)

    def test_max_iters_flag(self, basis20):
        s = random_samples(np.random.default_rng(6), 300, 20, a=0.3)
        fr = fit_mle(s, basis20, 2, 3, max_iters=1, tol=1e-14)
        assert not fr.converged

    def test_reproducible(self, basis20):
        s = random_samples(np.random.default_rng(8), 300, 20, a=0.3)
        a, b = fit_mle(s, basis20, 2, 3), fit_mle(s, basis20, 2, 3)
        assert a.Xi_hat.tobytes() == b.Xi_hat.tobytes() and a.loglik == b.loglik

    def test_errors(self, path2_basis):
        with pytest.raises(EmptySample):
            fit_mle(SampleSet.from_arrays([], [], []), path2_basis, 1, 1)
        s = SampleSet.from_arrays([0], [0.0], [0.5])
        with pytest.raises(ModelOrderError):
            fit_mle(s, path2_basis, 3, 1)

    def test_to_dict(self, basis20):
        s = random_samples(np.random.default_rng(9), 100, 20)
        d = fit_mle(s, basis20, 2, 1).to_dict()
        assert set(d) >= {"K1", "K2", "Xi", "loglik", "bic", "converged", "iterations", "clamp_count"}


class TestBIC:
    def test_value_e_squared(self):
        assert bic_value(1, 1, math.e ** 2, -3.0) == pytest.approx(2 + 6.0)

    def test_singleton(self, basis20):
        s = random_samples(np.random.default_rng(0), 200, 20)
        sel = bic_select(s, basis20, grid=[(2, 3)])
        assert (sel.best.K1, sel.best.K2) == (2, 3)
        assert len(sel.table) == 1

    def test_equal_loglik_prefers_smaller_model(self, basis20, monkeypatch):
        def fake_fit(samples, spectral, K1, K2, **kw):
            return FitResult(np.zeros((K1, K2)), -10.0, 1, True, bic_value(K1, K2, len(samples), -10.0),
                             0, 10.0)

        monkeypatch.setattr(est, "fit_mle", fake_fit)
        s = random_samples(np.random.default_rng(1), 50, 20)
        sel = bic_select(s, basis20, grid=[(2, 2), (1, 2)])
        assert (sel.best.K1, sel.best.K2) == (1, 2)

    def test_failed_candidate_skipped(self, path2_basis):
        s = random_samples(np.random.default_rng(2), 50, 2)
        sel = bic_select(s, path2_basis, grid=[(3, 1), (1, 1)])
        assert (sel.best.K1, sel.best.K2) == (1, 1)
        assert sel.table[0]["error"] is not None

    def test_recovers_true_order(self, basis20):
        rng = np.random.default_rng(3)
        from mhtggsp.basis import BandlimitedSignal

        sig = BandlimitedSignal([[-20.0, 0.0, 0.0], [0.0, 0.0, 0.0]], basis20, box=50)
        M = 3000
        v, t = rng.integers(0, 20, M), rng.uniform(-np.pi, np.pi, M)
        p = SIGMOID_BETA.sample(sig(v, t), rng)
        s = SampleSet.from_arrays(v, t, p)
        sel = bic_select(s, basis20, grid=[(1, 1), (2, 3), (3, 5)], box=50)
        assert (sel.best.K1, sel.best.K2) == (1, 1)
