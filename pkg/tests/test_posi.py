import math

import numpy as np
import pytest

from hysi.covariance import CovarianceEstimates, ModelUniverse, \
    build_universe_covariance
from hysi.numerics import RngStream
from hysi.posi import PosiConstant, posi_constant, posi_constants, posi_interval

from conftest import make_dataset

# closed form 2*Phi(K) - 1 = (1 - alpha)^(1/m) at alpha = 0.05, via mpmath
INDEPENDENT_K = {1: 1.9599639845400545, 16: 2.9477751533229, 1024: 4.055207332382}


def identity_cov(m):
    """Synthetic influence with exactly orthonormal rows: Omega = I_m."""
    universe = ModelUniverse.all_subsets(0)
    influence = math.sqrt(m) * np.eye(m)
    variances = np.ones(m)
    return CovarianceEstimates(universe=universe, influence=influence,
                               t_variances=variances, n=m)


def equicorrelated_cov(m, n):
    """All rows identical: perfectly correlated coordinates."""
    universe = ModelUniverse.all_subsets(0)
    row = np.ones(n)
    influence = np.tile(row, (m, 1))
    variances = np.full(m, float(row @ row) / n)
    return CovarianceEstimates(universe=universe, influence=influence,
                               t_variances=variances, n=n)


class TestPosiConstant:
    @pytest.mark.parametrize("m", [1, 16, 1024])
    def test_independent_closed_form(self, m):
        constant = posi_constant(identity_cov(m), 0.05, rng=RngStream(42))
        tolerance = 2.0 * constant.std_error
        assert constant.value == pytest.approx(INDEPENDENT_K[m], abs=tolerance)

    def test_perfect_correlation_equals_single(self):
        single = posi_constant(identity_cov(1), 0.05, rng=RngStream(8))
        # identical rows share the single row's scaled influence, and the
        # same seed replays the same noise, so the maxima agree exactly
        correlated = posi_constant(equicorrelated_cov(64, 1), 0.05,
                                   rng=RngStream(8))
        assert correlated.value == single.value

    def test_monotone_in_alpha(self, rng):
        data = make_dataset(rng, p=6)
        cov = build_universe_covariance(data, ModelUniverse.all_subsets(6))
        constants = posi_constants(cov, [0.005, 0.05], rng=RngStream(3))
        assert constants[0.005].value > constants[0.05].value

    def test_simultaneous_at_least_pointwise(self, rng):
        data = make_dataset(rng, p=5)
        cov = build_universe_covariance(data, ModelUniverse.all_subsets(5))
        constant = posi_constant(cov, 0.05, rng=RngStream(4))
        assert constant.value >= 1.9599639845400545

    def test_zero_alpha_is_infinite(self):
        constant = posi_constant(identity_cov(4), 0.0, rng=RngStream(0))
        assert math.isinf(constant.value)

    def test_seed_reproducibility(self):
        a = posi_constant(identity_cov(16), 0.05, rng=RngStream(77))
        b = posi_constant(identity_cov(16), 0.05, rng=RngStream(77))
        assert a.value == b.value
        assert a.std_error == b.std_error

    def test_draw_floor(self):
        with pytest.raises(ValueError):
            posi_constant(identity_cov(2), 0.05, draws=500, rng=RngStream(0))

    def test_sampling_induces_target_correlation(self, rng):
        # replay the factor sampler and compare the empirical correlation of
        # the scores with corr(Sigma_T) entrywise
        data = make_dataset(rng, p=4)
        cov = build_universe_covariance(data, ModelUniverse.all_subsets(4))
        scale = 1.0 / np.sqrt(cov.n * cov.t_variances)
        factor = cov.influence * scale[:, None]
        noise = RngStream(11).generator().standard_normal((cov.n, 100_000))
        scores = factor @ noise
        empirical = np.corrcoef(scores)
        sigma = cov.sigma_t_matrix()
        d = 1.0 / np.sqrt(np.diag(sigma))
        omega = sigma * np.outer(d, d)
        assert np.max(np.abs(empirical - omega)) < 0.02


class TestPosiInterval:
    def test_degenerate_constant(self):
        k = PosiConstant(value=0.0, alpha=0.5, draws=1000, stream=None,
                         std_error=0.0)
        assert posi_interval(1.5, 4.0, k) == (1.5, 1.5)

    def test_simple_band(self):
        k = PosiConstant(value=2.0, alpha=0.05, draws=1000, stream=None,
                         std_error=0.0)
        lo, hi = posi_interval(0.0, 1.0, k)
        assert (lo, hi) == (-2.0, 2.0)

    def test_contains_naive_interval(self, rng):
        data = make_dataset(rng, p=5)
        cov = build_universe_covariance(data, ModelUniverse.all_subsets(5))
        constant = posi_constant(cov, 0.05, rng=RngStream(21))
        sigma = 1.7
        lo, hi = posi_interval(0.3, sigma ** 2, constant)
        naive_half = 1.9599639845400545 * sigma
        assert lo <= 0.3 - naive_half
        assert hi >= 0.3 + naive_half

    def test_variance_validation(self):
        k = PosiConstant(value=2.0, alpha=0.05, draws=1000, stream=None,
                         std_error=0.0)
        with pytest.raises(ValueError):
            posi_interval(0.0, 0.0, k)
