import math

import numpy as np
import pytest

from hysi.covariance import sigma_dt, sigma_t_entry, t_statistic
from hysi.errors import EmptyTruncation, SingularGram
from hysi.lasso import Dataset, SelectedModel, partial_out, solve_lasso
from hysi.selection import (SelectionEvent, build_event,
                            decorrelated_statistic, truncation_triple)

from conftest import make_dataset


def pipeline(data, penalty):
    """Shared path: solve, event, decorrelate, triple."""
    y_star, x_star = partial_out(data)
    model = solve_lasso(y_star, x_star, penalty)
    event = build_event(data, model)
    t_value, _, resid = t_statistic(data, model.support)
    s2 = sigma_t_entry(data, model.support, model.support, resid, resid)
    sdt = sigma_dt(data, model, resid)
    z_vec = decorrelated_statistic(event, t_value, s2, sdt)
    triple = truncation_triple(event, z_vec, s2, sdt)
    return model, event, t_value, s2, sdt, z_vec, triple


def dummy_event(linear, z_vec, offset):
    model = SelectedModel(support=(), signs=(), penalty=1.0)
    return SelectionEvent(linear_part=np.asarray(linear, float),
                          stat=np.asarray(z_vec, float),
                          offset=np.asarray(offset, float), model=model, n=10)


class TestBuildEvent:
    def test_empty_support_blocks(self, rng):
        data = make_dataset(rng, n=30, p=4)
        y_star, x_star = partial_out(data)
        lam = float(np.max(np.abs(x_star.T @ y_star))) * 1.2
        model = solve_lasso(y_star, x_star, lam)
        event = build_event(data, model)
        p = data.p
        np.testing.assert_array_equal(event.linear_part,
                                      np.vstack([np.eye(p), -np.eye(p)]))
        expected = lam / math.sqrt(data.n) * np.ones(2 * p)
        np.testing.assert_allclose(event.offset, expected, rtol=1e-12)

    def test_single_orthonormal_column_offset(self, rng):
        n = 40
        z = rng.standard_normal(n)
        x = rng.standard_normal(n)
        x -= z * (z @ x) / (z @ z)  # already orthogonal to z
        x /= np.linalg.norm(x)
        data = Dataset(y=rng.standard_normal(n), z=z, controls=x[:, None])
        lam = 0.5
        model = SelectedModel(support=(0,), signs=(1,), penalty=lam)
        event = build_event(data, model)
        assert event.offset[0] == pytest.approx(-lam * math.sqrt(n), rel=1e-10)

    def test_block_dimensions(self, rng):
        for _ in range(20):
            data = make_dataset(rng)
            model, event, *_ = pipeline(data, 4.0)
            assert event.num_rows == 2 * data.p - model.size
            assert event.stat.shape == (data.p,)

    def test_constraints_hold_strictly_generic(self, rng):
        for _ in range(20):
            data = make_dataset(rng)
            model, event, *_ = pipeline(data, 4.0)
            slack = event.offset - event.linear_part @ event.stat
            assert np.all(slack > 0.0)

    def test_singular_gram_raises(self, rng):
        n = 30
        base = rng.standard_normal(n)
        controls = np.column_stack([base, base, rng.standard_normal(n)])
        data = Dataset(y=rng.standard_normal(n), z=rng.standard_normal(n),
                       controls=controls)
        model = SelectedModel(support=(0, 1), signs=(1, 1), penalty=1.0)
        with pytest.raises(SingularGram):
            build_event(data, model)


class TestDecorrelatedStatistic:
    def test_zero_covariance_is_identity(self, rng):
        data = make_dataset(rng)
        _, event, t_value, s2, _, _, _ = pipeline(data, 4.0)
        z_vec = decorrelated_statistic(event, t_value, s2, np.zeros(data.p))
        np.testing.assert_array_equal(z_vec, event.stat)

    def test_zero_statistic_is_identity(self, rng):
        data = make_dataset(rng)
        _, event, _, s2, sdt, _, _ = pipeline(data, 4.0)
        z_vec = decorrelated_statistic(event, 0.0, s2, sdt)
        np.testing.assert_array_equal(z_vec, event.stat)

    def test_scalar_arithmetic(self):
        event = dummy_event([[1.0]], [3.0], [0.0])
        z_vec = decorrelated_statistic(event, 2.0, 2.0, np.array([1.0]))
        assert z_vec[0] == pytest.approx(3.0 - 0.5 * 2.0)


class TestTruncationTriple:
    def test_single_positive_row(self):
        event = dummy_event([[1.0]], [0.0], [5.0])
        triple = truncation_triple(event, [0.0], 1.0, np.array([1.0]))
        assert triple.lower == -math.inf
        assert triple.upper == 5.0
        assert triple.zero_slack == math.inf

    def test_two_rows_opposite_signs(self):
        event = dummy_event([[1.0], [-1.0]], [0.0], [5.0, 3.0])
        triple = truncation_triple(event, [0.0], 1.0, np.array([1.0]))
        assert triple.lower == -3.0
        assert triple.upper == 5.0
        assert triple.zero_slack == math.inf

    def test_zero_rows_collect_slack(self):
        linear = [[1.0, 0.0], [0.0, 1.0]]
        event = dummy_event(linear, [0.0, 0.0], [5.0, 7.0])
        triple = truncation_triple(event, [0.0, 0.0], 1.0, np.array([1.0, 0.0]))
        assert triple.upper == 5.0
        assert triple.zero_slack == 7.0

    def test_infeasible_raises(self):
        event = dummy_event([[1.0], [-1.0]], [0.0], [-5.0, -3.0])
        with pytest.raises(EmptyTruncation):
            truncation_triple(event, [0.0], 1.0, np.array([1.0]))

    def test_observed_statistic_inside_interval(self, rng):
        for _ in range(300):
            data = make_dataset(rng)
            _, _, t_value, _, _, _, triple = pipeline(data, 4.0)
            assert triple.lower - 1e-8 <= t_value <= triple.upper + 1e-8
            assert triple.zero_slack >= -1e-8

    def test_recentering_equivariance(self, rng):
        for _ in range(50):
            data = make_dataset(rng)
            _, event, _, s2, sdt, z_vec, triple = pipeline(data, 4.0)
            shift = float(rng.normal(0.0, 10.0))
            shifted = z_vec + (sdt / s2) * shift
            moved = truncation_triple(event, shifted, s2, sdt)
            scale = max(1.0, abs(triple.lower), abs(triple.upper))
            if math.isfinite(triple.lower):
                assert abs(moved.lower - (triple.lower - shift)) < 1e-9 * scale
            if math.isfinite(triple.upper):
                assert abs(moved.upper - (triple.upper - shift)) < 1e-9 * scale
            assert moved.zero_slack == pytest.approx(triple.zero_slack,
                                                     rel=1e-9, abs=1e-12)

    def test_polyhedron_interval_equivalence(self, rng):
        for _ in range(50):
            data = make_dataset(rng)
            _, event, _, s2, sdt, z_vec, triple = pipeline(data, 4.0)
            direction = sdt / s2
            lo = triple.lower if math.isfinite(triple.lower) else -50.0
            hi = triple.upper if math.isfinite(triple.upper) else 50.0
            for t in np.linspace(lo + 1e-6, hi - 1e-6, 7):
                stat = z_vec + direction * t
                slack = event.offset - event.linear_part @ stat
                assert np.all(slack >= -1e-8)
            margin = 1e-3 * max(1.0, abs(hi), abs(lo))
            if math.isfinite(triple.upper):
                stat = z_vec + direction * (triple.upper + margin)
                assert np.min(event.offset - event.linear_part @ stat) < 0.0
            if math.isfinite(triple.lower):
                stat = z_vec + direction * (triple.lower - margin)
                assert np.min(event.offset - event.linear_part @ stat) < 0.0
