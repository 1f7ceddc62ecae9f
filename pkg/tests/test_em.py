import numpy as np
import pytest

from lcmopt.em import EmConfig, fit_em, m_step_categorical, m_step_weights
from lcmopt.model import Dataset, LcmParams, log_likelihood
from lcmopt.simulate import get_bundle, random_params, sample


class TestMSteps:
    def test_weights_uniform(self):
        np.testing.assert_allclose(m_step_weights(np.full((4, 2), 0.5)), [0.5, 0.5])

    def test_weights_hard_assignment(self):
        D = [[1, 0], [1, 0], [0, 1], [0, 1]]
        np.testing.assert_allclose(m_step_weights(D), [0.5, 0.5])

    def test_weights_column_means(self):
        D = np.tile([1 / 3, 2 / 3], (3, 1))
        w = m_step_weights(D)
        np.testing.assert_allclose(w, [1 / 3, 2 / 3], rtol=1e-15)
        assert abs(w.sum() - 1) <= 1e-12

    def test_categorical_hard_assignment(self):
        data = Dataset([[1], [1], [2], [2]])
        D = np.array([[1, 0], [1, 0], [1, 0], [0, 1]], dtype=float)
        # class 0 holds rows 1, 1, 2 after the pattern order is restored
        D = D[[0, 1, 2, 3]]
        rows = m_step_categorical(data, D)
        np.testing.assert_allclose(rows[0][0], [2 / 3, 1 / 3], rtol=1e-15)
        np.testing.assert_allclose(rows[1][0], [0, 1])

    def test_categorical_uniform_split(self):
        data = Dataset([[1], [2], [1], [2]])
        rows = m_step_categorical(data, np.full((4, 3), 1 / 3))
        for k in range(3):
            np.testing.assert_allclose(rows[k][0], [0.5, 0.5])

    def test_empty_class_falls_back_to_uniform(self):
        data = Dataset([[1, 3], [2, 1]])
        D = np.array([[1.0, 0.0], [1.0, 0.0]])
        rows = m_step_categorical(data, D)
        np.testing.assert_allclose(rows[1][0], [0.5, 0.5])
        np.testing.assert_allclose(rows[1][1], [1 / 3] * 3)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EmConfig(epsilon=0)
        with pytest.raises(ValueError):
            EmConfig(max_iter=0)


class TestFitEm:
    def test_fixed_point_one_class(self):
        data = Dataset([[1, 2]] * 3 + [[2, 1]] * 2 + [[1, 1]])
        mle = LcmParams([1.0], [[[4 / 6, 2 / 6], [3 / 6, 3 / 6]]])
        res = fit_em(data, mle)
        assert res.converged and res.iterations == 1
        assert res.trace[1].step == pytest.approx(0.0, abs=1e-15)

    def test_ascent_and_feasibility(self, bundle_1c_data):
        spec, data = bundle_1c_data
        for seed in range(5):
            init = random_params(spec.K, spec.scheme, np.random.default_rng(seed))
            res = fit_em(data, init)
            assert np.all(np.diff(res.trace.loglik) >= -1e-10)
            assert res.trace.feasibility.max() <= 1e-12
            assert len(res.trace) == res.iterations + 1
            assert res.loglik == pytest.approx(log_likelihood(data, res.params), rel=1e-12)

    def test_stops_at_tolerance(self, bundle_1c_data):
        spec, data = bundle_1c_data
        init = random_params(spec.K, spec.scheme, np.random.default_rng(0))
        res = fit_em(data, init, EmConfig(epsilon=1e-6))
        assert res.converged
        assert res.trace[-1].step <= 1e-6
        assert all(e.step > 1e-6 for e in res.trace.entries[1:-1])

    def test_max_iter_flagged(self, bundle_1c_data):
        spec, data = bundle_1c_data
        init = random_params(spec.K, spec.scheme, np.random.default_rng(0))
        res = fit_em(data, init, EmConfig(epsilon=1e-14, max_iter=3))
        assert not res.converged and res.iterations == 3
        assert res.message == "max_iter reached"

    def test_permutation_equivariance(self):
        spec = get_bundle("2B")
        data = sample(spec.params, 400, 1)
        init = random_params(spec.K, spec.scheme, np.random.default_rng(2))
        order = [2, 0, 1]
        a = fit_em(data, init, EmConfig(max_iter=50))
        b = fit_em(data, init.permute(order), EmConfig(max_iter=50))
        np.testing.assert_array_equal(b.params.pack(), a.params.permute(order).pack())
        np.testing.assert_array_equal(a.trace.loglik, b.trace.loglik)

    def test_keep_iterates(self, bundle_1c_data):
        spec, data = bundle_1c_data
        init = random_params(spec.K, spec.scheme, np.random.default_rng(3))
        res = fit_em(data, init, keep_iterates=True)
        assert len(res.trace.iterates) == res.iterations + 1
        np.testing.assert_array_equal(res.trace.iterates[0], init.pack())
