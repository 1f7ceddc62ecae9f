import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcmopt.model import CategoryScheme, LcmParams, component_density
from lcmopt.simulate import bundle_registry, derive_seed, get_bundle, random_params, sample


class TestRegistry:
    def test_sixteen_bundles_with_sizes(self):
        reg = bundle_registry()
        assert len(reg) == 16
        sizes = {"1": 500, "2": 1000, "3": 2000, "4": 5000}
        for bid, spec in reg.items():
            assert spec.id == bid
            assert spec.n == sizes[bid[0]]

    def test_rows_sum_to_one_exactly(self):
        # decimal values from the tables, so sum their shortest reprs exactly
        for spec in bundle_registry().values():
            p = spec.params
            assert sum(Fraction(repr(float(v))) for v in p.eta) == 1
            for pk in p.pi:
                for row in pk:
                    assert sum(Fraction(repr(float(v))) for v in row) == 1

    def test_table_examples(self):
        reg = bundle_registry()
        np.testing.assert_array_equal(reg["1A"].params.eta, [0.5, 0.5])
        # third class, second variable
        np.testing.assert_array_equal(reg["2B"].params.pi[2][1], [0.5, 0.3, 0.2])
        np.testing.assert_array_equal(reg["4D"].params.eta, [0.3, 0.2, 0.3, 0.1, 0.1])

    def test_shapes(self):
        reg = bundle_registry()
        assert (reg["1D"].K, reg["1D"].scheme.c) == (2, (2, 2, 2, 2))
        assert (reg["2D"].K, reg["2D"].scheme.c) == (3, (2, 3, 2))
        assert (reg["3D"].K, reg["3D"].scheme.c) == (3, (2, 2, 2, 2, 2))
        assert (reg["4B"].K, reg["4B"].scheme.c) == (5, (2, 2, 2, 2))

    def test_lookup(self):
        assert get_bundle("3c").id == "3C"
        with pytest.raises(KeyError, match="unknown bundle"):
            get_bundle("5A")

    def test_to_dict(self):
        d = get_bundle("1C").to_dict()
        assert d["id"] == "1C" and d["N"] == 500 and d["c"] == [2, 2]


class TestSample:
    def test_deterministic(self):
        p = get_bundle("2D").params
        a, b = sample(p, 300, 11), sample(p, 300, 11)
        np.testing.assert_array_equal(a.rows, b.rows)
        assert not np.array_equal(a.rows, sample(p, 300, 12).rows)

    def test_prefix_stable(self):
        # row i only depends on the i-th block of uniforms
        p = get_bundle("1D").params
        np.testing.assert_array_equal(sample(p, 50, 3).rows, sample(p, 80, 3).rows[:50])

    def test_single_row(self):
        data = sample(get_bundle("3D").params, 1, 0)
        assert data.rows.shape == (1, 5)
        with pytest.raises(ValueError):
            sample(get_bundle("3D").params, 0, 0)

    def test_bundle_1a_marginal(self):
        data = sample(get_bundle("1A").params, 500, 7)
        assert abs(np.mean(data.rows[:, 0] == 1) - 0.6) <= 0.066

    def test_degenerate_mixture(self):
        p = LcmParams([1.0, 0.0], [[[0.2, 0.8], [0.1, 0.6, 0.3]], [[0.9, 0.1], [1 / 3] * 3]])
        n = 20000
        data, labels = sample(p, n, 5, return_labels=True)
        assert np.all(labels == 0)
        for j, probs in enumerate(p.pi[0]):
            freq = np.bincount(data.rows[:, j] - 1, minlength=len(probs)) / n
            assert np.abs(freq - probs).max() <= 3 / np.sqrt(n)

    def test_labels_follow_weights(self):
        p = get_bundle("2B").params
        _, labels = sample(p, 5000, 1, return_labels=True)
        freq = np.bincount(labels, minlength=3) / 5000
        assert np.abs(freq - p.eta).max() <= 4 / np.sqrt(5000)

    def test_joint_cells_law_of_large_numbers(self):
        p = get_bundle("2C").params
        n = 100_000
        data = sample(p, n, 2)
        rows, freq = np.unique(data.rows, axis=0, return_counts=True)
        observed = dict(zip(map(tuple, rows.tolist()), freq / n))
        for cell in itertools.product(*[range(1, c + 1) for c in p.scheme.c]):
            expected = sum(p.eta[k] * component_density(cell, k, p) for k in range(p.K))
            assert abs(observed.get(cell, 0.0) - expected) <= 4 / np.sqrt(n)

    @given(st.integers(0, 2**32 - 1))
    def test_rows_within_scheme(self, seed):
        scheme = CategoryScheme((2, 4, 3))
        p = random_params(3, scheme, np.random.default_rng(seed))
        rows = sample(p, 40, seed).rows
        assert rows.min() >= 1
        assert np.all(rows.max(axis=0) <= np.array(scheme.c))


class TestSeeds:
    def test_derive_seed_is_stable_and_distinct(self):
        assert derive_seed(7, 1) == derive_seed(7, 1)
        seeds = {derive_seed(7, i) for i in range(100)} | {derive_seed(8, i) for i in range(100)}
        assert len(seeds) == 200
        assert all(0 <= s < 2**63 for s in seeds)

    def test_random_params_feasible(self):
        scheme = CategoryScheme((3, 2))
        p = random_params(4, scheme, np.random.default_rng(0))
        p.check_feasible(1e-12)
        assert p.K == 4
