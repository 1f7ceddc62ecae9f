import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lcmopt.simplex import ProductSimplex, project_simplex

from oracles import projection_by_supports

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
vectors = st.integers(1, 10).flatmap(lambda n: arrays(np.float64, n, elements=finite))


class TestProjectSimplex:
    def test_known_values(self):
        np.testing.assert_allclose(project_simplex([1.2, 0.3]), [0.95, 0.05], atol=1e-15)
        np.testing.assert_allclose(project_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5], atol=1e-15)
        np.testing.assert_allclose(project_simplex([5.0, 0.0, 0.0]), [1.0, 0.0, 0.0])
        np.testing.assert_allclose(project_simplex([-1.0, -1.0]), [0.5, 0.5])

    def test_single_coordinate(self):
        assert project_simplex([-7.0]).tolist() == [1.0]

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            project_simplex([])
        with pytest.raises(ValueError):
            project_simplex([np.nan, 1.0])

    def test_matches_support_enumeration(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            x = rng.normal(scale=rng.choice([0.1, 1, 5]), size=rng.integers(2, 9))
            np.testing.assert_allclose(project_simplex(x), projection_by_supports(x), atol=1e-10)

    @given(vectors)
    def test_lands_on_simplex(self, x):
        y = project_simplex(x)
        assert y.min() >= 0
        assert abs(y.sum() - 1) <= 1e-12 * max(1, np.abs(x).max())

    @given(vectors)
    def test_idempotent(self, x):
        y = project_simplex(x)
        np.testing.assert_allclose(project_simplex(y), y, atol=1e-12)

    @given(st.integers(1, 10).flatmap(
        lambda n: st.tuples(arrays(np.float64, n, elements=finite), arrays(np.float64, n, elements=finite))))
    def test_nonexpansive(self, pair):
        x, z = pair
        assert np.linalg.norm(project_simplex(x) - project_simplex(z)) <= np.linalg.norm(x - z) + 1e-12

    @given(vectors, st.floats(-20, 20))
    def test_shift_invariant(self, x, c):
        # adding a constant to every coordinate does not move the projection
        np.testing.assert_allclose(project_simplex(x + c), project_simplex(x), atol=1e-9)

    @given(vectors, st.randoms())
    def test_permutation_equivariant(self, x, rnd):
        perm = list(range(x.size))
        rnd.shuffle(perm)
        np.testing.assert_allclose(project_simplex(x[perm]), project_simplex(x)[perm], atol=1e-12)

    def test_variational_inequality(self):
        # (x - P(x))'(z - P(x)) <= 0 for every z in the simplex
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = rng.normal(size=6) * 3
            y = project_simplex(x)
            z = rng.dirichlet(np.ones(6), size=20)
            assert np.all((z - y) @ (x - y) <= 1e-12)


class TestProductSimplex:
    def test_layout(self):
        geom = ProductSimplex([2, 3, 1])
        assert geom.dim == 6
        assert geom.block_map == [(0, 2), (2, 3), (5, 1)]
        assert geom.block_of.tolist() == [0, 0, 1, 1, 1, 2]

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            ProductSimplex([2, 0])
        with pytest.raises(ValueError):
            ProductSimplex([])

    def test_blockwise_projection(self):
        geom = ProductSimplex([3, 2, 4])
        rng = np.random.default_rng(2)
        x = rng.normal(size=geom.dim) * 2
        y = geom.project(x)
        for off, size in geom.block_map:
            np.testing.assert_allclose(y[off:off + size], project_simplex(x[off:off + size]), atol=1e-14)
        assert geom.constraint_residual(y) < 1e-14

    def test_projection_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            ProductSimplex([2, 2]).project(np.zeros(3))

    def test_constraint_residual(self):
        geom = ProductSimplex([2, 2])
        assert geom.constraint_residual(np.array([0.5, 0.5, 1.0, 0.0])) == 0.0
        assert geom.constraint_residual(np.array([0.5, 0.6, 1.2, -0.2])) == pytest.approx(0.2)

    def test_random_point_is_feasible(self):
        geom = ProductSimplex([1, 3, 5])
        x = geom.random_point(np.random.default_rng(3))
        assert geom.constraint_residual(x) < 1e-15
        assert x[0] == 1.0

    def test_uniform(self):
        np.testing.assert_allclose(ProductSimplex([2, 4]).uniform(), [0.5, 0.5] + [0.25] * 4)

    def test_tangent_basis(self):
        geom = ProductSimplex([3, 1, 2])
        Z = geom.tangent_basis()
        assert Z.shape == (6, 3)
        np.testing.assert_allclose(Z.T @ Z, np.eye(3), atol=1e-14)
        np.testing.assert_allclose(geom.block_sums(Z[:, 0]), 0, atol=1e-14)
        fixed = np.array([True, False, False, False, False, False])
        Zf = geom.tangent_basis(fixed)
        assert Zf.shape == (6, 2)
        np.testing.assert_allclose(Zf[0], 0)
        for k in range(Zf.shape[1]):
            np.testing.assert_allclose(geom.block_sums(Zf[:, k]), 0, atol=1e-14)

    @settings(max_examples=50)
    @given(st.lists(st.integers(1, 5), min_size=1, max_size=5), st.integers(0, 2**32 - 1))
    def test_projection_optimality_per_block(self, sizes, seed):
        geom = ProductSimplex(sizes)
        x = np.random.default_rng(seed).normal(size=geom.dim) * 4
        y = geom.project(x)
        for off, size in geom.block_map:
            np.testing.assert_allclose(
                y[off:off + size], projection_by_supports(x[off:off + size]), atol=1e-10
            )
