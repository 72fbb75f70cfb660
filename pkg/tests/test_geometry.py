import numpy as np
import pytest

from expconcavify.errors import InvalidInputError, SolverError
from expconcavify.geometry.cloud import build_cloud, check_prop1_condition, gamma_p, ray_escape_witness
from expconcavify.geometry.surrogate import build_surrogate, in_S_epsilon, surrogate_loss
from expconcavify.losses.catalog import catalog_loss
from expconcavify.losses.simplex import barycentric_grid


class TestCloud:
    def test_three_class_cloud(self):
        cloud = build_cloud(catalog_loss("square_vector", 3), 1.0, 10)
        assert cloud.points.shape == (66, 3)
        assert cloud.n == 3
        assert np.all((cloud.points > 0.0) & (cloud.points <= 1.0))
        frame = cloud.to_frame()
        assert list(frame.columns) == ["p_1", "p_2", "p_3", "z_1", "z_2", "z_3"]

    def test_infinite_losses_map_to_zero(self, log_loss):
        cloud = build_cloud(log_loss, 1.0, 10)
        np.testing.assert_allclose(cloud.points, cloud.probabilities)

    def test_resolution_floor(self, log_loss):
        with pytest.raises(InvalidInputError):
            build_cloud(log_loss, 1.0, 9)

    def test_gamma_p(self, log_loss):
        cloud = build_cloud(log_loss, 1.0, 10)
        assert gamma_p(cloud, [0.7, 0.3]) == pytest.approx(-0.7)
        with pytest.raises(InvalidInputError):
            gamma_p(cloud, [0.2, 0.3, 0.5])


class TestRayConditions:
    @pytest.mark.parametrize("name, beta", [("log", 1.0), ("square_vector", 1.0), ("square_scalar", 2.0)])
    def test_binary_mixable_clouds_hold(self, name, beta):
        holds, witness = check_prop1_condition(build_cloud(catalog_loss(name), beta, 20))
        assert holds
        assert witness is None

    def test_three_class_log_cloud_holds(self):
        holds, _ = check_prop1_condition(build_cloud(catalog_loss("log", 3), 1.0, 10))
        assert holds

    def test_three_class_square_cloud_fails(self):
        holds, witness = check_prop1_condition(build_cloud(catalog_loss("square_vector", 3), 1.0, 10))
        assert not holds
        assert witness.escape

    def test_escape_witness_for_three_class_square(self):
        cloud = build_cloud(catalog_loss("square_vector", 3), 1.0, 10)
        witness = ray_escape_witness(cloud, n_pairs=500)
        assert witness is not None
        np.testing.assert_allclose(witness.c, 0.5 * (np.asarray(witness.a) + np.asarray(witness.b)))
        assert set(witness.to_row()) == {"a", "b", "c", "escape"}

    def test_witness_search_is_seeded(self):
        cloud = build_cloud(catalog_loss("square_vector", 3), 1.0, 10)
        assert ray_escape_witness(cloud, n_pairs=500, seed=4) == ray_escape_witness(cloud, n_pairs=500, seed=4)


class TestSurrogate:
    def test_log_surrogate_is_the_loss(self, log_loss):
        model = build_surrogate(log_loss, 1.0, 0.1, 20)
        assert model.effective_epsilon == pytest.approx(0.15)
        np.testing.assert_allclose(surrogate_loss(model, [0.3, 0.7]), -np.log([0.3, 0.7]), rtol=1e-5)

    def test_square_surrogate_agrees_inside_s_epsilon(self, square_vector):
        model = build_surrogate(square_vector, 1.0, 0.1, 20)
        p = np.array([0.5, 0.5])
        assert in_S_epsilon(square_vector, 1.0, model.effective_epsilon, p)
        np.testing.assert_allclose(surrogate_loss(model, p), square_vector.partials(p), rtol=1e-4)

    def test_three_class_log_surrogate(self):
        loss = catalog_loss("log", 3)
        model = build_surrogate(loss, 1.0, 0.1, 12)
        p = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(surrogate_loss(model, p), loss.partials(p), rtol=1e-4)

    def test_in_s_epsilon(self, square_vector):
        assert in_S_epsilon(square_vector, 1.0, 0.1, [0.5, 0.5])
        assert not in_S_epsilon(square_vector, 1.0, 0.2, [0.02, 0.98])
        with pytest.raises(InvalidInputError):
            in_S_epsilon(square_vector, 1.0, 0.1, [0.0, 1.0])

    @pytest.mark.parametrize("beta, epsilon", [(1.5, 0.1), (1.0, 0.5), (1.0, 0.0), (0.0, 0.1)])
    def test_rejects_bad_parameters(self, log_loss, beta, epsilon):
        with pytest.raises(InvalidInputError):
            build_surrogate(log_loss, beta, epsilon, 20)

    def test_surrogate_needs_interior_p(self, log_loss):
        model = build_surrogate(log_loss, 1.0, 0.1, 20)
        with pytest.raises(InvalidInputError):
            surrogate_loss(model, [0.0, 1.0])

    def test_binary_hyperplane_count(self, square_vector):
        model = build_surrogate(square_vector, 1.0, 0.4, 100)
        assert len(model.directions) == 19
        assert model.gammas.shape == (19,)

    def test_exhausted_rounds_raise(self):
        loss = catalog_loss("square_vector", 3)
        model = build_surrogate(loss, 1.0, 0.1, 10).model_copy(update={"max_iterations": 1, "duality_gap": 0.0})
        with pytest.raises(SolverError):
            surrogate_loss(model, [0.45, 0.35, 0.2])


@pytest.fixture(scope="module")
def square_surrogate():
    return build_surrogate(catalog_loss("square_vector", 3), 1.0, 0.05, 60)


class TestThreeClassSquareSurrogate:
    def interior(self, m):
        grid = barycentric_grid(3, m)
        return grid[grid.min(axis=1) > 0.0]

    def test_agrees_with_the_loss_on_s_epsilon(self, square_surrogate):
        loss = square_surrogate.loss
        inside = [p for p in self.interior(20) if in_S_epsilon(loss, 1.0, 0.05, p)]
        assert len(inside) > 0
        for p in inside:
            np.testing.assert_allclose(surrogate_loss(square_surrogate, p), loss.partials(p), atol=1e-3)

    def test_surrogate_is_proper(self, square_surrogate):
        grid = self.interior(10)
        losses = np.array([surrogate_loss(square_surrogate, q) for q in grid])
        risks = grid @ losses.T
        # row i: p_i against every prediction q_j
        assert np.all(risks >= np.diag(risks)[:, None] - 1e-6)

    def test_excluded_share_shrinks_with_epsilon(self):
        loss = catalog_loss("square_vector", 3)
        grid = self.interior(30)
        excluded = [np.mean([not in_S_epsilon(loss, 1.0, eps, p) for p in grid]) for eps in (0.2, 0.1, 0.05, 0.02)]
        assert all(a >= b for a, b in zip(excluded, excluded[1:]))
        assert excluded[0] > excluded[-1]
