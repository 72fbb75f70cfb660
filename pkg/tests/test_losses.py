import numpy as np
import pytest
from pydantic import ValidationError

from expconcavify.errors import ComputationError, InvalidInputError
from expconcavify.losses.catalog import LOSS_CATALOG, catalog_loss, log_weight, scale_loss
from expconcavify.losses.risk import bayes_risk, conditional_risk, mixability_constant, weight_derivative
from expconcavify.losses.simplex import (
    LossVector,
    ProbVector,
    ReducedProb,
    barycentric_grid,
    binary_prob,
    exp_inverse,
    exp_transform,
    interior_binary_grid,
    lift,
    lift_rows,
    project,
)


class TestSimplex:
    def test_lift_and_project(self):
        p = lift(ReducedProb(entries=[0.2, 0.3]))
        assert p.entries == pytest.approx([0.2, 0.3, 0.5])
        assert project(p).entries == pytest.approx([0.2, 0.3])

    def test_lift_snaps_rounding_to_the_boundary(self):
        p = lift([0.1, 0.2, 0.7000000000000001])
        assert p.entries[-1] == 0.0

    @pytest.mark.parametrize("entries", [[0.5], [0.7, 0.4], [-0.1, 1.1], [0.5, 0.49]])
    def test_prob_vector_rejects_non_simplex_entries(self, entries):
        with pytest.raises(ValidationError):
            ProbVector(entries=entries)

    def test_lift_rows_rejects_overfull_rows(self):
        with pytest.raises(InvalidInputError):
            lift_rows(np.array([[0.7, 0.4]]))

    def test_barycentric_grid(self):
        grid = barycentric_grid(3, 4)
        assert grid.shape == (15, 3)
        np.testing.assert_allclose(grid.sum(axis=1), 1.0)
        assert len({tuple(row) for row in grid}) == 15

    def test_interior_binary_grid(self):
        grid = interior_binary_grid(1e-3)
        assert len(grid) == 999
        assert grid[0] == pytest.approx(1e-3)
        assert grid[-1] == pytest.approx(0.999)

    def test_exp_transform_inverse(self):
        z = exp_transform([0.5, 2.0], 2.0)
        np.testing.assert_allclose(z, np.exp([-1.0, -4.0]))
        np.testing.assert_allclose(exp_inverse(z, 2.0), [0.5, 2.0])
        assert exp_transform([np.inf], 1.0)[0] == 0.0

    @pytest.mark.parametrize("beta", [0.0, -1.0])
    def test_exp_transform_needs_positive_beta(self, beta):
        with pytest.raises(InvalidInputError):
            exp_transform([1.0], beta)


class TestCatalog:
    def test_loss_vector_allows_infinite_losses(self, log_loss):
        vector = log_loss.loss_vector([1.0, 0.0])
        assert vector.n == 2
        assert vector.entries[0] == 0.0
        assert vector.entries[1] == np.inf
        with pytest.raises(ValidationError):
            LossVector(entries=[0.1, float("nan")])
        with pytest.raises(ValidationError):
            LossVector(entries=[-0.1, 0.2])

    def test_log_partials_and_risk(self, log_loss):
        p = [0.25, 0.75]
        np.testing.assert_allclose(log_loss.partials(p), -np.log(p))
        assert log_loss.risk(p) == pytest.approx(-(0.25 * np.log(0.25) + 0.75 * np.log(0.75)))

    def test_square_vector(self, square_vector):
        np.testing.assert_allclose(square_vector.partials([0.2, 0.8]), [1.28, 0.08])
        assert square_vector.risk([0.2, 0.8]) == pytest.approx(0.32)

    def test_square_scalar(self, square_scalar):
        np.testing.assert_allclose(square_scalar.partials([0.3, 0.7]), [0.49, 0.09])
        assert square_scalar.risk([0.3, 0.7]) == pytest.approx(0.21)

    def test_boosting(self, boosting):
        np.testing.assert_allclose(boosting.partials([0.2, 0.8]), [1.0, 0.25])
        assert boosting.risk([0.2, 0.8]) == pytest.approx(0.4)

    def test_zero_one_charges_every_class_but_the_argmax(self):
        loss = catalog_loss("zero_one", 3)
        np.testing.assert_allclose(loss.partials([0.2, 0.5, 0.3]), [1.0, 0.0, 1.0])
        # ties go to the lowest index
        np.testing.assert_allclose(catalog_loss("zero_one").partials([0.5, 0.5]), [0.0, 1.0])

    def test_absolute(self):
        np.testing.assert_allclose(catalog_loss("absolute").partials([0.3, 0.7]), [1.4, 0.6])

    def test_binary_partials_match_lifted_rows(self, log_loss):
        q = np.array([0.1, 0.6])
        np.testing.assert_allclose(log_loss.binary_partials(q), log_loss.partials(binary_prob(q)))

    def test_vectorized_rows(self):
        loss = catalog_loss("square_vector", 3)
        rows = barycentric_grid(3, 5)
        assert loss.partials(rows).shape == rows.shape
        assert loss.risk(rows).shape == (len(rows),)

    @pytest.mark.parametrize("name, n", [("nope", 2), ("log", 1), ("square_scalar", 3), ("boosting", 4)])
    def test_rejects_unknown_or_unsupported(self, name, n):
        with pytest.raises(InvalidInputError):
            catalog_loss(name, n)

    def test_dimension_mismatch(self, log_loss):
        with pytest.raises(InvalidInputError):
            log_loss.partials([0.2, 0.3, 0.5])

    def test_require_weight(self):
        with pytest.raises(InvalidInputError):
            catalog_loss("zero_one").require_weight()
        with pytest.raises(InvalidInputError):
            catalog_loss("log", 3).require_weight()


class TestRisk:
    @pytest.mark.parametrize("name", sorted(LOSS_CATALOG))
    def test_bayes_risk_is_conditional_risk_at_the_truth(self, name):
        loss = catalog_loss(name)
        if not loss.is_proper:
            pytest.skip("absolute loss is not proper")
        p = np.array([0.3, 0.7])
        assert conditional_risk(loss, p, p) == pytest.approx(bayes_risk(loss, p))

    @pytest.mark.parametrize("name", ["log", "square_vector", "square_scalar", "boosting"])
    def test_strict_properness(self, name):
        loss = catalog_loss(name)
        p = np.array([0.3, 0.7])
        others = binary_prob(np.array([0.05, 0.2, 0.29, 0.31, 0.5, 0.9]))
        assert np.all(conditional_risk(loss, p, others) > bayes_risk(loss, p))

    @pytest.mark.parametrize("name", ["log", "square_vector", "square_scalar", "boosting", "zero_one"])
    def test_properness_on_the_binary_grid(self, name):
        loss = catalog_loss(name)
        grid = binary_prob(np.linspace(0.0, 1.0, 101))
        risks = conditional_risk(loss, grid[:, None, :], grid[None, :, :])
        assert risks.shape == (101, 101)
        assert np.all(risks >= np.diag(risks)[:, None] - 1e-12)

    @pytest.mark.parametrize("name", ["log", "square_vector", "zero_one"])
    def test_properness_on_the_three_class_grid(self, name):
        loss = catalog_loss(name, 3)
        grid = barycentric_grid(3, 4)
        risks = conditional_risk(loss, grid[:, None, :], grid[None, :, :])
        assert risks.shape == (15, 15)
        assert np.all(risks >= np.diag(risks)[:, None] - 1e-12)

    def test_absolute_loss_is_not_proper(self):
        loss = catalog_loss("absolute")
        p = np.array([0.3, 0.7])
        # the vertex beats the truth
        assert conditional_risk(loss, p, [0.0, 1.0]) < conditional_risk(loss, p, p)

    @pytest.mark.parametrize("name", sorted(LOSS_CATALOG))
    def test_bayes_risk_is_concave(self, name):
        loss = catalog_loss(name, 3) if name not in ("square_scalar", "boosting") else catalog_loss(name)
        grid = barycentric_grid(loss.n, 8)
        first, second = np.triu_indices(len(grid), k=1)
        middle = bayes_risk(loss, 0.5 * (grid[first] + grid[second]))
        chord = 0.5 * (bayes_risk(loss, grid[first]) + bayes_risk(loss, grid[second]))
        assert np.all(middle >= chord - 1e-12)

    @pytest.mark.parametrize("name", ["log", "square_vector", "square_scalar"])
    def test_halving_a_loss_doubles_the_grid_estimate(self, name):
        loss = catalog_loss(name)
        halved = scale_loss(loss, 0.5)
        assert mixability_constant(halved, use_override=False) == pytest.approx(
            2.0 * mixability_constant(loss, use_override=False), rel=1e-9
        )
        assert mixability_constant(halved, use_override=False) == pytest.approx(2.0 * loss.known_mixability, abs=2e-3)

    def test_conditional_risk_ignores_impossible_classes(self, log_loss):
        assert conditional_risk(log_loss, [1.0, 0.0], [1.0, 0.0]) == 0.0

    @pytest.mark.parametrize("name", ["log", "square_vector", "square_scalar", "boosting"])
    def test_weight_is_negated_curvature_of_the_bayes_risk(self, name):
        loss = catalog_loss(name)
        q, h = 0.3, 1e-4
        curvature = (loss.risk([q + h, 1 - q - h]) - 2 * loss.risk([q, 1 - q]) + loss.risk([q - h, 1 - q + h])) / h ** 2
        assert float(loss.weight(np.asarray(q))) == pytest.approx(-curvature, rel=1e-5)

    def test_weight_derivative_closed_form_matches_differences(self, boosting):
        numeric = boosting.model_copy(update={"weight_derivative": None})
        assert float(weight_derivative(numeric, 0.3)) == pytest.approx(float(weight_derivative(boosting, 0.3)), rel=1e-6)

    @pytest.mark.parametrize("name, expected", [("log", 1.0), ("square_vector", 1.0), ("square_scalar", 2.0)])
    def test_known_mixability(self, name, expected):
        assert mixability_constant(catalog_loss(name)) == expected

    def test_known_constants_agree_with_the_grid(self):
        for name in ("log", "square_vector", "square_scalar"):
            loss = catalog_loss(name)
            assert mixability_constant(loss, use_override=False) == pytest.approx(loss.known_mixability, abs=1e-3)

    def test_boosting_mixability_is_the_grid_infimum(self, boosting):
        # 4 sqrt(q (1 - q)) has no positive infimum; the grid edge sets the estimate
        assert mixability_constant(boosting) == pytest.approx(4.0 * np.sqrt(0.001 * 0.999))

    def test_mixability_needs_a_weight(self):
        with pytest.raises(InvalidInputError):
            mixability_constant(catalog_loss("absolute"))

    def test_non_positive_weight_is_a_computation_error(self, log_loss):
        broken = log_loss.model_copy(update={"weight": lambda q: np.zeros_like(np.asarray(q, dtype=float)), "known_mixability": None})
        with pytest.raises(ComputationError):
            mixability_constant(broken)

    def test_scale_loss(self, log_loss):
        doubled = scale_loss(log_loss, 2.0)
        np.testing.assert_allclose(doubled.partials([0.4, 0.6]), 2.0 * log_loss.partials([0.4, 0.6]))
        assert float(doubled.weight(np.asarray(0.5))) == pytest.approx(8.0)
        assert mixability_constant(doubled) == pytest.approx(0.5)
        with pytest.raises(InvalidInputError):
            scale_loss(log_loss, 0.0)

    def test_log_weight(self):
        assert log_weight(0.5) == pytest.approx(4.0)
