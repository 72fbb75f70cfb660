import math

import numpy as np
import pytest
from pydantic import ValidationError

from expconcavify.engine.game import (
    TRACE_COLUMNS,
    ExpertPool,
    GameConfig,
    as_composite,
    constant_pool,
    run_game,
)
from expconcavify.engine.substitution import (
    BEST_LOOKAHEAD,
    INVERSE_LOSS,
    SUBSTITUTIONS,
    WEIGHTED_AVERAGE,
    WORST_LOOKAHEAD,
    interval_endpoints,
    inverse_loss_prediction,
    is_permitted,
    substitute,
)
from expconcavify.engine.weights import WeightState, generalized_prediction, regret_bound, update_weights
from expconcavify.errors import ConfigurationError, GameError, InvalidInputError, SubstitutionError, WeightCollapseError
from expconcavify.losses.catalog import catalog_loss
from expconcavify.providers.experts import ExpertSettingSpec, build_experts
from expconcavify.providers.outcomes import bernoulli_outcomes

BOUND_SLACK = 1e-9


class TestWeights:
    def test_update(self):
        state = update_weights(WeightState.uniform(2), [0.0, math.log(2.0)], 1.0)
        np.testing.assert_allclose(state.as_array(), [2 / 3, 1 / 3])

    def test_infinite_loss_zeroes_an_expert(self):
        state = update_weights(WeightState.uniform(3), [np.inf, 1.0, 1.0], 0.5)
        np.testing.assert_allclose(state.as_array(), [0.0, 0.5, 0.5])

    def test_collapse(self):
        with pytest.raises(WeightCollapseError):
            update_weights(WeightState.uniform(2), [np.inf, np.inf], 1.0)

    def test_state_must_be_a_distribution(self):
        with pytest.raises(ValidationError):
            WeightState(weights=[0.6, 0.6])
        with pytest.raises(InvalidInputError):
            WeightState.uniform(0)

    def test_generalized_prediction(self):
        state = WeightState.uniform(2)
        g = generalized_prediction(state, [[0.0, 1.0], [1.0, 0.0]], 1.0)
        np.testing.assert_allclose(g, -np.log(0.5 * (1.0 + np.exp(-1.0))) * np.ones(2))
        np.testing.assert_allclose(generalized_prediction(state, [[1.0, 2.0], [1.0, 2.0]], 0.5), [1.0, 2.0])

    def test_generalized_prediction_with_infinite_losses(self):
        g = generalized_prediction(WeightState.uniform(2), [[0.0, np.inf], [np.inf, 0.0]], 1.0)
        np.testing.assert_allclose(g, [math.log(2.0), math.log(2.0)])

    def test_regret_bound(self):
        assert regret_bound(2, 0.5) == pytest.approx(2.0 * math.log(2.0))
        assert regret_bound(1, 0.5) == 0.0
        with pytest.raises(InvalidInputError):
            regret_bound(2, 0.0)


@pytest.fixture
def square_config():
    def make(substitution=INVERSE_LOSS, eta=0.5, algorithm="AA"):
        return GameConfig.create(catalog_loss("square_scalar"), algorithm=algorithm, substitution=substitution, eta=eta)
    return make


class TestSubstitution:
    def test_square_interval(self, square_config):
        composite = square_config().composite
        assert interval_endpoints(composite, [0.36, 0.36]) == pytest.approx((0.6, 0.4))
        assert inverse_loss_prediction(composite, [0.36, 0.36]) == pytest.approx(0.5)

    @pytest.mark.parametrize("outcome, kind, expected", [
        (1, WORST_LOOKAHEAD, 0.6),
        (1, BEST_LOOKAHEAD, 0.4),
        (2, WORST_LOOKAHEAD, 0.4),
        (2, BEST_LOOKAHEAD, 0.6),
    ])
    def test_lookahead(self, square_config, outcome, kind, expected):
        v = substitute(square_config(kind), [0.36, 0.36], outcome=outcome)
        assert v == pytest.approx(expected)

    def test_worst_lookahead_pays_the_generalized_loss(self, square_config):
        config = square_config(WORST_LOOKAHEAD)
        v = substitute(config, [0.36, 0.25], outcome=1)
        assert config.composite.partial(1, v) == pytest.approx(0.36)

    def test_non_super_predictions(self, square_config):
        assert substitute(square_config(WORST_LOOKAHEAD), [0.25, 0.09], outcome=1, validate=False) == pytest.approx(0.5)
        assert substitute(square_config(BEST_LOOKAHEAD), [0.25, 0.09], outcome=1, validate=False) == pytest.approx(0.7)
        assert substitute(square_config(INVERSE_LOSS), [0.04, 0.36], validate=False) == pytest.approx(0.25)
        with pytest.raises(SubstitutionError):
            substitute(square_config(INVERSE_LOSS), [0.04, 0.36])
        with pytest.raises(SubstitutionError):
            substitute(square_config(BEST_LOOKAHEAD), [0.25, 0.09], outcome=2)

    def test_root_finding_path(self):
        config = GameConfig.create(catalog_loss("log"), substitution=INVERSE_LOSS, eta=1.0)
        g = -np.log([0.4, 0.4])
        v1, v2 = interval_endpoints(config.composite, g)
        assert v1 == pytest.approx(0.6, abs=1e-9)
        assert v2 == pytest.approx(0.4, abs=1e-9)
        assert substitute(config, g) == pytest.approx(0.5, abs=1e-9)

    def test_lookahead_needs_the_outcome(self, square_config):
        with pytest.raises(InvalidInputError):
            substitute(square_config(BEST_LOOKAHEAD), [0.36, 0.36])

    def test_weighted_average(self, square_config):
        config = square_config(WEIGHTED_AVERAGE)
        state = WeightState(weights=[0.25, 0.75])
        v = substitute(config, [0.6, 0.6], state=state, expert_predictions=[0.0, 1.0])
        assert v == pytest.approx(0.75)
        with pytest.raises(InvalidInputError):
            substitute(config, [0.5, 0.5])

    def test_inverse_loss_needs_a_nonzero_prediction(self, square_config):
        with pytest.raises(SubstitutionError):
            inverse_loss_prediction(square_config().composite, [0.0, 0.0])

    def test_accepts_a_loss_vector(self, square_config):
        g = catalog_loss("square_scalar").loss_vector([0.5, 0.5])
        assert substitute(square_config(), g) == pytest.approx(0.5)

    def test_is_permitted(self, square_config):
        composite = square_config().composite
        assert is_permitted(composite, [0.36, 0.36], 0.5)
        assert not is_permitted(composite, [0.36, 0.36], 0.7)


class TestGameConfig:
    def test_plain_losses_predict_class_two(self):
        assert as_composite(catalog_loss("log")).link.name == "complement"
        assert as_composite(catalog_loss("log", 3)).link.name == "identity"

    @pytest.mark.parametrize("name, eta", [("log", 1.5), ("square_scalar", 2.5)])
    def test_eta_above_mixability(self, name, eta):
        with pytest.raises(ConfigurationError):
            GameConfig.create(catalog_loss(name), eta=eta)

    def test_only_unit_c_beta(self):
        with pytest.raises(ConfigurationError):
            GameConfig.create(catalog_loss("log"), eta=0.5, c_beta=2.0)

    def test_eta_must_be_positive(self):
        with pytest.raises(ValidationError):
            GameConfig.create(catalog_loss("log"), eta=0.0)

    def test_weighted_averaging_needs_exp_concavity(self):
        loss = catalog_loss("square_scalar")
        GameConfig.create(loss, algorithm="WAA", eta=0.5)
        with pytest.raises(ConfigurationError):
            GameConfig.create(loss, algorithm="WAA", eta=1.0)
        config = GameConfig.create(loss, algorithm="WAA", eta=1.0, allow_non_exp_concave=True)
        assert config.averages


class TestRunGame:
    @pytest.mark.parametrize("substitution", SUBSTITUTIONS)
    @pytest.mark.parametrize("setting", [1, 2, 3])
    @pytest.mark.parametrize("eta", [0.1, 0.5])
    def test_regret_stays_within_the_bound(self, substitution, setting, eta):
        config = GameConfig.create(catalog_loss("square_scalar"), substitution=substitution, eta=eta)
        for seed in range(10):
            outcomes = bernoulli_outcomes(0.5 + 0.05 * seed, 100, seed)
            trace = run_game(config, build_experts(ExpertSettingSpec.numbered(setting), outcomes), outcomes)
            regrets = np.array([record.regret for record in trace.records])
            assert np.all(regrets <= trace.bound + BOUND_SLACK)

    def test_waa_regret(self):
        config = GameConfig.create(catalog_loss("square_scalar"), algorithm="WAA", eta=0.5)
        outcomes = bernoulli_outcomes(0.7, 100, 3)
        trace = run_game(config, constant_pool(np.linspace(0.0, 1.0, 11)), outcomes)
        assert trace.final_regret <= trace.bound + BOUND_SLACK
        assert trace.substitution is None

    def test_three_class_waa(self):
        config = GameConfig.create(catalog_loss("square_vector", 3), algorithm="WAA", eta=0.2)
        pool = constant_pool([[0.8, 0.1], [0.1, 0.8], [0.1, 0.1]])
        outcomes = [1, 2, 3, 1, 1, 2, 3, 3, 3, 1] * 5
        trace = run_game(config, pool, outcomes)
        assert len(trace.records[0].prediction) == 2
        assert trace.final_regret <= trace.bound + BOUND_SLACK

    def test_oracle_expert_pays_nothing(self):
        config = GameConfig.create(catalog_loss("square_scalar"), eta=0.5)
        outcomes = bernoulli_outcomes(0.7, 50, 1)
        trace = run_game(config, build_experts(ExpertSettingSpec.numbered(2), outcomes), outcomes)
        assert trace.records[-1].best_expert_cum == 0.0
        assert trace.records[-1].expert_cum[2] == 0.0

    def test_trace_frame(self, tmp_path):
        config = GameConfig.create(catalog_loss("square_scalar"), eta=0.5)
        outcomes = bernoulli_outcomes(0.5, 20, 0)
        trace = run_game(config, constant_pool([0.0, 1.0]), outcomes)
        frame = trace.to_frame()
        assert list(frame.columns) == TRACE_COLUMNS
        assert len(frame) == 20
        assert frame["t"].tolist() == list(range(1, 21))
        np.testing.assert_allclose(frame["cum_loss"], np.cumsum(frame["loss"]))
        np.testing.assert_allclose(frame["bound"], math.log(2.0) / 0.5)
        assert (tmp_path / "trace.csv").exists() is False
        trace.to_csv(tmp_path / "trace.csv")
        assert (tmp_path / "trace.csv").exists()

    def test_runs_are_deterministic(self):
        config = GameConfig.create(catalog_loss("square_scalar"), substitution=BEST_LOOKAHEAD, eta=0.3)
        outcomes = bernoulli_outcomes(0.9, 60, 7)
        pool = build_experts(ExpertSettingSpec.numbered(3), outcomes)
        assert run_game(config, pool, outcomes) == run_game(config, pool, outcomes)

    def test_failures_carry_the_round(self):
        config = GameConfig.create(catalog_loss("square_scalar"), eta=0.5)
        pool = ExpertPool(2, lambda t, history: [0.5, 0.5] if t < 3 else [0.5], name="flaky")
        with pytest.raises(GameError) as exc:
            run_game(config, pool, [1, 2, 1, 2])
        assert exc.value.round == 3

    def test_outcomes_must_be_classes(self):
        config = GameConfig.create(catalog_loss("square_scalar"), eta=0.5)
        with pytest.raises(GameError):
            run_game(config, constant_pool([0.0, 1.0]), [1, 0])

    def test_experts_see_the_history(self):
        seen = []

        def predict(t, history):
            seen.append(list(history))
            return [0.5]

        config = GameConfig.create(catalog_loss("square_scalar"), eta=0.5)
        run_game(config, ExpertPool(1, predict), [2, 1, 2])
        assert seen == [[], [2], [2, 1]]
