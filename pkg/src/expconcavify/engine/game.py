"""The game of prediction with expert advice under the Aggregating and Weighted Average algorithms."""
from functools import lru_cache
from typing import Any, List, Literal, NamedTuple, Optional, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from expconcavify.analysis.numeric import numeric_exp_concavity
from expconcavify.engine.substitution import INVERSE_LOSS, WEIGHTED_AVERAGE, substitute
from expconcavify.engine.weights import WeightState, generalized_prediction, regret_bound, update_weights
from expconcavify.errors import ConfigurationError, ExpConcavifyError, GameError, InvalidInputError
from expconcavify.links.composite import CompositeLoss
from expconcavify.links.link_functions import complement_link, identity_link
from expconcavify.losses.catalog import ProperLossSpec
from expconcavify.losses.risk import mixability_constant

MIXABILITY_SLACK = 1e-9
TRACE_COLUMNS = ["t", "outcome", "prediction", "loss", "cum_loss", "best_expert_cum", "regret", "bound"]


def as_composite(loss):
    """Binary plain losses predict the probability of class 2, through the complement link."""
    if isinstance(loss, CompositeLoss):
        return loss
    if not isinstance(loss, ProperLossSpec):
        raise InvalidInputError(f"expected a ProperLossSpec or CompositeLoss, got {type(loss).__name__}")
    if loss.n == 2:
        return CompositeLoss(base=loss, link=complement_link())
    return CompositeLoss(base=loss, link=identity_link())


def loss_mixability(loss):
    if loss.n == 2 and loss.weight is not None and loss.is_strictly_proper:
        return mixability_constant(loss)
    if loss.known_mixability is not None:
        return loss.known_mixability
    raise ConfigurationError(f"no mixability constant is available for {loss.name} with n={loss.n}")


@lru_cache(maxsize=256)
def _exp_concave(composite, eta):
    return numeric_exp_concavity(composite, eta).verdict


class GameConfig(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    composite: CompositeLoss
    algorithm: Literal["AA", "WAA"] = "AA"
    substitution: Literal["best_lookahead", "worst_lookahead", "inverse_loss", "weighted_average"] = INVERSE_LOSS
    eta: float = Field(gt=0.0)
    c_beta: float = 1.0
    seed: int = 0
    allow_non_exp_concave: bool = False

    @classmethod
    def create(cls, loss, algorithm="AA", substitution=INVERSE_LOSS, eta=1.0, c_beta=1.0, seed=0,
               allow_non_exp_concave=False):
        """Build a config and check that the regret guarantees apply to it."""
        config = cls(
            composite=as_composite(loss), algorithm=algorithm, substitution=substitution, eta=eta,
            c_beta=c_beta, seed=seed, allow_non_exp_concave=allow_non_exp_concave,
        )
        config.check_regime()
        return config

    @property
    def averages(self):
        return self.algorithm == "WAA" or self.substitution == WEIGHTED_AVERAGE

    def check_regime(self):
        if self.c_beta != 1.0:
            raise ConfigurationError(f"only c(beta) = 1 is supported, got {self.c_beta}")
        base = self.composite.base
        if self.algorithm == "AA":
            limit = loss_mixability(base)
            if self.eta > limit + MIXABILITY_SLACK:
                raise ConfigurationError(
                    f"eta={self.eta:g} exceeds the mixability constant {limit:.6g} of {base.name}"
                )
        if self.averages and not self.allow_non_exp_concave and not _exp_concave(self.composite, self.eta):
            raise ConfigurationError(
                f"{self.composite.name} is not {self.eta:g}-exp-concave; weighted averaging needs "
                f"allow_non_exp_concave to run anyway"
            )
        return self


class ExpertPool:
    """N experts; predict(t, history) returns their predictions for round t."""

    def __init__(self, count, predict, name="pool"):
        if count < 1:
            raise InvalidInputError(f"expert pool needs at least one expert, got {count}")
        self.count = count
        self.predict = predict
        self.name = name

    @property
    def N(self):
        return self.count

    def predictions(self, t, history):
        values = np.asarray(self.predict(t, history), dtype=float)
        if values.shape[0] != self.count:
            raise InvalidInputError(f"{self.name} returned {values.shape[0]} predictions for {self.count} experts")
        if np.any(~np.isfinite(values)):
            raise InvalidInputError(f"{self.name} returned a non-finite prediction at round {t}")
        return values

    def __repr__(self):
        return f"ExpertPool(name={self.name!r}, N={self.count})"


def constant_pool(values, name="constant"):
    values = np.asarray(values, dtype=float)
    return ExpertPool(len(values), lambda t, history: values, name=name)


class StepResult(NamedTuple):
    prediction: Any
    learner_loss: float
    expert_losses: np.ndarray
    state: WeightState


class RoundRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: int
    outcome: int
    prediction: Union[float, List[float]]
    loss: float
    cum_loss: float
    best_expert_cum: float
    regret: float
    bound: float
    expert_cum: List[float]


class RegretTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    records: List[RoundRecord] = []
    expert_count: int
    eta: float
    algorithm: str
    substitution: Optional[str] = None

    @property
    def bound(self):
        return regret_bound(self.expert_count, self.eta)

    @property
    def final_regret(self):
        return self.records[-1].regret if self.records else 0.0

    @property
    def cumulative_loss(self):
        return self.records[-1].cum_loss if self.records else 0.0

    def to_frame(self):
        rows = []
        for record in self.records:
            row = record.model_dump(include=set(TRACE_COLUMNS))
            if isinstance(row["prediction"], list):
                row["prediction"] = " ".join(f"{x:.12g}" for x in row["prediction"])
            rows.append(row)
        return pd.DataFrame(rows, columns=TRACE_COLUMNS)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)
        return path


def _check_outcome(outcome, n):
    if not 1 <= int(outcome) <= n:
        raise InvalidInputError(f"outcome must be a class in 1..{n}, got {outcome}")
    return int(outcome)


def aa_step(config, state, expert_predictions, outcome):
    composite = config.composite
    outcome = _check_outcome(outcome, composite.n)
    loss_vectors = composite.partials(np.asarray(expert_predictions, dtype=float))
    g = generalized_prediction(state, loss_vectors, config.eta)
    prediction = substitute(config, g, outcome=outcome, state=state, expert_predictions=expert_predictions)
    learner_loss = float(composite.partial(outcome, prediction))
    expert_losses = loss_vectors[:, outcome - 1]
    logger.debug(f"AA g={np.round(g, 6).tolist()} v={prediction} loss={learner_loss:.6g}")
    return StepResult(prediction, learner_loss, expert_losses, update_weights(state, expert_losses, config.eta))


def waa_step(config, state, expert_predictions, outcome):
    composite = config.composite
    outcome = _check_outcome(outcome, composite.n)
    predictions = np.asarray(expert_predictions, dtype=float)
    prediction = np.tensordot(state.as_array(), predictions, axes=1)
    prediction = float(prediction) if np.ndim(prediction) == 0 else prediction
    learner_loss = float(composite.partial(outcome, prediction))
    expert_losses = composite.partials(predictions)[:, outcome - 1]
    return StepResult(prediction, learner_loss, expert_losses, update_weights(state, expert_losses, config.eta))


STEPS = {"AA": aa_step, "WAA": waa_step}


def run_game(config, pool, outcomes):
    """Play every round; failures surface as GameError carrying the round index."""
    step = STEPS[config.algorithm]
    state = WeightState.uniform(pool.N)
    bound = regret_bound(pool.N, config.eta)
    expert_cum = np.zeros(pool.N)
    cum_loss = 0.0
    history = []
    records = []
    for t, outcome in enumerate(outcomes, start=1):
        try:
            result = step(config, state, pool.predictions(t, list(history)), outcome)
        except GameError:
            raise
        except (ExpConcavifyError, ArithmeticError, ValueError) as e:
            raise GameError(str(e), t) from e
        state = result.state
        cum_loss += result.learner_loss
        expert_cum = expert_cum + result.expert_losses
        best = float(expert_cum.min())
        prediction = result.prediction if np.ndim(result.prediction) == 0 else list(np.asarray(result.prediction))
        records.append(RoundRecord(
            t=t, outcome=int(outcome), prediction=prediction, loss=result.learner_loss,
            cum_loss=cum_loss, best_expert_cum=best, regret=cum_loss - best, bound=bound,
            expert_cum=expert_cum.tolist(),
        ))
        history.append(int(outcome))
    trace = RegretTrace(
        records=records, expert_count=pool.N, eta=config.eta, algorithm=config.algorithm,
        substitution=config.substitution if config.algorithm == "AA" else None,
    )
    logger.debug(f"{config.algorithm} {config.composite.name}: {len(records)} rounds, regret {trace.final_regret:.6g}")
    return trace
