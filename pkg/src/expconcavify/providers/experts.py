from typing import Literal, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, model_validator

from expconcavify.engine.game import ExpertPool, constant_pool
from expconcavify.errors import InvalidInputError
from expconcavify.providers.dataset import ingest_outcome_csv

SETTING_NAMES = {1: "setting1", 2: "setting2", 3: "setting3"}


class ExpertSettingSpec(BaseModel):
    """Which expert pool to play against. Predictions are probabilities of class 2."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["setting1", "setting2", "setting3", "file"] = "setting1"
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check_source(self):
        if self.kind == "file" and not self.path:
            raise ValueError("a file expert setting needs path")
        return self

    @classmethod
    def numbered(cls, setting):
        try:
            return cls(kind=SETTING_NAMES[int(setting)])
        except KeyError:
            raise InvalidInputError(f"expert setting must be 1, 2 or 3, got {setting}") from None


def _oracle_pool(outcomes):
    outcomes = list(outcomes)

    def predict(t, history):
        # the oracle sees the outcome of the round it predicts
        return np.array([0.0, 1.0, 1.0 if outcomes[t - 1] == 2 else 0.0])

    return ExpertPool(3, predict, name="setting2")


def _table_pool(predictions, name):
    predictions = np.asarray(predictions, dtype=float)

    def predict(t, history):
        if t > len(predictions):
            raise InvalidInputError(f"{name} has predictions for {len(predictions)} rounds, asked for round {t}")
        return predictions[t - 1]

    return ExpertPool(predictions.shape[1], predict, name=name)


def build_experts(spec, outcomes=None):
    if spec.kind == "setting1":
        pool = constant_pool([0.0, 1.0], name="setting1")
    elif spec.kind == "setting2":
        if outcomes is None:
            raise InvalidInputError("setting2 needs the outcome sequence for its oracle expert")
        pool = _oracle_pool(outcomes)
    elif spec.kind == "setting3":
        pool = constant_pool(np.round(np.arange(101) / 100.0, 2), name="setting3")
    else:
        _, predictions = ingest_outcome_csv(spec.path)
        if predictions is None:
            raise InvalidInputError(f"{spec.path} has no expert columns")
        pool = _table_pool(predictions, name=f"file:{spec.path}")
    logger.debug(f"Built {pool!r}")
    return pool
