from typing import Literal, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from expconcavify.providers.dataset import ingest_outcome_csv

FAILURE = 1
SUCCESS = 2


class OutcomeSpec(BaseModel):
    """Where outcomes come from: a seeded Bernoulli draw or an outcome CSV."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["bernoulli", "file"] = "bernoulli"
    p: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    T: int = Field(default=100, ge=0)
    seed: int = 0
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check_source(self):
        if self.kind == "bernoulli" and self.p is None:
            raise ValueError("a bernoulli outcome spec needs p")
        if self.kind == "file" and not self.path:
            raise ValueError("a file outcome spec needs path")
        return self


def bernoulli_outcomes(p, T, seed):
    """T classes, class 2 (success) with probability p."""
    draws = np.random.default_rng(seed).random(T)
    return np.where(draws < p, SUCCESS, FAILURE).tolist()


def generate_outcomes(spec):
    if spec.kind == "file":
        outcomes, _ = ingest_outcome_csv(spec.path)
        logger.debug(f"Loaded {len(outcomes)} outcomes from {spec.path}")
        return outcomes
    outcomes = bernoulli_outcomes(spec.p, spec.T, spec.seed)
    logger.debug(f"Drew {spec.T} bernoulli({spec.p:g}) outcomes with seed {spec.seed}")
    return outcomes
