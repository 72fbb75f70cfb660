import math
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.special import logsumexp

from expconcavify.errors import InvalidInputError, WeightCollapseError

WEIGHT_SUM_TOLERANCE = 1e-12


class WeightState(BaseModel):
    """Expert weights, a probability vector over the pool."""

    model_config = ConfigDict(frozen=True)

    weights: List[float]

    @field_validator("weights")
    @classmethod
    def _check_distribution(cls, weights):
        if not weights:
            raise ValueError("a weight state needs at least one expert")
        if any(w < 0.0 or not math.isfinite(w) for w in weights):
            raise ValueError("weights must be finite and non-negative")
        if abs(math.fsum(weights) - 1.0) > WEIGHT_SUM_TOLERANCE * max(1, len(weights)):
            raise ValueError(f"weights must sum to 1, got {math.fsum(weights)!r}")
        return weights

    @classmethod
    def uniform(cls, count):
        if count < 1:
            raise InvalidInputError(f"expert count must be at least 1, got {count}")
        return cls(weights=[1.0 / count] * count)

    @property
    def size(self):
        return len(self.weights)

    def as_array(self):
        return np.asarray(self.weights, dtype=float)


def update_weights(state, losses, eta):
    """w_i <- w_i exp(-eta l_i), renormalized in log space; infinite losses zero an expert."""
    if eta <= 0:
        raise InvalidInputError(f"eta must be positive, got {eta}")
    losses = np.asarray(losses, dtype=float)
    if losses.shape != (state.size,):
        raise InvalidInputError(f"expected {state.size} expert losses, got shape {losses.shape}")
    if np.any(np.isnan(losses)):
        raise InvalidInputError("expert losses contain NaN")
    with np.errstate(divide="ignore"):
        log_weights = np.log(state.as_array()) - eta * losses
    if np.all(np.isneginf(log_weights)):
        raise WeightCollapseError("every expert weight vanished after the update")
    weights = np.exp(log_weights - logsumexp(log_weights))
    return WeightState(weights=(weights / weights.sum()).tolist())


def generalized_prediction(state, expert_loss_vectors, beta):
    """g_j = -(1/beta) ln sum_i w_i exp(-beta l_j(v^i)), computed with logsumexp."""
    if beta <= 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    losses = np.asarray(expert_loss_vectors, dtype=float)
    if losses.ndim != 2 or losses.shape[0] != state.size:
        raise InvalidInputError(f"expected an ({state.size}, n) loss matrix, got shape {losses.shape}")
    weights = state.as_array()[:, None]
    with np.errstate(divide="ignore"):
        mixed = logsumexp(-beta * losses, b=np.broadcast_to(weights, losses.shape), axis=0)
    return -mixed / beta


def regret_bound(N, eta):
    if N < 1:
        raise InvalidInputError(f"expert count must be at least 1, got {N}")
    if eta <= 0:
        raise InvalidInputError(f"eta must be positive, got {eta}")
    return math.log(N) / eta
