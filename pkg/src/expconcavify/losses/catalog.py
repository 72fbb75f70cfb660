"""Named proper losses for class probability estimation.

Every evaluator is vectorized: partial losses and Bayes risks take an (..., n) array of
probability rows, weights take an array of binary reduced probabilities p_tilde = p_1.
"""
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.special import entr

from expconcavify.errors import InvalidInputError
from expconcavify.losses.simplex import LossVector, as_prob_array, binary_prob


class ProperLossSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    n: int
    partial_loss: Callable
    bayes_risk: Callable
    weight: Optional[Callable] = None
    weight_derivative: Optional[Callable] = None
    is_fair: bool = True
    is_proper: bool = True
    is_strictly_proper: bool = True
    known_mixability: Optional[float] = None

    def partials(self, p):
        p = as_prob_array(p)
        if p.shape[-1] != self.n:
            raise InvalidInputError(f"{self.name} expects {self.n} classes, got {p.shape[-1]}")
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.partial_loss(p)

    def loss_vector(self, p):
        return LossVector(entries=np.asarray(self.partials(p), dtype=float).reshape(self.n).tolist())

    def binary_partials(self, p_tilde):
        """(..., 2) partial losses at reduced probabilities p_tilde."""
        self.require_binary()
        return self.partials(binary_prob(p_tilde))

    def risk(self, p):
        p = as_prob_array(p)
        if p.shape[-1] != self.n:
            raise InvalidInputError(f"{self.name} expects {self.n} classes, got {p.shape[-1]}")
        return self.bayes_risk(p)

    def require_binary(self):
        if self.n != 2:
            raise InvalidInputError(f"{self.name} has {self.n} classes; a binary loss is required")

    def require_weight(self):
        self.require_binary()
        if self.weight is None or not self.is_strictly_proper:
            raise InvalidInputError(f"{self.name} is not strictly proper and has no weight function")


# --- log loss ---

def _log_partial(p):
    return -np.log(p)


def _log_bayes(p):
    return entr(p).sum(axis=-1)


def log_weight(p_tilde):
    p_tilde = np.asarray(p_tilde, dtype=float)
    return 1.0 / (p_tilde * (1.0 - p_tilde))


def _log_weight_derivative(p_tilde):
    p_tilde = np.asarray(p_tilde, dtype=float)
    return (2.0 * p_tilde - 1.0) / (p_tilde * (1.0 - p_tilde)) ** 2


# --- square loss, vector form: l_i(q) = sum_j ([i = j] - q_j)^2 ---

def _square_vector_partial(p):
    return 1.0 - 2.0 * p + np.sum(p ** 2, axis=-1, keepdims=True)


def _square_vector_bayes(p):
    return 1.0 - np.sum(p ** 2, axis=-1)


# --- square loss, scalar form on v = p_2: l_1 = v^2, l_2 = (1 - v)^2 ---

def _square_scalar_partial(p):
    return np.stack([p[..., 1] ** 2, p[..., 0] ** 2], axis=-1)


def _square_scalar_bayes(p):
    return p[..., 0] * p[..., 1]


# --- boosting loss ---

def _boosting_partial(p):
    q = p[..., 0]
    return np.stack([0.5 * np.sqrt((1.0 - q) / q), 0.5 * np.sqrt(q / (1.0 - q))], axis=-1)


def _boosting_bayes(p):
    return np.sqrt(p[..., 0] * p[..., 1])


def _boosting_weight(p_tilde):
    p_tilde = np.asarray(p_tilde, dtype=float)
    return 0.25 * (p_tilde * (1.0 - p_tilde)) ** -1.5


def _boosting_weight_derivative(p_tilde):
    p_tilde = np.asarray(p_tilde, dtype=float)
    return -1.5 * (1.0 - 2.0 * p_tilde) / (p_tilde * (1.0 - p_tilde)) * _boosting_weight(p_tilde)


# --- absolute and 0-1 losses (not strictly proper) ---

def _absolute_partial(p):
    return 2.0 * (1.0 - p)


def _absolute_bayes(p):
    return 2.0 * (1.0 - p.max(axis=-1))


def _zero_one_partial(p):
    # lowest index wins ties
    winner = np.argmax(p, axis=-1)
    return 1.0 - np.eye(p.shape[-1])[winner]


def _zero_one_bayes(p):
    return 1.0 - p.max(axis=-1)


def _constant(value):
    def weight(p_tilde):
        return np.full_like(np.asarray(p_tilde, dtype=float), value)
    return weight


def _log_loss(n):
    binary = n == 2
    return ProperLossSpec(
        name="log", n=n, partial_loss=_log_partial, bayes_risk=_log_bayes,
        weight=log_weight if binary else None,
        weight_derivative=_log_weight_derivative if binary else None,
        known_mixability=1.0,
    )


def _square_vector_loss(n):
    binary = n == 2
    return ProperLossSpec(
        name="square_vector", n=n, partial_loss=_square_vector_partial, bayes_risk=_square_vector_bayes,
        weight=_constant(4.0) if binary else None,
        weight_derivative=_constant(0.0) if binary else None,
        known_mixability=1.0,
    )


def _square_scalar_loss(n):
    return ProperLossSpec(
        name="square_scalar", n=n, partial_loss=_square_scalar_partial, bayes_risk=_square_scalar_bayes,
        weight=_constant(2.0), weight_derivative=_constant(0.0), known_mixability=2.0,
    )


def _boosting_loss(n):
    # w_log / w tends to 0 at the boundary, so no analytic mixability override applies
    return ProperLossSpec(
        name="boosting", n=n, partial_loss=_boosting_partial, bayes_risk=_boosting_bayes,
        weight=_boosting_weight, weight_derivative=_boosting_weight_derivative,
    )


def _absolute_loss(n):
    return ProperLossSpec(
        name="absolute", n=n, partial_loss=_absolute_partial, bayes_risk=_absolute_bayes,
        is_proper=False, is_strictly_proper=False,
    )


def _zero_one_loss(n):
    return ProperLossSpec(
        name="zero_one", n=n, partial_loss=_zero_one_partial, bayes_risk=_zero_one_bayes,
        is_strictly_proper=False,
    )


LOSS_CATALOG = {
    "log": _log_loss,
    "square_vector": _square_vector_loss,
    "square_scalar": _square_scalar_loss,
    "boosting": _boosting_loss,
    "absolute": _absolute_loss,
    "zero_one": _zero_one_loss,
}

BINARY_ONLY = {"square_scalar", "boosting"}


def catalog_loss(name, n=2):
    """Return a catalog loss by name, e.g. catalog_loss("log", 3)."""
    try:
        builder = LOSS_CATALOG[name]
    except KeyError:
        raise InvalidInputError(f"unknown loss {name}, try: " + ", ".join(LOSS_CATALOG.keys())) from None
    if n < 2:
        raise InvalidInputError(f"a loss needs at least 2 classes, got n={n}")
    if name in BINARY_ONLY and n != 2:
        raise InvalidInputError(f"{name} is defined for n = 2 only, got n={n}")
    return builder(n)


def scale_loss(loss, factor):
    """The loss factor * l; weights scale linearly and the mixability constant inversely."""
    if factor <= 0:
        raise InvalidInputError(f"scale factor must be positive, got {factor}")

    def scaled(evaluator):
        if evaluator is None:
            return None
        return lambda x: factor * evaluator(x)

    return loss.model_copy(update={
        "name": f"{factor:g}*{loss.name}",
        "partial_loss": scaled(loss.partial_loss),
        "bayes_risk": scaled(loss.bayes_risk),
        "weight": scaled(loss.weight),
        "weight_derivative": scaled(loss.weight_derivative),
        "known_mixability": None if loss.known_mixability is None else loss.known_mixability / factor,
    })
