"""Bregman divergences, the pair losses they generate, and mixability checks for them.

Generators act on reduced probabilities s (the first n - 1 coordinates). A proper loss l
generates phi = -L, whose gradient is -(l_i - l_n) in closed form; other generators fall
back to central differences.
"""
from typing import Callable, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict
from scipy.special import rel_entr

from expconcavify.analysis.numeric import curve_mixability, midpoint_slacks
from expconcavify.analysis.report import GridReport
from expconcavify.errors import ComputationError, InvalidInputError
from expconcavify.losses.simplex import as_prob_array, binary_prob, exp_transform, interior_binary_grid, lift_rows

GRADIENT_STEP = 1e-6
GRADIENT_MARGIN = 1e-4
# 1e-5 leaves rounding noise of order 1e-5 in second differences, above the 1e-6 tolerance
LEMMA14_STEP = 1e-4
LEMMA14_TOLERANCE = 1e-6
MIDPOINT_TOLERANCE = 1e-9


class BregmanGenerator(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    n: int
    phi: Callable
    gradient: Optional[Callable] = None

    def value(self, s):
        return np.asarray(self.phi(np.asarray(s, dtype=float)), dtype=float)

    def grad(self, s):
        s = np.asarray(s, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(s), dtype=float)
        return central_gradient(self.phi, s)


def central_gradient(phi, s, step=GRADIENT_STEP):
    """Central differences in each reduced coordinate, kept GRADIENT_MARGIN inside the simplex."""
    s = np.clip(np.asarray(s, dtype=float), GRADIENT_MARGIN, 1.0 - GRADIENT_MARGIN)
    columns = []
    for i in range(s.shape[-1]):
        shift = np.zeros(s.shape[-1])
        shift[i] = step
        columns.append((phi(s + shift) - phi(s - shift)) / (2.0 * step))
    return np.stack(columns, axis=-1)


class PairLoss(BaseModel):
    """l(y, v) on pairs of probability vectors, vectorized over leading axes."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    n: int
    evaluator: Callable

    def __call__(self, y, v):
        return self.evaluator(as_prob_array(y), as_prob_array(v))


def bregman_divergence(gen, s, s0):
    s = as_prob_array(s)
    s0 = as_prob_array(s0)
    with np.errstate(all="ignore"):
        value = gen.value(s) - gen.value(s0) - np.sum((s - s0) * gen.grad(s0), axis=-1)
    if not np.all(np.isfinite(value)):
        raise ComputationError(f"{gen.name} divergence is not finite; s0 may sit on the simplex boundary")
    return float(value) if np.ndim(value) == 0 else value


def generator_from_loss(loss):
    """phi = -L on reduced probabilities, with gradient -(l_i - l_n)."""

    def phi(s):
        return -loss.risk(lift_rows(s))

    def gradient(s):
        partial = loss.partials(lift_rows(s))
        return -(partial[..., :-1] - partial[..., -1:])

    return BregmanGenerator(name=f"-L_{loss.name}", n=loss.n, phi=phi, gradient=gradient)


def blf_from_proper_loss(loss):
    if not loss.is_proper or not loss.is_strictly_proper:
        raise InvalidInputError(f"{loss.name} is not strictly proper and does not generate a Bregman loss")
    generator = generator_from_loss(loss)

    def evaluator(y, v):
        y_reduced, v_reduced = y[..., :-1], v[..., :-1]
        with np.errstate(all="ignore"):
            return (
                generator.value(y_reduced)
                - generator.value(v_reduced)
                - np.sum((y_reduced - v_reduced) * generator.grad(v_reduced), axis=-1)
            )

    return PairLoss(name=f"blf_{loss.name}", n=loss.n, evaluator=evaluator)


def kl_loss(y, v):
    y = as_prob_array(y)
    v = as_prob_array(v)
    if y.shape[-1] != v.shape[-1]:
        raise InvalidInputError(f"dimension mismatch: y has {y.shape[-1]} classes, v has {v.shape[-1]}")
    value = rel_entr(y, v).sum(axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def kl_pair_loss(n=2):
    return PairLoss(name="kl", n=n, evaluator=kl_loss)


def check_lemma14_condition(pair_loss, beta, c_beta=1.0, grid=None, step=LEMMA14_STEP, tol=LEMMA14_TOLERANCE):
    """g'' + (g')^2 >= 0 in y for g(y) = (beta / c) l(y, v1) - beta l(y, v2) over grid triples."""
    if pair_loss.n != 2:
        raise InvalidInputError(f"the mixture condition is checked for binary pair losses, got n={pair_loss.n}")
    if beta <= 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    if c_beta < 1.0:
        raise InvalidInputError(f"c(beta) must be at least 1, got {c_beta}")
    grid = np.linspace(0.05, 0.95, 19) if grid is None else np.asarray(grid, dtype=float)
    y, v1, v2 = (axis.ravel() for axis in np.meshgrid(grid, grid, grid, indexing="ij"))

    def g(point):
        outcome = binary_prob(point)
        return beta / c_beta * pair_loss(outcome, binary_prob(v1)) - beta * pair_loss(outcome, binary_prob(v2))

    centre = g(y)
    first = (g(y + step) - g(y - step)) / (2.0 * step)
    second = (g(y + step) - 2.0 * centre + g(y - step)) / step ** 2
    slack = second + first ** 2
    report = GridReport.from_slacks(
        f"lemma14 {pair_loss.name} beta={beta:g} c={c_beta:g}", "pointwise",
        y, slack, slack, tol, sample_points=np.stack([y, v1, v2], axis=-1).tolist(),
    )
    logger.debug(report.summary())
    return report


def blf_mixability_report(pair_loss, beta, grid_step=1e-3, tol=MIDPOINT_TOLERANCE):
    if pair_loss.n != 2:
        raise InvalidInputError(f"pair-loss mixability is checked for binary pair losses, got n={pair_loss.n}")
    if beta <= 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    grid = interior_binary_grid(grid_step)
    predictions = binary_prob(grid)
    vertices = np.eye(2)
    curve = np.stack([exp_transform(pair_loss(vertices[i], predictions), beta) for i in range(2)], axis=-1)
    return curve_mixability(curve, grid, f"blf mixability {pair_loss.name} beta={beta:g}", tol=tol)


def check_blf_mixability(pair_loss, beta, grid_step=1e-3, tol=MIDPOINT_TOLERANCE):
    return blf_mixability_report(pair_loss, beta, grid_step, tol).verdict


def check_blf_exp_concavity(pair_loss, alpha, grid_step=1e-3, outcomes=None, tol=MIDPOINT_TOLERANCE):
    """Midpoint concavity of v -> exp(-alpha l(y, v)) for each fixed outcome y on a grid."""
    if pair_loss.n != 2:
        raise InvalidInputError(f"pair-loss exp-concavity is checked for binary pair losses, got n={pair_loss.n}")
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    grid = interior_binary_grid(grid_step)
    outcomes = np.linspace(0.0, 1.0, 11) if outcomes is None else np.asarray(outcomes, dtype=float)
    predictions = binary_prob(grid)
    values = np.stack(
        [exp_transform(pair_loss(binary_prob(outcome), predictions), alpha) for outcome in outcomes], axis=-1,
    )
    worst = midpoint_slacks(values).min(axis=-1)
    report = GridReport.from_slacks(
        f"blf exp-concavity {pair_loss.name} alpha={alpha:g}", "numeric", grid, worst, worst, tol,
    )
    logger.debug(report.summary())
    return report
