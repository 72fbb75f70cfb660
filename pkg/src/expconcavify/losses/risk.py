import numpy as np
from loguru import logger

from expconcavify.errors import ComputationError, InvalidInputError
from expconcavify.losses.catalog import log_weight
from expconcavify.losses.simplex import as_prob_array, interior_binary_grid

MIXABILITY_GRID_STEP = 1e-3
OVERRIDE_AGREEMENT = 1e-3


def conditional_risk(loss, p, q):
    """p' l(q); classes with p_i = 0 contribute nothing even when l_i(q) is infinite."""
    p = as_prob_array(p)
    q = as_prob_array(q)
    if p.shape[-1] != q.shape[-1]:
        raise InvalidInputError(f"dimension mismatch: p has {p.shape[-1]} classes, q has {q.shape[-1]}")
    partial = loss.partials(q)
    with np.errstate(invalid="ignore"):
        terms = np.where(p > 0.0, p * partial, 0.0)
    return terms.sum(axis=-1)


def bayes_risk(loss, p):
    return loss.risk(p)


def weight_derivative(loss, p_tilde):
    """w'(p_tilde), closed form when the loss carries one, else a relative-step central difference."""
    loss.require_weight()
    p_tilde = np.asarray(p_tilde, dtype=float)
    if loss.weight_derivative is not None:
        return loss.weight_derivative(p_tilde)
    h = 1e-6 * np.minimum(p_tilde, 1.0 - p_tilde)
    return (loss.weight(p_tilde + h) - loss.weight(p_tilde - h)) / (2.0 * h)


def mixability_constant(loss, step=MIXABILITY_GRID_STEP, use_override=True):
    """inf of w_log / w over the interior grid; catalog losses with a known constant return it exactly."""
    loss.require_weight()
    grid = interior_binary_grid(step)
    try:
        w = np.asarray(loss.weight(grid), dtype=float)
    except Exception as e:
        raise ComputationError(f"weight evaluation failed for {loss.name}: {e}") from e
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        bad = grid[~(np.isfinite(w) & (w > 0.0))][0]
        raise ComputationError(f"weight of {loss.name} is not positive at p_tilde={bad:g}")

    ratio = log_weight(grid) / w
    estimate = float(ratio.min())
    logger.debug(f"{loss.name}: grid mixability estimate {estimate:.6g} at p_tilde={grid[ratio.argmin()]:g}")
    if use_override and loss.known_mixability is not None:
        if abs(estimate - loss.known_mixability) > OVERRIDE_AGREEMENT:
            logger.warning(
                f"{loss.name}: grid estimate {estimate:.6g} disagrees with known constant {loss.known_mixability:g}"
            )
        return float(loss.known_mixability)
    return estimate
