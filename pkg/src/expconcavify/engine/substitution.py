"""Substitution functions: from a generalized prediction g to a permitted prediction v.

Binary predictions are read through the composite link, so the roots are found in
reduced-probability space, where l_1 decreases and l_2 increases. The permitted set is
the interval between the root of l_1 = g_1 and the root of l_2 = g_2; it is non-empty
exactly when g is a super-prediction.
"""
import math

import numpy as np
from loguru import logger
from scipy.optimize import bisect, brentq

from expconcavify.errors import InvalidInputError, SubstitutionError
from expconcavify.links.link_functions import ComplementLink
from expconcavify.losses.simplex import LossVector

ROOT_TOLERANCE = 1e-12
VALIDITY_TOLERANCE = 1e-9

BEST_LOOKAHEAD = "best_lookahead"
WORST_LOOKAHEAD = "worst_lookahead"
INVERSE_LOSS = "inverse_loss"
WEIGHTED_AVERAGE = "weighted_average"
SUBSTITUTIONS = (BEST_LOOKAHEAD, WORST_LOOKAHEAD, INVERSE_LOSS, WEIGHTED_AVERAGE)


def _as_losses(g):
    return g.as_array() if isinstance(g, LossVector) else np.asarray(g, dtype=float)


def _root(h, lo=0.0, hi=1.0):
    """Root of an increasing h on [lo, hi], clamped to an end when h keeps one sign."""
    h_lo, h_hi = h(lo), h(hi)
    if h_lo >= 0.0:
        return lo
    if h_hi <= 0.0:
        return hi
    if math.isfinite(h_lo) and math.isfinite(h_hi):
        return brentq(h, lo, hi, xtol=ROOT_TOLERANCE, rtol=4 * np.finfo(float).eps)
    return bisect(h, lo, hi, xtol=ROOT_TOLERANCE)


def _loss(composite, y, p_tilde):
    with np.errstate(all="ignore"):
        return float(composite.base.binary_partials(p_tilde)[y - 1])


def _square_closed_form(composite):
    return composite.base.name == "square_scalar" and isinstance(composite.link, ComplementLink)


def interval_endpoints(composite, g):
    """Predictions (v_1, v_2) with l_1(v_1) = g_1 and l_2(v_2) = g_2."""
    g = _as_losses(g)
    if _square_closed_form(composite):
        root1, root2 = np.sqrt(np.clip(g, 0.0, 1.0))
        return float(root1), float(1.0 - root2)
    p_first = _root(lambda q: g[0] - _loss(composite, 1, q))
    p_second = _root(lambda q: _loss(composite, 2, q) - g[1])
    return float(composite.link.forward(p_first)), float(composite.link.forward(p_second))


def inverse_loss_prediction(composite, g):
    """The prediction whose loss vector is parallel to g: l_2(v) g_1 = l_1(v) g_2."""
    g = _as_losses(g)
    if not np.all(np.isfinite(g)):
        raise SubstitutionError(f"inverse loss needs a finite generalized prediction, got {g.tolist()}")
    if g[0] <= 0.0 and g[1] <= 0.0:
        raise SubstitutionError("inverse loss ratio has a zero denominator: g = (0, 0)")
    if _square_closed_form(composite):
        root1, root2 = np.sqrt(np.clip(g, 0.0, None))
        return float(root1 / (root1 + root2))
    q = _root(lambda t: _loss(composite, 2, t) * g[0] - _loss(composite, 1, t) * g[1])
    return float(composite.link.forward(q))


def is_permitted(composite, g, v, tol=VALIDITY_TOLERANCE):
    losses = composite.partials(np.asarray(v, dtype=float))
    return bool(np.all(losses <= _as_losses(g) + tol))


def substitute(config, g, outcome=None, state=None, expert_predictions=None, validate=True):
    """Prediction for generalized prediction g under config.substitution.

    Look-ahead rules need the revealed outcome; the weighted average needs the weight state
    and the expert predictions. With validate, a prediction whose loss exceeds g raises
    SubstitutionError, except for a weighted average the config allows to be invalid.
    """
    composite = config.composite
    kind = config.substitution
    g = _as_losses(g)

    if kind == WEIGHTED_AVERAGE:
        if state is None or expert_predictions is None:
            raise InvalidInputError("the weighted average needs the weight state and expert predictions")
        predictions = np.asarray(expert_predictions, dtype=float)
        v = np.tensordot(state.as_array(), predictions, axes=1)
        v = float(v) if np.ndim(v) == 0 else v
        if validate and not is_permitted(composite, g, v):
            if config.allow_non_exp_concave:
                logger.warning(f"weighted average {v} leaves the permitted set of g={g.tolist()}")
            else:
                raise SubstitutionError(f"weighted average {v} is not a permitted prediction for g={g.tolist()}")
        return v

    if composite.n != 2:
        raise InvalidInputError(f"{kind} substitution is binary only, the loss has {composite.n} classes")
    if kind == INVERSE_LOSS:
        v = inverse_loss_prediction(composite, g)
    elif kind in (BEST_LOOKAHEAD, WORST_LOOKAHEAD):
        if outcome not in (1, 2):
            raise InvalidInputError(f"{kind} needs the revealed outcome class 1 or 2, got {outcome}")
        endpoints = interval_endpoints(composite, g)
        worst = endpoints[outcome - 1]
        best = endpoints[2 - outcome]
        v = worst if kind == WORST_LOOKAHEAD else best
    else:
        raise InvalidInputError(f"unknown substitution {kind}, try: " + ", ".join(SUBSTITUTIONS))

    if validate and not is_permitted(composite, g, v):
        raise SubstitutionError(f"g={g.tolist()} is not a super-prediction; {kind} gave v={v:.12g}")
    return v
