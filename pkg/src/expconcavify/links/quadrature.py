"""Cumulative integrals of a vectorized integrand, tabulated once and evaluated in batches.

The table holds adaptive `quad` integrals between knots that are uniform in the middle and
geometrically refined towards both ends, where weight functions blow up. Points inside a
cell are finished with a fixed Gauss-Legendre rule, so evaluating an array costs one
integrand call on an (m, 16) node block.
"""
import warnings

import numpy as np
from loguru import logger
from scipy.integrate import IntegrationWarning, quad

from expconcavify.errors import ComputationError

GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(16)
QUAD_ABS_TOLERANCE = 1e-10
DIVERGENCE_WINDOW = 1e-3
DIVERGENCE_TAIL = 1e-10
# narrower end cells put quadrature nodes on the endpoint itself
MIN_CELL = 1e-12


def _knots(lower, upper, uniform=1001, refined=40):
    offsets = np.geomspace(1e-14, 1e-2, refined)
    offsets = offsets[offsets >= MIN_CELL * (upper - lower)]
    knots = np.concatenate([
        np.linspace(lower, upper, uniform),
        lower + offsets[lower + offsets < upper],
        upper - offsets[upper - offsets > lower],
    ])
    return np.unique(knots)


def _scalar(integrand):
    return lambda t: float(integrand(np.asarray(t, dtype=float)))


def integrable_at(integrand, end):
    """False when the integrand is not integrable at `end` (0 or 1) within the test window."""
    f = _scalar(integrand)
    if end == 0.0:
        window, tail = (0.0, DIVERGENCE_WINDOW), (0.0, DIVERGENCE_TAIL)
    else:
        window, tail = (1.0 - DIVERGENCE_WINDOW, 1.0), (1.0 - DIVERGENCE_TAIL, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, _ = quad(f, *window, limit=200)
            tail_value, _ = quad(f, *tail, limit=200)
        except (IntegrationWarning, ZeroDivisionError, FloatingPointError):
            return False
    # an integrable singularity leaves a vanishing tail; a divergent one does not
    return bool(np.isfinite(value) and np.isfinite(tail_value) and abs(tail_value) < 1e-3)


class CumulativeQuadrature:
    def __init__(self, integrand, lower=0.0, upper=1.0):
        self.integrand = integrand
        self.lower = float(lower)
        self.upper = float(upper)
        self.knots = _knots(self.lower, self.upper)

        f = _scalar(integrand)
        cell_tolerance = QUAD_ABS_TOLERANCE / len(self.knots)
        pieces = np.empty(len(self.knots) - 1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            for i, (a, b) in enumerate(zip(self.knots[:-1], self.knots[1:])):
                pieces[i], error = quad(f, a, b, epsabs=cell_tolerance, epsrel=1e-12, limit=200)
                if not np.isfinite(pieces[i]):
                    pieces[i] = self._gauss_cell(a, b)
                elif error > 1e3 * cell_tolerance:
                    logger.debug(f"quadrature cell [{a:.3g}, {b:.3g}] error estimate {error:.2g}")
        self.table = np.concatenate([[0.0], np.cumsum(pieces)])

    def _gauss_cell(self, a, b):
        """Open Gauss-Legendre rule for a cell whose adaptive integral is not finite."""
        half = 0.5 * (b - a)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = self.integrand(a + half * (GAUSS_NODES + 1.0))
        piece = half * float(np.sum(values * GAUSS_WEIGHTS))
        if not np.isfinite(piece):
            raise ComputationError(f"integral over [{a!r}, {b!r}] is not finite")
        logger.debug(f"quadrature cell [{a:.3g}, {b:.3g}] finished with the open rule")
        return piece

    @property
    def total(self):
        return float(self.table[-1])

    def __call__(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lower, self.upper)
        index = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, len(self.knots) - 2)
        left = self.knots[index]
        half = 0.5 * (x - left)
        nodes = left[..., None] + half[..., None] * (GAUSS_NODES + 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = self.integrand(nodes)
        remainder = half * np.sum(np.where(half[..., None] > 0.0, values, 0.0) * GAUSS_WEIGHTS, axis=-1)
        return self.table[index] + remainder
