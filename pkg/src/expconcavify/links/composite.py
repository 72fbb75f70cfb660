from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict

from expconcavify.errors import InvalidInputError
from expconcavify.links.link_functions import IdentityLink, LinkFunction
from expconcavify.losses.catalog import ProperLossSpec
from expconcavify.losses.simplex import lift_rows

CURVATURE_STEP = 1e-6


class CurvatureRatio(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    derivative: float


class CompositeLoss(BaseModel):
    """The proper composite loss l o psi^{-1}."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: ProperLossSpec
    link: Any

    def __init__(self, **data):
        # ahead of field validation, which would wrap these in a ValidationError
        link, base = data.get("link"), data.get("base")
        if not isinstance(link, LinkFunction):
            raise InvalidInputError(f"link must be a LinkFunction, got {type(link).__name__}")
        if getattr(base, "n", 2) > 2 and not isinstance(link, IdentityLink):
            raise InvalidInputError("only the identity link is supported as a composite link for n > 2")
        super().__init__(**data)

    @property
    def name(self):
        return f"{self.base.name}+{self.link.name}"

    @property
    def n(self):
        return self.base.n

    def reduced(self, v):
        """Reduced probabilities behind predictions v."""
        if self.base.n > 2:
            return np.asarray(v, dtype=float)
        return self.link.invert(v)

    def partials(self, v):
        """(..., n) loss vectors at predictions v."""
        if self.base.n > 2:
            return self.base.partials(lift_rows(v))
        return self.base.binary_partials(self.link.invert(v))

    def partial(self, y, v):
        _check_class(y, self.base.n)
        return self.partials(v)[..., y - 1]

    def curvature_ratio(self, p_tilde):
        """k = w / psi' and its central-difference derivative."""
        self.base.require_weight()
        q = float(p_tilde)
        h = min(CURVATURE_STEP, 0.5 * q, 0.5 * (1.0 - q))

        def k(t):
            return float(self.base.weight(np.asarray(t)) / self.link.derivative(t))

        return CurvatureRatio(value=k(q), derivative=(k(q + h) - k(q - h)) / (2.0 * h))


def _check_class(y, n):
    if not 1 <= int(y) <= n:
        raise InvalidInputError(f"class index must be in 1..{n}, got {y}")


def composite_partial(composite, y, v):
    return composite.partial(y, v)


def composite_derivatives(composite, y, p_tilde):
    """First and second derivatives of l_y o psi^{-1} in v, through k = w / psi'."""
    composite.base.require_binary()
    _check_class(y, 2)
    q = float(p_tilde)
    if not 0.0 < q < 1.0:
        raise InvalidInputError(f"composite derivatives need an interior p_tilde, got {q}")
    slope = float(composite.link.derivative(q))
    if slope == 0.0:
        raise InvalidInputError(f"link derivative vanishes at p_tilde={q}")
    k = composite.curvature_ratio(q)
    if y == 1:
        return -(1.0 - q) * k.value, (-(1.0 - q) * k.derivative + k.value) / slope
    return q * k.value, (q * k.derivative + k.value) / slope
