"""Binary link functions on the reduced simplex (0, 1) and their inverses."""
import math

import numpy as np
from loguru import logger

from expconcavify.errors import ComputationError, InvalidInputError, OutOfRangeError
from expconcavify.links.quadrature import CumulativeQuadrature, integrable_at
from expconcavify.losses.catalog import log_weight
from expconcavify.losses.risk import mixability_constant, weight_derivative
from expconcavify.losses.simplex import exp_transform, interior_binary_grid

INVERSION_MARGIN = 1e-12
INVERSION_TOLERANCE = 1e-12
RANGE_SLACK = 1e-12
DIVERGENT_MARGIN = 1e-6
MIXABILITY_SLACK = 1e-9


def _out(values, like):
    values = np.asarray(values, dtype=float)
    return float(values) if np.ndim(like) == 0 else values


class LinkFunction:
    """Strictly monotone map psi from reduced probabilities to predictions.

    Subclasses provide forward, derivative and second_derivative; inversion is a
    vectorized bisection on the domain shrunk by INVERSION_MARGIN.
    """

    name = "link"

    def __init__(self, domain=(0.0, 1.0)):
        self.domain = (float(domain[0]), float(domain[1]))

    def forward(self, p_tilde):
        raise NotImplementedError

    def derivative(self, p_tilde):
        raise NotImplementedError

    def second_derivative(self, p_tilde):
        raise NotImplementedError

    @property
    def direction(self):
        return "increasing" if self.derivative(0.5) > 0 else "decreasing"

    @property
    def range(self):
        ends = np.asarray(self.forward(np.asarray(self.domain)), dtype=float)
        if np.any(np.isnan(ends)):
            raise ComputationError(f"{self.name} link is undefined at a domain end {self.domain}: {ends.tolist()}")
        return float(np.min(ends)), float(np.max(ends))

    def _check_range(self, v):
        lo, hi = self.range
        outside = (v < lo - RANGE_SLACK) | (v > hi + RANGE_SLACK)
        if np.any(outside):
            bad = float(np.asarray(v)[outside].flat[0])
            nearest = lo if bad < lo else hi
            raise OutOfRangeError(f"{bad!r} is outside the {self.name} link range [{lo:.6g}, {hi:.6g}]", nearest)
        return np.clip(v, lo, hi)

    def invert(self, v):
        v_in = v
        v = self._check_range(np.asarray(v, dtype=float))
        sign = 1.0 if self.direction == "increasing" else -1.0
        lo = np.full(v.shape, max(self.domain[0], INVERSION_MARGIN))
        hi = np.full(v.shape, min(self.domain[1], 1.0 - INVERSION_MARGIN))
        steps = int(math.ceil(math.log2(max(hi.max(initial=1.0) - lo.min(initial=0.0), 1e-300) / INVERSION_TOLERANCE)))
        for _ in range(max(steps, 1)):
            mid = 0.5 * (lo + hi)
            above = sign * (self.forward(mid) - v) > 0.0
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        return _out(0.5 * (lo + hi), v_in)

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, domain={self.domain})"


class IdentityLink(LinkFunction):
    name = "identity"

    def forward(self, p_tilde):
        return _out(p_tilde, p_tilde)

    def derivative(self, p_tilde):
        return _out(np.ones_like(np.asarray(p_tilde, dtype=float)), p_tilde)

    def second_derivative(self, p_tilde):
        return _out(np.zeros_like(np.asarray(p_tilde, dtype=float)), p_tilde)

    def invert(self, v):
        return _out(self._check_range(np.asarray(v, dtype=float)), v)


class ComplementLink(LinkFunction):
    """v = 1 - p_tilde: a binary prediction read as the probability of class 2."""

    name = "complement"

    def forward(self, p_tilde):
        return _out(1.0 - np.asarray(p_tilde, dtype=float), p_tilde)

    def derivative(self, p_tilde):
        return _out(-np.ones_like(np.asarray(p_tilde, dtype=float)), p_tilde)

    def second_derivative(self, p_tilde):
        return _out(np.zeros_like(np.asarray(p_tilde, dtype=float)), p_tilde)

    def invert(self, v):
        return _out(1.0 - self._check_range(np.asarray(v, dtype=float)), v)


class IntegralLink(LinkFunction):
    """psi(p_tilde) = scale * integral of f from the anchor to p_tilde."""

    def __init__(self, name, integrand, integrand_derivative, scale=1.0):
        self.name = name
        self.integrand = integrand
        self.integrand_derivative = integrand_derivative
        self.scale = float(scale)

        divergent = [end for end in (0.0, 1.0) if not integrable_at(integrand, end)]
        if divergent:
            logger.warning(
                f"{name} link: integrand not integrable at {divergent}; "
                f"domain restricted to [{DIVERGENT_MARGIN:g}, {1 - DIVERGENT_MARGIN:g}]"
            )
            domain = (DIVERGENT_MARGIN, 1.0 - DIVERGENT_MARGIN)
        else:
            domain = (0.0, 1.0)
        super().__init__(domain)
        self.divergent = bool(divergent)
        self.table = CumulativeQuadrature(integrand, *domain)

    def forward(self, p_tilde):
        return _out(self.scale * self.table(p_tilde), p_tilde)

    def derivative(self, p_tilde):
        with np.errstate(divide="ignore", invalid="ignore"):
            return _out(self.scale * self.integrand(np.asarray(p_tilde, dtype=float)), p_tilde)

    def second_derivative(self, p_tilde):
        with np.errstate(divide="ignore", invalid="ignore"):
            return _out(self.scale * self.integrand_derivative(np.asarray(p_tilde, dtype=float)), p_tilde)


class GeometricLink(LinkFunction):
    """psi(p_tilde) = exp(-beta l_1) - exp(-beta l_2); increasing whenever beta is within the mixability constant."""

    def __init__(self, loss, beta):
        super().__init__()
        self.name = "geometric"
        self.loss = loss
        self.beta = float(beta)

    def _exp_partials(self, p_tilde):
        z = exp_transform(self.loss.binary_partials(p_tilde), self.beta)
        return z[..., 0], z[..., 1]

    def forward(self, p_tilde):
        e1, e2 = self._exp_partials(p_tilde)
        return _out(e1 - e2, p_tilde)

    def derivative(self, p_tilde):
        q = np.asarray(p_tilde, dtype=float)
        e1, e2 = self._exp_partials(q)
        w = self.loss.weight(q)
        return _out(self.beta * w * ((1.0 - q) * e1 + q * e2), p_tilde)

    def second_derivative(self, p_tilde):
        q = np.asarray(p_tilde, dtype=float)
        e1, e2 = self._exp_partials(q)
        w = self.loss.weight(q)
        dw = weight_derivative(self.loss, q)
        spread = (1.0 - q) * e1 + q * e2
        d_spread = -e1 + e2 + self.beta * w * ((1.0 - q) ** 2 * e1 - q ** 2 * e2)
        return _out(self.beta * (dw * spread + w * d_spread), p_tilde)


def identity_link():
    return IdentityLink()


def complement_link():
    return ComplementLink()


def canonical_link(loss):
    loss.require_weight()
    return IntegralLink(
        "canonical",
        integrand=loss.weight,
        integrand_derivative=lambda q: weight_derivative(loss, q),
    )


def exp_concavifying_link(loss):
    """psi* = (w_log(1/2) / w(1/2)) * integral of w / w_log, with derivative 1 at 1/2."""
    loss.require_weight()
    beta = mixability_constant(loss)
    if beta <= 0.0:
        raise InvalidInputError(f"{loss.name} is not mixable; psi* needs a positive mixability constant")

    def integrand(t):
        return loss.weight(t) * t * (1.0 - t)

    def integrand_derivative(t):
        return weight_derivative(loss, t) * t * (1.0 - t) + loss.weight(t) * (1.0 - 2.0 * t)

    with np.errstate(divide="ignore", invalid="ignore"):
        interior = integrand(interior_binary_grid())
    if not np.all(np.isfinite(interior)):
        raise ComputationError(f"psi* integrand of {loss.name} is not finite on the interior")
    scale = float(log_weight(0.5) / loss.weight(np.asarray(0.5)))
    return IntegralLink("psi_star", integrand, integrand_derivative, scale=scale)


def geometric_link(loss, beta):
    loss.require_weight()
    if beta <= 0.0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    limit = mixability_constant(loss)
    if beta > limit + MIXABILITY_SLACK:
        raise InvalidInputError(
            f"beta={beta:g} exceeds the mixability constant {limit:.6g} of {loss.name}; the geometric link may not be monotone"
        )
    return GeometricLink(loss, beta)


def geometric_embedding(loss, beta, p):
    """J E_beta(l(p)) with J = [I_{n-1}, -1]: the multi-class geometric map into R^{n-1}."""
    z = exp_transform(loss.partials(p), beta)
    return z[..., :-1] - z[..., -1:]


def invert_link(link, v):
    return link.invert(v)


LINK_BUILDERS = {
    "identity": lambda loss, beta=None: identity_link(),
    "complement": lambda loss, beta=None: complement_link(),
    "canonical": lambda loss, beta=None: canonical_link(loss),
    "psi_star": lambda loss, beta=None: exp_concavifying_link(loss),
    "geometric": lambda loss, beta=None: geometric_link(loss, mixability_constant(loss) if beta is None else beta),
}


def build_link(name, loss, beta=None):
    try:
        builder = LINK_BUILDERS[name]
    except KeyError:
        raise InvalidInputError(f"unknown link {name}, try: " + ", ".join(LINK_BUILDERS.keys())) from None
    return builder(loss, beta)
