"""Analytic exp-concavity checks for binary composite losses, evaluated on the interior grid.

Every check returns a GridReport. Checks that need w(1/2) = 1 accept either a plain
ProperLossSpec, which they normalize and report the scale of, or a NormalizedLoss.
"""
import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.integrate import quad

from expconcavify.analysis.report import GridReport
from expconcavify.errors import InvalidInputError
from expconcavify.links.link_functions import identity_link
from expconcavify.losses.catalog import ProperLossSpec, scale_loss
from expconcavify.losses.risk import weight_derivative
from expconcavify.losses.simplex import barycentric_grid, interior_binary_grid, lift_rows

GRID_STEP = 1e-3
ANALYTIC_TOLERANCE = 1e-8
NORMALIZATION_TOLERANCE = 1e-9
RECONSTRUCTION_TOLERANCE = 1e-6
QUADRATURE_TOLERANCE = 1e-10
HESSIAN_STEP = 1e-4
HESSIAN_TOLERANCE = 1e-6

NECESSARY_AND_SUFFICIENT = "necessary-and-sufficient"
NECESSARY_ONLY = "necessary-only"
SUFFICIENT = "sufficient"


class NormalizedLoss(BaseModel):
    """A binary loss rescaled so that its weight at 1/2 is 1; `loss` is scale * base."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: ProperLossSpec
    scale: float
    loss: ProperLossSpec

    @model_validator(mode="after")
    def _check_unit_weight(self):
        at_half = float(self.loss.weight(np.asarray(0.5)))
        if abs(at_half - 1.0) > NORMALIZATION_TOLERANCE:
            raise ValueError(f"normalized weight at 1/2 is {at_half!r}, expected 1")
        return self


def normalize_loss(loss):
    if isinstance(loss, NormalizedLoss):
        return loss
    loss.require_weight()
    scale = 1.0 / float(loss.weight(np.asarray(0.5)))
    return NormalizedLoss(base=loss, scale=scale, loss=scale_loss(loss, scale))


def _plain(loss):
    return loss.loss if isinstance(loss, NormalizedLoss) else loss


def _evaluate(slack_fn, grid, diagnostics):
    """Vectorized slack evaluation, falling back to point by point when the batch raises."""
    try:
        with np.errstate(all="ignore"):
            values = np.asarray(slack_fn(grid), dtype=float)
        return np.where(np.isfinite(values), values, np.nan)
    except Exception as e:
        diagnostics.append(f"batch evaluation failed ({e}); evaluating point by point")
    values = np.empty(len(grid))
    for i, q in enumerate(grid):
        try:
            with np.errstate(all="ignore"):
                values[i] = float(slack_fn(np.asarray([q]))[0])
        except Exception as e:
            diagnostics.append(f"p_tilde={q:g}: {e}")
            values[i] = np.nan
    return np.where(np.isfinite(values), values, np.nan)


def check_prop5(loss, link, alpha, tol=ANALYTIC_TOLERANCE, step=GRID_STEP):
    """-1/q + a w q <= w'/w - psi''/psi' <= 1/(1-q) - a w (1-q) at every grid point.

    Necessary and sufficient for alpha-exp-concavity of the composite loss.
    """
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    loss = _plain(loss)
    loss.require_weight()
    grid = interior_binary_grid(step)
    diagnostics = []

    def middle(q):
        return weight_derivative(loss, q) / loss.weight(q) - link.second_derivative(q) / link.derivative(q)

    lower = _evaluate(lambda q: middle(q) - (-1.0 / q + alpha * loss.weight(q) * q), grid, diagnostics)
    upper = _evaluate(lambda q: (1.0 / (1.0 - q) - alpha * loss.weight(q) * (1.0 - q)) - middle(q), grid, diagnostics)
    report = GridReport.from_slacks(
        f"prop5 {loss.name}+{link.name} alpha={alpha:g}", NECESSARY_AND_SUFFICIENT,
        grid, lower, upper, tol, diagnostics=diagnostics,
    )
    logger.debug(report.summary())
    return report


def check_prop6(loss_normalized, link, alpha, tol=ANALYTIC_TOLERANCE, step=GRID_STEP):
    """Two-sided weight envelope around psi; only refutes exp-concavity.

    Both sides flip at 1/2 and hold with zero slack there.
    """
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    normalized = normalize_loss(loss_normalized)
    loss = normalized.loss
    grid = interior_binary_grid(step)
    diagnostics = []
    slope_half = float(link.derivative(0.5))
    value_half = float(link.forward(0.5))
    side = np.sign(grid - 0.5)

    def gap(q):
        return link.forward(q) - value_half

    lower = _evaluate(
        lambda q: side * (loss.weight(q) * q * (2.0 * slope_half - alpha * gap(q)) - link.derivative(q)),
        grid, diagnostics,
    )
    upper = _evaluate(
        lambda q: -side * (loss.weight(q) * (1.0 - q) * (2.0 * slope_half + alpha * gap(q)) - link.derivative(q)),
        grid, diagnostics,
    )
    report = GridReport.from_slacks(
        f"prop6 {normalized.base.name}+{link.name} alpha={alpha:g}", NECESSARY_ONLY,
        grid, lower, upper, tol, scale=normalized.scale, diagnostics=diagnostics,
    )
    logger.debug(report.summary())
    return report


def check_identity_necessary(loss_normalized, alpha, tol=ANALYTIC_TOLERANCE, step=GRID_STEP):
    """The identity-link envelope 1/(q(2 - a(q - 1/2))) and 1/((1-q)(2 + a(q - 1/2))) around w."""
    report = check_prop6(loss_normalized, identity_link(), alpha, tol=tol, step=step)
    return report.model_copy(update={"label": report.label.replace("prop6", "identity-necessary")})


def check_canonical_condition(loss, alpha, tol=ANALYTIC_TOLERANCE, step=GRID_STEP):
    """w <= 1/(a q^2) and w <= 1/(a (1-q)^2), written as 1 - a q^2 w >= 0 on both sides."""
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    loss = _plain(loss)
    loss.require_weight()
    grid = interior_binary_grid(step)
    diagnostics = []
    lower = _evaluate(lambda q: 1.0 - alpha * q ** 2 * loss.weight(q), grid, diagnostics)
    upper = _evaluate(lambda q: 1.0 - alpha * (1.0 - q) ** 2 * loss.weight(q), grid, diagnostics)
    return GridReport.from_slacks(
        f"canonical {loss.name} alpha={alpha:g}", NECESSARY_AND_SUFFICIENT,
        grid, lower, upper, tol, diagnostics=diagnostics,
    )


def _integral(f, lo, hi):
    value, _ = quad(lambda t: float(f(t)), lo, hi, epsabs=QUADRATURE_TOLERANCE, epsrel=QUADRATURE_TOLERANCE, limit=200)
    return value


def check_theorem7(loss_normalized, a, b, alpha, tol=ANALYTIC_TOLERANCE, step=GRID_STEP):
    """Sufficient conditions built from a on (0, 1/2] and b on [1/2, 1).

    Lower slacks hold the integral conditions multiplied through by q(1-q); upper slacks are
    -alpha - a and -alpha - b. The weight rebuilt from a and b must match the normalized
    weight within RECONSTRUCTION_TOLERANCE; a mismatch is reported apart from the inequalities.
    """
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    normalized = normalize_loss(loss_normalized)
    loss = normalized.loss
    grid = interior_binary_grid(step)
    # 1/2 belongs to both halves
    left = np.append(grid[grid < 0.5 - 1e-12], 0.5)
    right = np.insert(grid[grid > 0.5 + 1e-12], 0, 0.5)
    diagnostics = []

    integral_a = np.array([_integral(a, q, 0.5) for q in left])
    integral_b = np.array([_integral(b, 0.5, q) for q in right])
    a_values = np.array([float(a(q)) for q in left])
    b_values = np.array([float(b(q)) for q in right])

    lower_left = a_values * left * (1.0 - left) - alpha * (1.0 - left) ** 2 + 2.0 - integral_a
    lower_right = b_values * right * (1.0 - right) - alpha * right ** 2 + 2.0 - integral_b
    upper_left = -alpha - a_values
    upper_right = -alpha - b_values

    with np.errstate(divide="ignore", invalid="ignore"):
        rebuilt = np.concatenate([1.0 / (left * (2.0 - integral_a)), 1.0 / ((1.0 - right) * (2.0 - integral_b))])
    points = np.concatenate([left, right])
    target = loss.weight(points)
    relative = np.abs(rebuilt - target) / np.maximum(np.abs(target), 1.0)
    worst = float(np.nanmax(np.where(np.isfinite(relative), relative, np.inf)))
    reconstruction_ok = worst <= RECONSTRUCTION_TOLERANCE
    if not reconstruction_ok:
        where = float(points[np.argmax(np.where(np.isfinite(relative), relative, np.inf))])
        diagnostics.append(f"reconstructed weight differs from {normalized.base.name} by {worst:.3g} at p_tilde={where:g}")

    report = GridReport.from_slacks(
        f"theorem7 {normalized.base.name} alpha={alpha:g}", SUFFICIENT,
        points,
        np.concatenate([lower_left, lower_right]),
        np.concatenate([upper_left, upper_right]),
        tol,
        scale=normalized.scale,
        reconstruction_ok=reconstruction_ok,
        reconstruction_error=worst,
        diagnostics=diagnostics,
    )
    logger.debug(report.summary())
    return report


def beesack_envelope(alpha):
    """Lower envelopes a_min on (0, 1/2] and b_min on [1/2, 1).

    Any a meeting the integral condition of check_theorem7 satisfies a >= a_min, and
    likewise for b; the converse does not hold.
    """
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")

    def a_min(q):
        q = np.asarray(q, dtype=float)
        return -alpha + alpha / (2.0 * q ** 2) - 2.0 / q ** 2

    def b_min(q):
        q = np.asarray(q, dtype=float)
        return alpha * q / (1.0 - q) + (2.0 * alpha * q - alpha - 4.0) / (2.0 * (1.0 - q) ** 2)

    return a_min, b_min


def _reduced_hessian(loss, points, h=HESSIAN_STEP):
    """Central-difference Hessian of p_tilde -> L(p_tilde, 1 - sum) at each (k, 2) row."""

    def risk(x):
        return loss.risk(lift_rows(x))

    e1 = np.array([h, 0.0])
    e2 = np.array([0.0, h])
    centre = risk(points)
    h11 = (risk(points + e1) - 2.0 * centre + risk(points - e1)) / h ** 2
    h22 = (risk(points + e2) - 2.0 * centre + risk(points - e2)) / h ** 2
    h12 = (risk(points + e1 + e2) - risk(points + e1 - e2) - risk(points - e1 + e2) + risk(points - e1 - e2)) / (4.0 * h ** 2)
    return np.stack([np.stack([h11, h12], axis=-1), np.stack([h12, h22], axis=-1)], axis=-2)


def check_prop4_identity(loss, alpha, m=30, tol=HESSIAN_TOLERANCE):
    """Three-class identity-link test: k - a (k u)(k u)' is PSD for u = e_i - p_tilde, i = 1..3.

    k is the negated Hessian of the reduced Bayes risk, the PSD test a 2x2 trace and
    determinant check. Lower slacks are the worst determinants, upper slacks the worst traces.
    """
    if loss.n != 3:
        raise InvalidInputError(f"check_prop4_identity needs a 3-class loss, got n={loss.n}")
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    grid = barycentric_grid(3, m)
    grid = grid[np.all(grid > 0.0, axis=-1)]
    reduced = grid[:, :2]
    k = -_reduced_hessian(loss, reduced)

    determinants = np.full(len(reduced), np.inf)
    traces = np.full(len(reduced), np.inf)
    for corner in (np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.0, 0.0])):
        u = corner - reduced
        ku = np.einsum("kij,kj->ki", k, u)
        matrix = k - alpha * ku[:, :, None] * ku[:, None, :]
        determinants = np.minimum(determinants, np.linalg.det(matrix))
        traces = np.minimum(traces, np.trace(matrix, axis1=-2, axis2=-1))

    return GridReport.from_slacks(
        f"prop4 {loss.name} n=3 alpha={alpha:g}", NECESSARY_AND_SUFFICIENT,
        reduced[:, 0], determinants, traces, tol,
        sample_points=reduced.tolist(),
    )
