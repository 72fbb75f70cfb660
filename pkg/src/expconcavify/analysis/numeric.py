"""Black-box midpoint tests for exp-concavity, convexity and mixability.

Binary composites are sampled on a uniform grid in prediction space so that every pair of
grid points with an even index gap has its midpoint on the grid. Three-class composites
are tested on seeded random chords inside the simplex.
"""
import numpy as np
from loguru import logger

from expconcavify.analysis.report import GridReport
from expconcavify.errors import InvalidInputError
from expconcavify.links.composite import CompositeLoss
from expconcavify.losses.simplex import exp_transform, interior_binary_grid

GRID_STEP = 1e-3
MIDPOINT_TOLERANCE = 1e-9
SEGMENT_SAMPLES = 10_000
MAX_HALF_LENGTH = 0.1

NUMERIC = "numeric"


def midpoint_slacks(values):
    """Worst f(centre) - (f(left) + f(right)) / 2 per centre, for (N, k) samples on a uniform grid.

    Centres without a symmetric pair keep +inf.
    """
    values = np.asarray(values, dtype=float)
    count = len(values)
    worst = np.full(values.shape, np.inf)
    for gap in range(1, (count - 1) // 2 + 1):
        centre = values[gap:count - gap]
        chord = 0.5 * (values[:count - 2 * gap] + values[2 * gap:])
        worst[gap:count - gap] = np.minimum(worst[gap:count - gap], centre - chord)
    return worst


def _prediction_grid(composite, step):
    ends = composite.link.forward(np.array([step, 1.0 - step]))
    count = int(round(1.0 / step)) - 1
    return np.linspace(float(ends.min()), float(ends.max()), count)


def _simplex_chords(n_samples, margin, seed):
    """Centres and endpoints of random chords in the reduced 3-class simplex, each coordinate >= margin."""
    rng = np.random.default_rng(seed)
    kept = []
    total = 0
    while total < n_samples:
        centres = rng.dirichlet(np.ones(3), size=2 * n_samples)[:, :2]
        angle = rng.uniform(0.0, 2.0 * np.pi, size=len(centres))
        half = rng.uniform(margin, MAX_HALF_LENGTH, size=len(centres))
        offset = half[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=-1)
        left, right = centres - offset, centres + offset
        inside = np.ones(len(centres), dtype=bool)
        for point in (left, right):
            inside &= np.all(point >= margin, axis=-1) & (point.sum(axis=-1) <= 1.0 - margin)
        kept.append((centres[inside], left[inside], right[inside]))
        total += int(inside.sum())
    centres, left, right = (np.concatenate(parts)[:n_samples] for parts in zip(*kept))
    return centres, left, right


def _composite_report(composite, transform, label, grid_step, n_samples, seed, tol):
    if not isinstance(composite, CompositeLoss):
        raise InvalidInputError(f"expected a CompositeLoss, got {type(composite).__name__}")
    if composite.n == 2:
        v = _prediction_grid(composite, grid_step)
        values = transform(composite.partials(v))
        slacks = midpoint_slacks(values)
        report = GridReport.from_slacks(
            label, NUMERIC, composite.reduced(v), slacks[:, 0], slacks[:, 1], tol,
        )
    elif composite.n == 3:
        centres, left, right = _simplex_chords(n_samples, grid_step, seed)
        slacks = transform(composite.partials(centres)) - 0.5 * (
            transform(composite.partials(left)) + transform(composite.partials(right))
        )
        worst = slacks.min(axis=-1)
        report = GridReport.from_slacks(
            label, NUMERIC, centres[:, 0], worst, worst, tol, sample_points=centres.tolist(),
        )
    else:
        raise InvalidInputError(f"numeric tests cover n = 2 and n = 3, got n={composite.n}")
    logger.debug(report.summary())
    return report


def numeric_exp_concavity(composite, alpha, grid_step=GRID_STEP, n_samples=SEGMENT_SAMPLES, seed=0, tol=MIDPOINT_TOLERANCE):
    """Midpoint concavity of v -> exp(-alpha l_y(v)) for every class y."""
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    return _composite_report(
        composite, lambda losses: exp_transform(losses, alpha),
        f"numeric exp-concavity {composite.name} alpha={alpha:g}", grid_step, n_samples, seed, tol,
    )


def numeric_convexity(composite, grid_step=GRID_STEP, n_samples=SEGMENT_SAMPLES, seed=0, tol=MIDPOINT_TOLERANCE):
    """Midpoint convexity of v -> l_y(v), the alpha -> 0 limit of numeric_exp_concavity."""
    return _composite_report(
        composite, lambda losses: -np.asarray(losses, dtype=float),
        f"numeric convexity {composite.name}", grid_step, n_samples, seed, tol,
    )


def curve_mixability(curve, parameters, label, tol=MIDPOINT_TOLERANCE):
    """Concavity of an exp-transformed loss curve read as z_2 over z_1.

    `curve` holds (N, 2) points E_beta(l(v)) in parameter order. The midpoint of every pair
    must lie under the piecewise-linear curve through the points; slacks are grouped by the
    parameter halfway between the pair.
    """
    curve = np.asarray(curve, dtype=float)
    parameters = np.asarray(parameters, dtype=float)
    order = np.argsort(curve[:, 0], kind="stable")
    z1, z2 = curve[order, 0], curve[order, 1]

    first, second = np.triu_indices(len(z1), k=1)
    mid1 = 0.5 * (z1[first] + z1[second])
    mid2 = 0.5 * (z2[first] + z2[second])
    slack = np.interp(mid1, z1, z2) - mid2

    worst = np.full(len(z1), np.inf)
    np.minimum.at(worst, (first + second) // 2, slack)
    report = GridReport.from_slacks(label, NUMERIC, parameters[order], worst, worst, tol)
    logger.debug(report.summary())
    return report


def numeric_mixability(loss, beta, grid_step=GRID_STEP, tol=MIDPOINT_TOLERANCE):
    """Convexity of E_beta of the super-prediction set, through its exp-transformed boundary curve."""
    if beta <= 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    if isinstance(loss, CompositeLoss):
        loss = loss.base
    loss.require_binary()
    grid = interior_binary_grid(grid_step)
    curve = exp_transform(loss.binary_partials(grid), beta)
    return curve_mixability(curve, grid, f"numeric mixability {loss.name} beta={beta:g}", tol=tol)
