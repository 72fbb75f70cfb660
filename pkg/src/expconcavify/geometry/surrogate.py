"""The surrogate loss built from supporting hyperplanes of the exp-prediction set.

Hyperplanes have normals d in the cone over Delta_epsilon = {d : d_i >= epsilon sum(d)}.
The loss at p minimizes p'E^{-1}(x) over the set they cut out. That program is solved
through its Lagrangian dual, max over the cone of sum p_i log d_i - s(d), where s is the
support function of the exp-prediction set. s is replaced by the cutting-plane model
max_k d'z_k over known support points z_k, seeded by the grid directions; each round adds
the support point of the current dual iterate until the new cut is violated by less than
CUT_TOLERANCE. The primal point is recovered as x = p / d and the violation of the last
cut bounds the duality gap.
"""
from typing import Any

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict
from scipy.optimize import minimize

from expconcavify.errors import InvalidInputError, SolverError
from expconcavify.geometry.cloud import build_cloud
from expconcavify.losses.simplex import as_prob_array, barycentric_grid, exp_inverse, exp_transform

X_FLOOR = 1e-12
NORMAL_FLOOR = 1e-12
DUALITY_GAP = 1e-7
CUT_TOLERANCE = 1e-9
MAX_ROUNDS = 200
GRID_SHARE_SLACK = 1e-12


class SurrogateModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    loss: Any
    beta: float
    epsilon: float
    m: int
    cloud: Any
    directions: Any
    support_points: Any
    duality_gap: float = DUALITY_GAP
    max_iterations: int = MAX_ROUNDS

    @property
    def loss_name(self):
        return self.loss.name

    @property
    def n(self):
        return self.directions.shape[1]

    @property
    def gammas(self):
        """-max_z d'z for every stored direction d."""
        return -np.einsum("ij,ij->i", self.directions, self.support_points)

    @property
    def effective_epsilon(self):
        """Smallest coordinate among the stored directions; the grid resolves S_epsilon from here up."""
        return float(self.directions.min())


def _refine_support(loss, beta, direction, start):
    """Maximize d'E_beta(l(q)) over the simplex from a cloud point; returns (value, point) or None."""
    n = len(direction)

    def point(reduced):
        q = np.clip(np.append(reduced, 1.0 - reduced.sum()), 0.0, 1.0)
        return exp_transform(loss.partials(q), beta)

    result = minimize(
        lambda r: -float(point(r) @ direction), start[:-1], method="SLSQP",
        bounds=[(0.0, 1.0)] * (n - 1),
        constraints=[{"type": "ineq", "fun": lambda r: 1.0 - r.sum()}],
        options={"ftol": 1e-14, "maxiter": 500},
    )
    if not result.success:
        logger.debug(f"support refinement of {loss.name} along {np.round(direction, 6).tolist()} failed: {result.message}")
        return None
    return -float(result.fun), point(result.x)


def _support(loss, beta, cloud, direction):
    """Support value and point of the exp-prediction set along a nonnegative direction."""
    values = cloud.points @ direction
    best = int(values.argmax())
    value, z = float(values[best]), cloud.points[best]
    refined = _refine_support(loss, beta, direction, cloud.probabilities[best])
    if refined is not None and refined[0] > value:
        value, z = refined
    return value, z


def build_surrogate(loss, beta, epsilon, m, cloud_m=None):
    n = loss.n
    if not 0.0 < epsilon < 1.0 / n:
        raise InvalidInputError(f"epsilon must lie in (0, 1/{n}), got {epsilon}")
    if beta <= 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    if loss.known_mixability is not None and beta > loss.known_mixability + 1e-9:
        raise InvalidInputError(f"beta={beta:g} exceeds the mixability constant {loss.known_mixability:g} of {loss.name}")

    grid = barycentric_grid(n, m)
    directions = grid[grid.min(axis=1) > epsilon + GRID_SHARE_SLACK]
    if len(directions) == 0:
        raise InvalidInputError(f"no grid direction at resolution m={m} has every coordinate above {epsilon}")

    cloud = build_cloud(loss, beta, cloud_m or m)
    support_points = np.array([_support(loss, beta, cloud, d)[1] for d in directions])
    logger.info(f"surrogate {loss.name} beta={beta:g} epsilon={epsilon:g}: {len(directions)} hyperplanes")
    return SurrogateModel(
        loss=loss, beta=float(beta), epsilon=float(epsilon), m=m, cloud=cloud,
        directions=directions, support_points=support_points,
    )


def _solve_master(p, epsilon, points, start):
    """max sum p log(d + mu) - tau - sum mu with tau >= points @ d and d in the epsilon cone.

    mu carries the box x <= 1. Variables are stacked as (d, mu, tau).
    """
    n = len(p)
    cone = np.eye(n) - epsilon

    def objective(v):
        return -float(p @ np.log(v[:n] + v[n:2 * n])) + v[-1] + v[n:2 * n].sum()

    def gradient(v):
        share = p / (v[:n] + v[n:2 * n])
        return np.concatenate([-share, 1.0 - share, [1.0]])

    support_jac = np.hstack([-points, np.zeros_like(points), np.ones((len(points), 1))])
    cone_jac = np.hstack([cone, np.zeros((n, n + 1))])
    return minimize(
        objective, start, jac=gradient, method="SLSQP",
        bounds=[(NORMAL_FLOOR, None)] * n + [(0.0, None)] * n + [(None, None)],
        constraints=[
            {"type": "ineq", "fun": lambda v: v[-1] - points @ v[:n], "jac": lambda v: support_jac},
            {"type": "ineq", "fun": lambda v: cone @ v[:n], "jac": lambda v: cone_jac},
        ],
        options={"ftol": 1e-12, "maxiter": 1000},
    )


def surrogate_loss(model, p):
    p = as_prob_array(p)
    if p.shape[-1] != model.n:
        raise InvalidInputError(f"p has {p.shape[-1]} classes, the model has {model.n}")
    if np.any(p <= 0.0):
        raise InvalidInputError("surrogate_loss needs p in the interior of the simplex")

    n = model.n
    points = np.asarray(model.support_points, dtype=float)
    d = np.full(n, 1.0 / float(np.max(points.sum(axis=1))))
    v = np.concatenate([d, np.zeros(n), [float(np.max(points @ d))]])
    violation = np.inf
    for rounds in range(1, model.max_iterations + 1):
        result = _solve_master(p, model.epsilon, points, v)
        if not result.success:
            raise SolverError(f"surrogate program failed at p={p.tolist()}: {result.message}")
        v = result.x
        d = v[:n]
        value, z = _support(model.loss, model.beta, model.cloud, d)
        violation = value - float(np.max(points @ d))
        if violation <= CUT_TOLERANCE:
            break
        points = np.vstack([points, z])
        v = np.concatenate([v[:-1], [value]])

    gap = max(violation, 0.0) / model.beta
    if gap > model.duality_gap:
        raise SolverError(
            f"surrogate duality gap {gap:.3g} exceeds {model.duality_gap:g} after {rounds} rounds at p={p.tolist()}"
        )
    logger.debug(f"surrogate at p={np.round(p, 6).tolist()}: {rounds} rounds, {len(points) - len(model.directions)} cuts, gap {gap:.3g}")
    x = np.clip(p / (d + v[n:2 * n]), X_FLOOR, 1.0)
    return exp_inverse(x, model.beta)


def in_S_epsilon(loss, beta, epsilon, p):
    """Whether d = p * exp(beta l(p)) has every normalized share above epsilon."""
    p = as_prob_array(p)
    if np.any(p <= 0.0):
        raise InvalidInputError("in_S_epsilon needs p in the interior of the simplex")
    d = p * np.exp(beta * loss.partials(p))
    return bool(np.min(d / d.sum()) > epsilon)
