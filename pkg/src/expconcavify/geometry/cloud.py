"""Exp-prediction clouds E_beta(l(p)) over barycentric grids and midpoint ray tests along 1_n.

A ray c + r 1_n keeps its projection J c fixed, where J z = z[:-1] - z[-1]. The ray meets
the exp-prediction surface exactly where the surface has the same projection, so a midpoint
is tested by interpolating the surface at J c (piecewise linearly over the grid) and
reading off the travel r = mean(z* - c). A midpoint escapes when no surface point shares
its projection, or when the surface point lies behind it.
"""
from itertools import combinations
from typing import Any, List, Optional

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict

from expconcavify.errors import InvalidInputError
from expconcavify.losses.simplex import as_prob_array, barycentric_grid, exp_transform

MIN_RESOLUTION = 10
RAY_STEP = 1e-4
DOMINANCE_TOLERANCE = 1e-3
PAIR_CHUNK = 256
EXHAUSTIVE_PAIR_LIMIT = 40_000


class ExpPredictionCloud(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    loss_name: str
    beta: float
    m: int
    probabilities: Any
    points: Any

    @property
    def n(self):
        return self.probabilities.shape[1]

    @property
    def projections(self):
        return self.points[:, :-1] - self.points[:, -1:]

    def to_frame(self):
        columns = {f"p_{i + 1}": self.probabilities[:, i] for i in range(self.n)}
        columns.update({f"z_{i + 1}": self.points[:, i] for i in range(self.n)})
        return pd.DataFrame(columns)


class RayWitness(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: List[float]
    b: List[float]
    c: List[float]
    escape: bool
    max_travel: float
    travel: Optional[float] = None

    def to_row(self):
        return {"a": " ".join(f"{x:.12g}" for x in self.a), "b": " ".join(f"{x:.12g}" for x in self.b),
                "c": " ".join(f"{x:.12g}" for x in self.c), "escape": self.escape}


def build_cloud(loss, beta, m):
    if m < MIN_RESOLUTION:
        raise InvalidInputError(f"cloud resolution m must be at least {MIN_RESOLUTION}, got {m}")
    if beta <= 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    probabilities = barycentric_grid(loss.n, m)
    # infinite partial losses land on z_i = 0
    points = exp_transform(loss.partials(probabilities), beta)
    logger.debug(f"cloud {loss.name} beta={beta:g} m={m}: {len(points)} points")
    return ExpPredictionCloud(loss_name=loss.name, beta=float(beta), m=m, probabilities=probabilities, points=points)


def gamma_p(cloud, p):
    """Support value -max_z p'z of the cloud in direction p."""
    p = as_prob_array(p)
    if p.shape[-1] != cloud.n:
        raise InvalidInputError(f"p has {p.shape[-1]} classes, the cloud has {cloud.n}")
    return float(-np.max(cloud.points @ p))


def _triangles(m):
    """Vertex index triples of the up and down triangles of the 3-class barycentric grid."""
    index = {}
    for row, counts in enumerate(np.rint(barycentric_grid(3, m) * m).astype(int)):
        index[(counts[0], counts[1])] = row
    triangles = []
    for i in range(m):
        for j in range(m - i):
            triangles.append((index[(i, j)], index[(i + 1, j)], index[(i, j + 1)]))
            if i + j <= m - 2:
                triangles.append((index[(i + 1, j)], index[(i, j + 1)], index[(i + 1, j + 1)]))
    return np.asarray(triangles)


class _Surface:
    """Piecewise-linear exp-prediction surface indexed by its projection."""

    def __init__(self, cloud, tolerance):
        self.cloud = cloud
        self.tolerance = tolerance
        projected = cloud.projections
        if cloud.n == 2:
            order = np.argsort(projected[:, 0], kind="stable")
            self.keys = projected[order, 0]
            self.values = cloud.points[order]
            if np.any(np.diff(self.keys) < 0.0):
                logger.warning("cloud projection is not monotone; beta may exceed the mixability constant")
        elif cloud.n == 3:
            self.triangles = _triangles(cloud.m)
            corners = projected[self.triangles]
            self.origin = corners[:, 0]
            edges = np.stack([corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]], axis=-1)
            determinant = np.linalg.det(edges)
            self.valid = np.abs(determinant) > 1e-15
            safe = np.where(self.valid[:, None, None], edges, np.eye(2))
            self.inverse = np.linalg.inv(safe)
        else:
            raise InvalidInputError(f"ray tests cover n = 2 and n = 3, got n={cloud.n}")

    def travel(self, midpoints):
        """Largest r with c + r 1_n on the surface; NaN where the projection misses the surface."""
        key = midpoints[:, :-1] - midpoints[:, -1:]
        if self.cloud.n == 2:
            inside = (key[:, 0] >= self.keys[0] - 1e-12) & (key[:, 0] <= self.keys[-1] + 1e-12)
            surface = np.stack([np.interp(key[:, 0], self.keys, self.values[:, i]) for i in range(2)], axis=-1)
            return np.where(inside, np.mean(surface - midpoints, axis=-1), np.nan)

        travel = np.full(len(midpoints), np.nan)
        for start in range(0, len(midpoints), PAIR_CHUNK):
            block = slice(start, start + PAIR_CHUNK)
            local = np.einsum("tij,qtj->qti", self.inverse, key[block, None, :] - self.origin[None])
            weights = np.concatenate([1.0 - local.sum(axis=-1, keepdims=True), local], axis=-1)
            inside = np.all(weights >= -1e-9, axis=-1) & self.valid[None]
            surface = np.einsum("qtk,tkn->qtn", weights, self.cloud.points[self.triangles])
            reach = np.where(inside, np.mean(surface - midpoints[block, None, :], axis=-1), -np.inf)
            best = reach.max(axis=-1)
            travel[block] = np.where(np.isfinite(best), best, np.nan)
        return travel


def _max_travel(c):
    room = float(np.min(1.0 - c))
    return float(np.floor(room / RAY_STEP + 1e-9) * RAY_STEP)


def _scan(cloud, pairs, tolerance):
    surface = _Surface(cloud, tolerance)
    for start in range(0, len(pairs), PAIR_CHUNK * 8):
        chunk = pairs[start:start + PAIR_CHUNK * 8]
        a = cloud.points[chunk[:, 0]]
        b = cloud.points[chunk[:, 1]]
        c = 0.5 * (a + b)
        travel = surface.travel(c)
        escaped = np.isnan(travel) | (travel < -tolerance)
        if escaped.any():
            k = int(np.argmax(escaped))
            found = None if np.isnan(travel[k]) else float(travel[k])
            return RayWitness(a=a[k].tolist(), b=b[k].tolist(), c=c[k].tolist(), escape=True,
                              max_travel=_max_travel(c[k]), travel=found)
    return None


def _all_pairs(count):
    return np.asarray(list(combinations(range(count), 2)), dtype=int).reshape(-1, 2)


def _sampled_pairs(count, n_pairs, seed):
    rng = np.random.default_rng(seed)
    first = rng.integers(0, count, size=n_pairs)
    second = rng.integers(0, count, size=n_pairs)
    keep = first != second
    return np.stack([first[keep], second[keep]], axis=-1)


def check_prop1_condition(cloud, tolerance=DOMINANCE_TOLERANCE, n_pairs=None, seed=0):
    """Whether every midpoint of two cloud points reaches the surface along +1_n.

    Small clouds are scanned over all pairs; larger ones, or an explicit n_pairs, over a
    seeded sample. Returns (holds, witness).
    """
    count = len(cloud.points)
    if n_pairs is None and count * (count - 1) // 2 <= EXHAUSTIVE_PAIR_LIMIT:
        pairs = _all_pairs(count)
    else:
        pairs = _sampled_pairs(count, n_pairs or EXHAUSTIVE_PAIR_LIMIT, seed)
    witness = _scan(cloud, pairs, tolerance)
    if witness is not None:
        logger.info(f"{cloud.loss_name} beta={cloud.beta:g}: midpoint {witness.c} escapes along 1_n")
    return witness is None, witness


def ray_escape_witness(cloud, n_pairs=EXHAUSTIVE_PAIR_LIMIT, seed=0, tolerance=DOMINANCE_TOLERANCE):
    """Seeded random search for a midpoint whose ray leaves the unit cube without meeting the surface."""
    count = len(cloud.points)
    vertices = [int(i) for i in np.flatnonzero(np.isclose(cloud.probabilities.max(axis=1), 1.0))]
    # vertex pairs first: their midpoints sit furthest from the surface
    pairs = np.concatenate([
        np.asarray(list(combinations(vertices, 2)), dtype=int).reshape(-1, 2),
        _sampled_pairs(count, n_pairs, seed),
    ])
    return _scan(cloud, pairs, tolerance)
