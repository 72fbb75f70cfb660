"""Probability vectors, the reduced simplex and the beta-exponential operator."""
from itertools import combinations
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from expconcavify.errors import InvalidInputError

SUM_TOLERANCE = 1e-12


class ProbVector(BaseModel):
    model_config = ConfigDict(frozen=True)

    entries: List[float]

    @field_validator("entries")
    @classmethod
    def _check_simplex(cls, entries):
        if len(entries) < 2:
            raise ValueError("a probability vector needs at least 2 classes")
        if any(e < 0.0 or e > 1.0 for e in entries):
            raise ValueError(f"entries must lie in [0, 1], got {entries}")
        if abs(sum(entries) - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"entries must sum to 1, got {sum(entries)!r}")
        return entries

    @property
    def n(self):
        return len(self.entries)

    def as_array(self):
        return np.asarray(self.entries, dtype=float)


class ReducedProb(BaseModel):
    model_config = ConfigDict(frozen=True)

    entries: List[float]

    @field_validator("entries")
    @classmethod
    def _check_reduced(cls, entries):
        if len(entries) < 1:
            raise ValueError("a reduced probability needs at least 1 entry")
        if any(e < 0.0 for e in entries):
            raise ValueError(f"entries must be non-negative, got {entries}")
        if sum(entries) > 1.0 + SUM_TOLERANCE:
            raise ValueError(f"entries must sum to at most 1, got {sum(entries)!r}")
        return entries

    def as_array(self):
        return np.asarray(self.entries, dtype=float)


class LossVector(BaseModel):
    """Partial losses (l_1, ..., l_n); +inf is allowed where a loss is unbounded."""

    model_config = ConfigDict(frozen=True)

    entries: List[float]

    @field_validator("entries")
    @classmethod
    def _check_losses(cls, entries):
        if any(e != e or e < 0.0 for e in entries):
            raise ValueError(f"losses must be non-negative and not NaN, got {entries}")
        return entries

    @property
    def n(self):
        return len(self.entries)

    def as_array(self):
        return np.asarray(self.entries, dtype=float)


def as_prob_array(p):
    """Array view of a ProbVector, a list, or an (..., n) array of probability rows."""
    if isinstance(p, (ProbVector, ReducedProb)):
        return p.as_array()
    return np.asarray(p, dtype=float)


def lift_rows(p_tilde):
    """Append the last coordinate 1 - sum along the final axis of an (..., n-1) array."""
    p_tilde = np.asarray(p_tilde, dtype=float)
    total = p_tilde.sum(axis=-1, keepdims=True)
    if np.any(total > 1.0 + SUM_TOLERANCE):
        raise InvalidInputError(f"reduced probability sums to {float(total.max())!r} > 1")
    last = np.clip(1.0 - total, 0.0, 1.0)
    return np.concatenate([p_tilde, last], axis=-1)


def binary_prob(p_tilde):
    """(..., 2) rows (p_tilde, 1 - p_tilde) for any array of binary reduced probabilities."""
    p_tilde = np.asarray(p_tilde, dtype=float)
    return np.stack([p_tilde, 1.0 - p_tilde], axis=-1)


def project(p):
    entries = as_prob_array(p)
    return ReducedProb(entries=[float(e) for e in entries[:-1]])


def lift(p_tilde):
    entries = as_prob_array(p_tilde)
    total = float(entries.sum())
    if total > 1.0 + SUM_TOLERANCE:
        raise InvalidInputError(f"reduced probability sums to {total!r} > 1")
    last = 1.0 - total
    if -SUM_TOLERANCE < last < 0.0:
        last = 0.0
    elif 1.0 < last < 1.0 + SUM_TOLERANCE:
        last = 1.0
    return ProbVector(entries=[float(e) for e in entries] + [last])


def exp_transform(x, beta):
    if beta <= 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    with np.errstate(over="ignore"):
        return np.exp(-beta * np.asarray(x, dtype=float))


def exp_inverse(z, beta):
    if beta <= 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0.0) or np.any(z > 1.0):
        raise InvalidInputError("exp_inverse needs every coordinate in (0, 1]")
    return -np.log(z) / beta


def barycentric_grid(n, m):
    """All points of the n-simplex whose coordinates are multiples of 1/m, shape (C(m+n-1, n-1), n).

    Rows come in lexicographic order of the integer compositions, so the grid is deterministic.
    """
    if n < 2 or m < 1:
        raise InvalidInputError(f"barycentric grid needs n >= 2 and m >= 1, got n={n}, m={m}")
    rows = []
    for bars in combinations(range(m + n - 1), n - 1):
        counts = []
        previous = -1
        for bar in bars:
            counts.append(bar - previous - 1)
            previous = bar
        counts.append(m + n - 2 - previous)
        rows.append(counts)
    return np.asarray(rows, dtype=float) / m


def interior_binary_grid(step=1e-3, margin=None):
    """The reduced binary grid {margin, margin + step, ..., 1 - margin}."""
    margin = step if margin is None else margin
    count = int(round((1.0 - 2.0 * margin) / step)) + 1
    return np.linspace(margin, 1.0 - margin, count)
