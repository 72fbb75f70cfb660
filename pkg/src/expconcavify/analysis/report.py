import math
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict


class GridReport(BaseModel):
    """Per-point slacks of a grid check; a slack >= 0 means the inequality holds there."""

    model_config = ConfigDict(frozen=True)

    label: str
    kind: str
    grid_points: List[float]
    slack_lower: List[float]
    slack_upper: List[float]
    tolerance: float
    verdict: bool
    witness: Optional[float] = None
    scale: Optional[float] = None
    reconstruction_ok: Optional[bool] = None
    reconstruction_error: Optional[float] = None
    sample_points: Optional[List[List[float]]] = None
    diagnostics: List[str] = []

    @classmethod
    def from_slacks(cls, label, kind, grid, lower, upper, tolerance, **extra):
        grid = np.asarray(grid, dtype=float)
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        worst = np.minimum(lower, upper)
        # NaN slack means the evaluator failed at that point
        failing = np.isnan(worst) | (worst < -tolerance)
        witness = float(grid[np.argmax(failing)]) if failing.any() else None
        diagnostics = list(extra.pop("diagnostics", []))
        if np.isnan(worst).any():
            diagnostics.append(f"{int(np.isnan(worst).sum())} grid points failed to evaluate")
        verdict = (not failing.any()) and extra.get("reconstruction_ok", True) is not False
        return cls(
            label=label,
            kind=kind,
            grid_points=grid.tolist(),
            slack_lower=lower.tolist(),
            slack_upper=upper.tolist(),
            tolerance=tolerance,
            verdict=bool(verdict),
            witness=witness,
            diagnostics=diagnostics,
            **extra,
        )

    @property
    def slack(self):
        return np.minimum(np.asarray(self.slack_lower), np.asarray(self.slack_upper))

    @property
    def min_slack(self):
        finite = self.slack[~np.isnan(self.slack)]
        return float(finite.min()) if finite.size else math.nan

    def to_frame(self):
        return pd.DataFrame({
            "p_tilde": self.grid_points,
            "slack_lower": self.slack_lower,
            "slack_upper": self.slack_upper,
        })

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)
        return path

    def summary(self):
        status = "holds" if self.verdict else f"fails (witness {self.witness})"
        return f"{self.label} [{self.kind}]: {status}, min slack {self.min_slack:.3g}"
