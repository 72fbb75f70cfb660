from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class SweepCell(BaseModel):
    model_config = ConfigDict(frozen=True)

    order: int  # position in the sweep grid
    eta: float = Field(gt=0.0)
    p: float = Field(ge=0.0, le=1.0)
    setting: int = Field(ge=1, le=3)
    substitution: str
    T: int = Field(default=100, ge=0)
    seed: int

    @property
    def title(self):
        return f"{self.substitution} eta {self.eta:g} p {self.p:g} setting {self.setting}"


class ManifestRow(BaseModel):
    order: int
    eta: float
    p: float
    setting: int
    substitution: str
    N: int
    T: int
    seed: int
    path: str = ""
    cumulative_loss: float = 0.0
    final_regret: float = 0.0
    bound: float = 0.0
    bound_ok: bool = False
    status: str = "ok"
    error: Optional[str] = None
