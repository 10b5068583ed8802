from __future__ import annotations

import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator


class StudyConfig(BaseModel):
    omega_deg: float = Field(270.0, gt=0.0, lt=360.0)
    levels: int = Field(6, ge=1, le=9)
    full_levels: int = Field(7, ge=1, le=9)
    full: bool = False
    h0: float = Field(0.25, gt=0.0, le=math.sqrt(2.0))
    grading_radius: float = Field(0.1, gt=0.0, le=math.sqrt(2.0))
    mu: Optional[float] = Field(None, gt=0.0, le=1.0)
    tol: float = Field(1e-12, gt=0.0, lt=1.0)
    case: Literal["paper", "smooth", "linear", "zero"] = "paper"
    data_exponent: float = Field(-0.4999, gt=-1.0, lt=0.0)
    method: Literal["scm", "standard"] = "scm"
    solver: Literal["cg", "direct"] = "cg"
    quad_depth_scale: float = Field(1.0, ge=1.0)
    alpha_denominator_squared: bool = False
    mesh_dump: Optional[Path] = None

    @model_validator(mode="after")
    def _check_angle(self) -> "StudyConfig":
        if self.method == "scm" and self.omega_deg <= 180.0:
            raise ValueError("method 'scm' needs a reentrant corner (omega_deg in (180, 360))")
        if self.case == "paper" and self.omega_deg <= 180.0:
            raise ValueError("case 'paper' needs a reentrant corner (omega_deg in (180, 360))")
        return self

    @property
    def omega(self) -> float:
        return math.radians(self.omega_deg)

    @property
    def effective_mu(self) -> float:
        if self.mu is not None:
            return self.mu
        return min(1.0, 2.0 * math.pi / self.omega - 1.0)

    @property
    def effective_levels(self) -> int:
        return self.full_levels if self.full else self.levels


class ConvergenceRow(BaseModel):
    level: int
    h_nominal: float
    h_measured: float
    dofs: int
    method: Literal["scm", "standard"]
    error_l2: Optional[float] = None
    eoc: Optional[float] = None
    runtime_ms: float = 0.0
    status: Literal["ok", "failed"] = "ok"
    message: Optional[str] = None


class LevelDiagnostics(BaseModel):
    level: int
    beta_h: Optional[float] = None
    gamma_h: Optional[float] = None
    alpha_h: Optional[float] = None
    delta_h: Optional[float] = None
    ps_norm_sq: Optional[float] = None
    cg_iterations: list[int] = Field(default_factory=list)
    boundary_l2_error: Optional[float] = None
    graded_segments: Optional[int] = None


class StudyReport(BaseModel):
    config: StudyConfig
    rows: list[ConvergenceRow] = Field(default_factory=list)
    diagnostics: list[LevelDiagnostics] = Field(default_factory=list)


class StepEvent(BaseModel):
    step: str
    status: str
    message: str
    detail: Optional[str] = None
    timestamp: str = Field(
        default_factory=lambda: datetime.now(timezone.utc).replace(tzinfo=None).isoformat() + "Z"
    )
