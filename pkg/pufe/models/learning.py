from enum import Enum

from pydantic import BaseModel, ConfigDict, Field


class LossKind(str, Enum):
    """Loss used by every online model in a run."""
    LOGISTIC = "logistic"
    SQUARE = "square"


class StepMode(str, Enum):
    INVERSE_SQRT_GLOBAL = "inverse_sqrt_global"
    INVERSE_SQRT_PHASE = "inverse_sqrt_phase"


class StepSchedule(BaseModel):
    """tau_t = 1 / (c sqrt(t)), or 1 / (c sqrt(t - phase_start)) in phase mode."""
    model_config = ConfigDict(frozen=True)

    scale: float = Field(1.0, gt=0.0, description="Step-size scale c")
    mode: StepMode = StepMode.INVERSE_SQRT_GLOBAL
