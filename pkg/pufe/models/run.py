from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from pufe.core.utils import split_csv_list
from pufe.models.learning import LossKind
from pufe.models.stream import OverlapSetting, VanishSchedule

EXPERT_IDS = ("rogd_u", "rogd_f", "nogd", "fesl_c", "fesl_s")
DEFAULT_C_GRID = [0.5, 1.0, 10.0, 20.0, 50.0, 70.0, 100.0]


def _as_list(value):
    if isinstance(value, Enum):
        return [value]
    if isinstance(value, str):
        return split_csv_list(value)
    return list(value)


class TaskKind(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"

    @property
    def loss_kind(self) -> LossKind:
        return LossKind.LOGISTIC if self is TaskKind.CLASSIFICATION else LossKind.SQUARE

    @property
    def higher_is_better(self) -> bool:
        """Accuracy for classification, MSE for regression."""
        return self is TaskKind.CLASSIFICATION


class MethodKind(str, Enum):
    NOGD = "NOGD"
    ROGD_F = "ROGD_f"
    ROGD_U = "ROGD_u"
    FESL_C = "FESL_c"
    FESL_S = "FESL_s"
    PUFE = "PUFE"

    @classmethod
    def parse(cls, value: str) -> "MethodKind":
        key = str(value).strip().replace("-", "_").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown method {value!r}")

    @property
    def needs_mapper(self) -> bool:
        return self is not MethodKind.NOGD


class RunConfig(BaseModel):
    """Experiment configuration, read from a key=value file and CLI flags."""

    dataset: str = Field("synthetic-lowrank", description="synthetic-lowrank, synthetic-sensor or a file path")
    dataset_format: str = Field("auto", description="auto, sparse_index_value or dense_csv")
    task: TaskKind = TaskKind.CLASSIFICATION
    settings: List[OverlapSetting] = Field(
        default_factory=lambda: [
            OverlapSetting.COMPLETE,
            OverlapSetting.INCOMPLETE,
            OverlapSetting.INCOMPLETE_COMPLETED,
        ]
    )
    methods: List[MethodKind] = Field(default_factory=lambda: list(MethodKind))

    # Stream geometry
    b: int = Field(20, ge=1, description="Overlap length")
    T1: Optional[int] = Field(None, ge=1, description="Last round of the previous space; default n/2")
    T2: Optional[int] = Field(None, ge=1, description="Rounds in the current space; default n - T1")
    d2: Optional[int] = Field(None, ge=1, description="Current-space dimension; default d1")
    s_floor: Optional[int] = Field(None, ge=1, description="Old features surviving the whole overlap")
    s_floor_fraction: float = Field(0.3, gt=0.0, le=1.0)
    vanish_schedule: VanishSchedule = VanishSchedule.LINEAR
    map_noise: float = Field(0.0, ge=0.0, description="Std of noise added after the Gaussian map")

    # Completion
    rank: Optional[int] = Field(None, ge=1, description="Row-space rank; estimated when unset")
    delta: float = Field(0.1, gt=0.0, lt=1.0)
    sample_constant: float = Field(7.0, gt=0.0)
    min_entries: Optional[int] = Field(None, ge=1)

    # Learners
    step_scale: float = Field(1.0, gt=0.0, description="Step-size scale c when grid search is off")
    c_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_C_GRID))
    grid_search: bool = True
    radius: float = Field(10.0, gt=0.0)
    init_scale: float = Field(0.01, ge=0.0)
    loss_cap: Optional[float] = Field(None, gt=0.0)
    fesl_eta: Optional[float] = Field(None, ge=0.0)
    pufe_roster: List[str] = Field(default_factory=lambda: ["rogd_u", "rogd_f", "nogd"])

    # Protocol
    trials: int = Field(10, ge=1)
    seed: int = 0
    synthetic_n: int = Field(2000, ge=4)
    synthetic_d: int = Field(30, ge=1)
    synthetic_rank: int = Field(3, ge=1)
    label_noise: float = Field(0.05, ge=0.0, le=0.5)

    @field_validator("settings", mode="before")
    @classmethod
    def parse_settings(cls, v):
        return [s if isinstance(s, OverlapSetting) else OverlapSetting.parse(s) for s in _as_list(v)]

    @field_validator("methods", mode="before")
    @classmethod
    def parse_methods(cls, v):
        return [m if isinstance(m, MethodKind) else MethodKind.parse(m) for m in _as_list(v)]

    @field_validator("c_grid", "pufe_roster", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _as_list(v)

    @field_validator("settings", "methods", "c_grid")
    @classmethod
    def nonempty(cls, v):
        if not v:
            raise ValueError("must not be empty")
        if len(set(v)) != len(v):
            raise ValueError("must not contain duplicates")
        return v

    @field_validator("c_grid")
    @classmethod
    def positive_grid(cls, v):
        if any(c <= 0 for c in v):
            raise ValueError("grid values must be positive")
        return v

    @field_validator("pufe_roster")
    @classmethod
    def known_experts(cls, v):
        roster = [str(e).strip().lower().replace("-", "_") for e in v]
        unknown = [e for e in roster if e not in EXPERT_IDS]
        if unknown:
            raise ValueError(f"unknown experts {unknown}; choose from {list(EXPERT_IDS)}")
        if not roster or len(set(roster)) != len(roster):
            raise ValueError("roster must be nonempty without duplicates")
        return roster

    @property
    def step_grid(self) -> List[float]:
        return list(self.c_grid) if self.grid_search else [self.step_scale]


@dataclass
class MethodOutcome:
    """One method on one (setting, trial): phase-B losses and the final metric."""
    method: MethodKind
    setting: OverlapSetting
    trial: int
    c: float
    losses: np.ndarray
    metric: float


@dataclass
class AlphaTrace:
    """PUFE weights per phase-B round; row k is round first_round + k.

    When present, ``expert_unit`` and ``bounds`` share the shape of ``alphas``
    and ``combined_unit`` holds PUFE's own unit loss per round.
    """
    setting: OverlapSetting
    trial: int
    expert_ids: List[str]
    alphas: np.ndarray
    first_round: int
    expert_unit: Optional[np.ndarray] = None
    combined_unit: Optional[np.ndarray] = None
    bounds: Optional[np.ndarray] = None


@dataclass
class DominanceTrace:
    """Cumulative unit losses of PUFE and its experts plus the regret bound per round.

    ``bounds[k, i]`` is the bound against a point mass on expert i after round k;
    ``weighted`` is the cumulative alpha-weighted expert loss, kept for comparison.
    """
    setting: OverlapSetting
    trial: int
    expert_ids: List[str]
    combined: np.ndarray
    experts: np.ndarray
    bounds: np.ndarray
    weighted: Optional[np.ndarray] = None

    def violations(self, tolerance: float = 1e-9) -> List[int]:
        """Row offsets where PUFE exceeds some expert by more than its bound."""
        excess = self.combined[:, None] - (self.experts + self.bounds)
        return [int(k) for k in np.flatnonzero(np.any(excess > tolerance, axis=1))]


@dataclass
class RunReport:
    task: TaskKind
    T1: int
    T2: int
    outcomes: List[MethodOutcome] = field(default_factory=list)
    alpha_traces: List[AlphaTrace] = field(default_factory=list)
    dominance_traces: List[DominanceTrace] = field(default_factory=list)
    completed_trials: int = 0
