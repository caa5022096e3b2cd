from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from pufe.core.config import parse_key_value_text
from pufe.models.completion import ObservedRow


class OverlapSetting(str, Enum):
    """How the overlap period's old-space rows reach the learner."""
    COMPLETE = "C"
    INCOMPLETE = "I"
    INCOMPLETE_COMPLETED = "IC"

    @classmethod
    def parse(cls, value: str) -> "OverlapSetting":
        aliases = {
            "c": cls.COMPLETE, "complete": cls.COMPLETE,
            "i": cls.INCOMPLETE, "incomplete": cls.INCOMPLETE,
            "ic": cls.INCOMPLETE_COMPLETED, "incomplete_completed": cls.INCOMPLETE_COMPLETED,
        }
        try:
            return aliases[str(value).strip().lower()]
        except KeyError:
            raise ValueError(f"unknown overlap setting {value!r}") from None


class VanishSchedule(str, Enum):
    """Trajectory of the surviving-feature count across the overlap."""
    LINEAR = "linear"
    RANDOM_LIFETIME = "random_lifetime"


class Phase(str, Enum):
    PREVIOUS = "A"
    OVERLAP = "MN"
    CURRENT = "B"


class EvolutionScript(BaseModel):
    """Timeline of one feature-evolvable stream.

    Old feature j is observed in overlap round t iff t < vanish_round[j];
    vanish_round = T1 + 1 means it survives the whole overlap.
    """
    model_config = ConfigDict(frozen=True)

    T1: int = Field(..., ge=1)
    b: int = Field(..., ge=1)
    T2: int = Field(..., ge=1)
    d1: int = Field(..., ge=1)
    d2: int = Field(..., ge=1)
    vanish_round: List[int]
    seed: int = 0
    s_floor: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def check_timeline(self) -> "EvolutionScript":
        if self.b > self.T1:
            raise ValueError(f"b = {self.b} exceeds T1 = {self.T1}")
        if len(self.vanish_round) != self.d1:
            raise ValueError(f"{len(self.vanish_round)} vanish rounds for d1 = {self.d1}")
        first, last = self.T1 - self.b + 1, self.T1 + 1
        if any(not first <= v <= last for v in self.vanish_round):
            raise ValueError(f"vanish rounds must lie in [{first}, {last}]")
        if self.s_floor is not None:
            survivors = sum(1 for v in self.vanish_round if v == last)
            if survivors < self.s_floor:
                raise ValueError(f"only {survivors} features survive, floor is {self.s_floor}")
        return self

    @property
    def overlap_start(self) -> int:
        return self.T1 - self.b + 1

    @property
    def horizon(self) -> int:
        return self.T1 + self.T2

    def phase(self, t: int) -> Phase:
        if t < self.overlap_start:
            return Phase.PREVIOUS
        if t <= self.T1:
            return Phase.OVERLAP
        return Phase.CURRENT

    def observed_indices(self, t: int) -> np.ndarray:
        """Old features still observed at round t (all of them before the overlap)."""
        return np.flatnonzero(np.asarray(self.vanish_round) > t)

    def observed_counts(self) -> List[int]:
        return [int(self.observed_indices(t).size) for t in range(self.overlap_start, self.T1 + 1)]

    def to_text(self) -> str:
        lines = [
            f"T1={self.T1}",
            f"b={self.b}",
            f"T2={self.T2}",
            f"d1={self.d1}",
            f"d2={self.d2}",
            f"seed={self.seed}",
        ]
        if self.s_floor is not None:
            lines.append(f"s_floor={self.s_floor}")
        lines.append("vanish_round=" + ",".join(str(v) for v in self.vanish_round))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EvolutionScript":
        values: Dict[str, object] = dict(parse_key_value_text(text, lower_keys=False))
        rounds = str(values.pop("vanish_round", ""))
        values["vanish_round"] = [int(v) for v in rounds.split(",") if v.strip()]
        return cls(**values)


@dataclass(frozen=True)
class PhasedInstance:
    """One round of the stream; which parts are present depends on the phase."""
    t: int
    label: float
    old_features: Optional[ObservedRow] = None
    new_features: Optional[np.ndarray] = None
    completion_requested: bool = False

    @property
    def phase(self) -> Phase:
        if self.new_features is None:
            return Phase.PREVIOUS
        if self.old_features is None:
            return Phase.CURRENT
        return Phase.OVERLAP
