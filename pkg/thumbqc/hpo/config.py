"""HPO run configuration, read from the JSON file given to ``thumbqc hpo``."""

import enum
from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict, Field

from thumbqc.hpo.study import DEFAULT_MAX_TRIALS, Sampler
from thumbqc.hpo.tpe import DEFAULT_GAMMA, DEFAULT_N_CANDIDATES, DEFAULT_N_STARTUP, SearchSpace
from thumbqc.training.config import TrainConfig


class ObjectiveName(str, enum.Enum):
    train = "train"
    quadratic = "quadratic"


class HPOConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    objective: ObjectiveName = ObjectiveName.train
    space: SearchSpace = Field(default_factory=SearchSpace.head_widths)
    max_budget: int = Field(default=27, ge=1, description="Largest budget R, in epochs")
    eta: int = Field(default=3, ge=2)
    max_trials: int = Field(default=DEFAULT_MAX_TRIALS, ge=1)
    seed: int = Field(default=0, ge=0)
    sampler: Sampler = Sampler.tpe
    gamma: float = Field(default=DEFAULT_GAMMA, gt=0, lt=1)
    n_startup: int = Field(default=DEFAULT_N_STARTUP, ge=1)
    n_candidates: int = Field(default=DEFAULT_N_CANDIDATES, ge=1)
    n_workers: int = Field(default=1, ge=1, description="Trials evaluated concurrently within a rung")
    train: TrainConfig = Field(default_factory=TrainConfig, description="Base run for the train objective")
    quadratic_center: Optional[Dict[str, int]] = None
