from thumbqc.hpo.config import HPOConfig, ObjectiveName  # noqa: F401
from thumbqc.hpo.hyperband import Bracket, Rung, hyperband_schedule  # noqa: F401
from thumbqc.hpo.objectives import head_size_objective, quadratic_objective  # noqa: F401
from thumbqc.hpo.study import Sampler, StudyLog, StudyState, Trial, TrialStatus, run_study  # noqa: F401
from thumbqc.hpo.tpe import Dimension, Observation, SearchSpace, sample_uniform, tpe_suggest  # noqa: F401
