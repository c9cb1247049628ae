"""
Hyperparameter Study

Runs Hyperband brackets whose fresh configurations come from a sampler (TPE
by default, uniform random for baselines). Brackets are issued in the order
s_max..0 and repeated until ``max_trials`` trials exist; a bracket truncated
by ``max_trials`` simply starts fewer configurations.

Trial lifecycle:

    running  -> evaluated at each rung of its bracket
    pruned   -> dropped by successive halving before the bracket's last rung
    complete -> evaluated at the last rung it reaches (budget R, or the rung
                after which floor(n / eta) = 0)
    failed   -> the objective raised or returned a non-finite value

Every trial update is appended to a JSONL log. Replaying a study with
``resume=True`` reuses the logged evaluations instead of calling the
objective, so a killed study continues where it stopped.
"""

import enum
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from thumbqc.core.errors import InvalidInputError, StudyResumeError
from thumbqc.hpo.hyperband import Bracket, hyperband_schedule, survivors
from thumbqc.hpo.tpe import (
    DEFAULT_GAMMA,
    DEFAULT_N_CANDIDATES,
    DEFAULT_N_STARTUP,
    Observation,
    Point,
    SearchSpace,
    sample_uniform,
    tpe_suggest,
)

logger = logging.getLogger(__name__)

Objective = Callable[[Point, float], float]
DEFAULT_MAX_TRIALS = 256


class TrialStatus(str, enum.Enum):
    running = "running"
    pruned = "pruned"
    complete = "complete"
    failed = "failed"


class Sampler(str, enum.Enum):
    tpe = "tpe"
    random = "random"


@dataclass
class Trial:
    trial_id: int
    point: Point
    bracket: int
    values: List[Tuple[float, float]] = field(default_factory=list)
    status: TrialStatus = TrialStatus.running
    error: Optional[str] = None

    @property
    def final_value(self) -> Optional[float]:
        return self.values[-1][1] if self.values else None

    @property
    def final_budget(self) -> Optional[float]:
        return self.values[-1][0] if self.values else None


@dataclass
class StudyState:
    seed: int
    max_trials: int
    trials: List[Trial] = field(default_factory=list)

    @property
    def best_trial(self) -> Optional[Trial]:
        """Complete trial with the highest final value; lowest id wins ties."""
        best: Optional[Trial] = None
        for trial in self.trials:
            if trial.status is not TrialStatus.complete:
                continue
            if best is None or trial.final_value > best.final_value:  # type: ignore[operator]
                best = trial
        return best

    def status_counts(self) -> Dict[TrialStatus, int]:
        counts = {status: 0 for status in TrialStatus}
        for trial in self.trials:
            counts[trial.status] += 1
        return counts

    def observations(self, budget: float) -> List[Observation]:
        return [
            Observation(point=t.point, value=v)
            for t in self.trials
            for b, v in t.values
            if b == budget
        ]


class StudyLog:
    """Append-only JSONL trial log with replay of a previous run."""

    def __init__(self, path: Optional[Union[str, Path]] = None, resume: bool = False):
        self.path = Path(path) if path is not None else None
        self.points: Dict[int, Point] = {}
        self.evaluations: Dict[Tuple[int, float], Dict[str, Any]] = {}
        self.statuses: set = set()
        if self.path is None:
            return
        if resume and self.path.exists():
            self._load()
            logger.info(
                "Resuming study from %s: %d trials, %d evaluations logged",
                self.path, len(self.points), len(self.evaluations),
            )
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def _load(self) -> None:
        assert self.path is not None
        valid: List[str] = []
        for n, line in enumerate(self.path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                # a study killed mid-write leaves a torn last line
                logger.warning("Ignoring unreadable line %d of %s", n, self.path)
                continue
            valid.append(line)
            event = record.get("event")
            if event == "trial":
                self.points[int(record["trial_id"])] = {k: int(v) for k, v in record["point"].items()}
            elif event == "evaluation":
                self.evaluations[(int(record["trial_id"]), float(record["budget"]))] = record
            elif event == "status":
                self.statuses.add((int(record["trial_id"]), record["status"]))
        self.path.write_text("".join(line + "\n" for line in valid))

    def _append(self, record: Dict[str, Any]) -> None:
        if self.path is None:
            return
        with self.path.open("a") as fh:
            fh.write(json.dumps(record) + "\n")

    def trial(self, trial: Trial) -> None:
        logged = self.points.get(trial.trial_id)
        if logged is not None:
            if logged != trial.point:
                raise StudyResumeError(
                    f"trial {trial.trial_id} was logged at {logged} but the replay suggests {trial.point}",
                    action="Resume with the same seed, space and sampler, or start a new log",
                )
            return
        self.points[trial.trial_id] = dict(trial.point)
        self._append({"event": "trial", "trial_id": trial.trial_id, "bracket": trial.bracket, "point": trial.point})

    def logged_evaluation(self, trial: Trial, budget: float) -> Optional[Dict[str, Any]]:
        return self.evaluations.get((trial.trial_id, budget))

    def evaluation(self, trial: Trial, budget: float, value: Optional[float], error: Optional[str]) -> None:
        key = (trial.trial_id, budget)
        if key in self.evaluations:
            return
        record = {"event": "evaluation", "trial_id": trial.trial_id, "budget": budget, "value": value, "error": error}
        self.evaluations[key] = record
        self._append(record)

    def status(self, trial: Trial) -> None:
        key = (trial.trial_id, trial.status.value)
        if key in self.statuses:
            return
        self.statuses.add(key)
        self._append({"event": "status", "trial_id": trial.trial_id, "status": trial.status.value})


def _call(objective: Objective, point: Point, budget: float) -> Tuple[Optional[float], Optional[str]]:
    try:
        value = float(objective(point, budget))
    except Exception as e:  # noqa: BLE001
        return None, f"{type(e).__name__}: {e}"
    if not math.isfinite(value):
        return None, f"objective returned {value}"
    return value, None


class _StudyRunner:
    def __init__(
        self,
        space: SearchSpace,
        objective: Objective,
        seed: int,
        max_trials: int,
        eta: int,
        sampler: Sampler,
        gamma: float,
        n_startup: int,
        n_candidates: int,
        n_workers: int,
        log: StudyLog,
    ):
        self.space = space
        self.objective = objective
        self.eta = eta
        self.sampler = sampler
        self.gamma = gamma
        self.n_startup = n_startup
        self.n_candidates = n_candidates
        self.n_workers = n_workers
        self.log = log
        self.rng = np.random.default_rng(seed)
        self.state = StudyState(seed=seed, max_trials=max_trials)

    def history(self) -> List[Observation]:
        """Observations at the largest budget with at least ``n_startup`` of them."""
        budgets = sorted({b for t in self.state.trials for b, _ in t.values}, reverse=True)
        for budget in budgets:
            observed = self.state.observations(budget)
            if len(observed) >= self.n_startup:
                return observed
        return []

    def suggest(self) -> Point:
        if self.sampler is Sampler.random:
            return sample_uniform(self.space, self.rng)
        return tpe_suggest(
            self.history(), self.space, self.rng,
            gamma=self.gamma, n_candidates=self.n_candidates, n_startup=self.n_startup,
        )

    def evaluate(self, trials: Sequence[Trial], budget: float) -> None:
        pending = [t for t in trials if self.log.logged_evaluation(t, budget) is None]
        if self.n_workers > 1 and len(pending) > 1:
            with ThreadPoolExecutor(max_workers=self.n_workers) as pool:
                fresh = list(pool.map(lambda t: _call(self.objective, t.point, budget), pending))
        else:
            fresh = [_call(self.objective, t.point, budget) for t in pending]
        computed = {t.trial_id: result for t, result in zip(pending, fresh)}

        for trial in trials:
            if trial.trial_id in computed:
                value, error = computed[trial.trial_id]
                self.log.evaluation(trial, budget, value, error)
            else:
                logged = self.log.logged_evaluation(trial, budget)
                value, error = logged["value"], logged["error"]  # type: ignore[index]
            if error is not None:
                trial.status = TrialStatus.failed
                trial.error = error
                logger.warning("Trial %d failed at budget %g: %s", trial.trial_id, budget, error)
                self.log.status(trial)
            else:
                trial.values.append((budget, float(value)))

    def run_bracket(self, bracket: Bracket) -> None:
        n = min(bracket.n_configs, self.state.max_trials - len(self.state.trials))
        active: List[Trial] = []
        for _ in range(n):
            trial = Trial(trial_id=len(self.state.trials), point=self.suggest(), bracket=bracket.s)
            self.state.trials.append(trial)
            self.log.trial(trial)
            active.append(trial)

        for i, rung in enumerate(bracket.rungs):
            self.evaluate(active, rung.budget)
            active = [t for t in active if t.status is TrialStatus.running]
            keep = survivors(len(active), self.eta)
            if i == len(bracket.rungs) - 1 or keep == 0:
                for trial in active:
                    trial.status = TrialStatus.complete
                    self.log.status(trial)
                return
            ranked = sorted(active, key=lambda t: (-t.final_value, t.trial_id))  # type: ignore[operator]
            for trial in ranked[keep:]:
                trial.status = TrialStatus.pruned
                self.log.status(trial)
            active = sorted(ranked[:keep], key=lambda t: t.trial_id)
            logger.info(
                "Bracket %d rung %d (budget %g): %d promoted to budget %g",
                bracket.s, i, rung.budget, keep, bracket.rungs[i + 1].budget,
            )


def run_study(
    space: SearchSpace,
    objective: Objective,
    max_budget: int = 27,
    eta: int = 3,
    seed: int = 0,
    max_trials: int = DEFAULT_MAX_TRIALS,
    sampler: Union[Sampler, str] = Sampler.tpe,
    gamma: float = DEFAULT_GAMMA,
    n_startup: int = DEFAULT_N_STARTUP,
    n_candidates: int = DEFAULT_N_CANDIDATES,
    n_workers: int = 1,
    log_path: Optional[Union[str, Path]] = None,
    resume: bool = False,
) -> StudyState:
    """
    Maximise ``objective(point, budget)`` over ``space``.

    Deterministic for a given seed and a deterministic objective, whatever
    ``n_workers`` is. Objective failures mark the trial failed and the study
    goes on.
    """
    if max_trials < 1:
        raise InvalidInputError(f"max_trials must be >= 1, got {max_trials}")
    if not space.dimensions:
        raise InvalidInputError("search space has no dimensions")
    schedule = hyperband_schedule(max_budget, eta)
    runner = _StudyRunner(
        space, objective, seed, max_trials, eta, Sampler(sampler),
        gamma, n_startup, n_candidates, max(1, n_workers), StudyLog(log_path, resume),
    )
    while len(runner.state.trials) < max_trials:
        for bracket in schedule:
            if len(runner.state.trials) >= max_trials:
                break
            runner.run_bracket(bracket)

    best = runner.state.best_trial
    counts = runner.state.status_counts()
    logger.info(
        "Study finished: %d trials (%s); best %s",
        len(runner.state.trials),
        ", ".join(f"{s.value}={c}" for s, c in counts.items()),
        "none" if best is None else f"trial {best.trial_id} value {best.final_value:.4f} at {best.point}",
    )
    return runner.state
