"""
Hyperband Schedule

Brackets s = s_max..0 with ``s_max = floor(log_eta R)``. Bracket s starts
``n_s = ceil((s_max + 1) / (s + 1) * eta^s)`` configurations at budget
``r_s = R * eta^-s``; each successive-halving rung multiplies the budget by
eta and keeps the top ``floor(n / eta)`` configurations.

All of this is integer arithmetic apart from the budgets, so ``s_max`` has no
floating-point log rounding at exact powers of eta.
"""

from dataclasses import dataclass
from typing import List, Tuple

from thumbqc.core.errors import InvalidInputError


@dataclass(frozen=True)
class Rung:
    n_configs: int
    budget: float


@dataclass(frozen=True)
class Bracket:
    s: int
    rungs: Tuple[Rung, ...]

    @property
    def n_configs(self) -> int:
        return self.rungs[0].n_configs

    @property
    def budget(self) -> float:
        return self.rungs[0].budget


def max_bracket_index(max_budget: int, eta: int) -> int:
    """Largest s with eta^s <= R."""
    s = 0
    while eta ** (s + 1) <= max_budget:
        s += 1
    return s


def survivors(n: int, eta: int) -> int:
    return n // eta


def hyperband_schedule(max_budget: int, eta: int = 3) -> List[Bracket]:
    if isinstance(max_budget, bool) or not isinstance(max_budget, int) or max_budget < 1:
        raise InvalidInputError(f"max budget R must be an integer >= 1, got {max_budget!r}")
    if isinstance(eta, bool) or not isinstance(eta, int) or eta < 2:
        raise InvalidInputError(f"reduction factor eta must be an integer >= 2, got {eta!r}")

    s_max = max_bracket_index(max_budget, eta)
    brackets: List[Bracket] = []
    for s in range(s_max, -1, -1):
        # ceil((s_max + 1) * eta^s / (s + 1)) without floats
        n = -(-(s_max + 1) * eta ** s // (s + 1))
        rungs = []
        for i in range(s + 1):
            rungs.append(Rung(n_configs=n, budget=max_budget * eta ** i / eta ** s))
            n = survivors(n, eta)
        brackets.append(Bracket(s=s, rungs=tuple(rungs)))
    return brackets
