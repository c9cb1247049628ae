"""
Finite-Difference Gradient Check

Compares autograd gradients with central differences
``(L(w + h) - L(w - h)) / 2h`` on a seeded subset of entries of every
trainable parameter. The model is evaluated in float64 and inference mode
(dropout off, BatchNorm on running statistics) so the loss is a smooth,
deterministic function of the weights.

Relative error is ``|a - n| / max(|a|, |n|, floor)``; the floor keeps
entries whose true gradient is zero from reporting huge relative errors.
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
import torch
import torch.nn as nn

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-4
DEFAULT_TOLERANCE = 1e-3
DEFAULT_MAX_ENTRIES = 8
RELATIVE_FLOOR = 1e-3

LossFn = Callable[[torch.Tensor], torch.Tensor]


@dataclass
class GradCheckReport:
    """Max relative error per parameter name."""
    errors: Dict[str, float] = field(default_factory=dict)
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def group_errors(self, depth: int = 1) -> Dict[str, float]:
        """Errors rolled up by the first ``depth`` components of the parameter name."""
        groups: Dict[str, float] = {}
        for name, err in self.errors.items():
            key = ".".join(name.split(".")[:depth])
            groups[key] = max(groups.get(key, 0.0), err)
        return groups


def _sum_loss(output: torch.Tensor) -> torch.Tensor:
    return output.sum()


def grad_check(
    model: nn.Module,
    sample: torch.Tensor,
    tolerance: float = DEFAULT_TOLERANCE,
    loss_fn: Optional[LossFn] = None,
    step: float = DEFAULT_STEP,
    max_entries: int = DEFAULT_MAX_ENTRIES,
    seed: int = 0,
) -> GradCheckReport:
    """
    Check ``model``'s analytic gradients on ``sample``.

    The model is copied to float64; the caller's module is not modified.
    """
    loss_fn = loss_fn or _sum_loss
    checked = copy.deepcopy(model).double().eval()
    x = sample.detach().double()
    rng = np.random.default_rng(seed)

    checked.zero_grad()
    loss_fn(checked(x)).backward()
    report = GradCheckReport(tolerance=tolerance)

    with torch.no_grad():
        for name, param in checked.named_parameters():
            if not param.requires_grad:
                continue
            analytic = torch.zeros_like(param) if param.grad is None else param.grad.detach().clone()
            flat = param.view(-1)
            count = min(max_entries, flat.numel())
            indices = rng.choice(flat.numel(), size=count, replace=False)
            worst = 0.0
            for i in indices.tolist():
                original = float(flat[i])
                flat[i] = original + step
                plus = float(loss_fn(checked(x)))
                flat[i] = original - step
                minus = float(loss_fn(checked(x)))
                flat[i] = original
                numeric = (plus - minus) / (2.0 * step)
                a = float(analytic.view(-1)[i])
                denom = max(abs(a), abs(numeric), RELATIVE_FLOOR)
                worst = max(worst, abs(a - numeric) / denom)
            report.errors[name] = worst

    logger.info("Gradient check over %d tensors: max relative error %.3e", len(report.errors), report.max_error)
    return report
