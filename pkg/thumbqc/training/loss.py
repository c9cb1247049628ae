"""Binary cross-entropy on probabilities, clamped away from 0 and 1."""

import torch

PROBABILITY_CLAMP = 1e-7


def bce_loss(probability: torch.Tensor, label: torch.Tensor) -> torch.Tensor:
    """Mean of ``-[y log p + (1 - y) log(1 - p)]`` with ``p`` clamped to ``[1e-7, 1 - 1e-7]``."""
    p = probability.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    y = label.to(p.dtype)
    return -(y * torch.log(p) + (1.0 - y) * torch.log1p(-p)).mean()
