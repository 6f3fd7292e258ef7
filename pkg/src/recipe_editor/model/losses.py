"""Training losses and the latent-space gradient used by critiquing."""

from __future__ import annotations

import torch

from ..tokenizer import PAD
from .network import IngredientPredictor, pool_step_logits

CLAMP_EPS = 1e-7


def eos_one_hot(eos_index: torch.Tensor, n_steps: int) -> torch.Tensor:
    return torch.nn.functional.one_hot(eos_index, n_steps).to(torch.float64)


def ingredient_loss(probs: torch.Tensor, eos_probs: torch.Tensor,
                    target: torch.Tensor, eos_index: torch.Tensor,
                    eos_weight: float) -> torch.Tensor:
    """Per-sample set loss: full BCE over the vocabulary plus weighted EOS BCE.

    The EOS target is one-hot at the step equal to the target set's size, so a
    uniform 0.5 prediction scores exactly ``|I|*log 2 + eos_weight*S*log 2``.
    Probabilities are clamped to [1e-7, 1-1e-7] before the logs.
    """
    if probs.shape != target.shape:
        raise ValueError(f"prediction/target shape mismatch: {tuple(probs.shape)} vs {tuple(target.shape)}")
    p = probs.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
    bce = -(target * p.log() + (1.0 - target) * (1.0 - p).log()).sum(dim=-1)
    e = eos_probs.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
    eos_t = eos_one_hot(eos_index, eos_probs.shape[-1])
    eos_bce = -(eos_t * e.log() + (1.0 - eos_t) * (1.0 - e).log()).sum(dim=-1)
    return bce + eos_weight * eos_bce


def ingredient_loss_from_logits(step_logits: torch.Tensor, target: torch.Tensor,
                                eos_index: torch.Tensor, eos_weight: float) -> torch.Tensor:
    probs, eos_probs = pool_step_logits(step_logits)
    return ingredient_loss(probs, eos_probs, target, eos_index, eos_weight)


def instruction_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Teacher-forced token cross-entropy averaged over non-PAD target tokens."""
    mask = targets != PAD
    n = mask.sum()
    if int(n) == 0:
        raise ValueError("instruction_loss: empty target (no non-pad tokens)")
    logp = torch.log_softmax(logits, dim=-1)
    nll = -logp.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    return (nll * mask.to(nll.dtype)).sum() / n.to(nll.dtype)


def grad_ingredient_loss_wrt_z(predictor: IngredientPredictor, z: torch.Tensor,
                               target: torch.Tensor, eos_index: int,
                               eos_weight: float) -> torch.Tensor:
    """Exact gradient of the set loss at z, through the max-pooled set decoder.

    The max-pool subgradient routes to the first maximizing decode step.
    Expects the predictor in eval mode (no dropout).
    """
    z = z.detach().clone().requires_grad_(True)
    loss = ingredient_loss_from_logits(
        predictor(z.unsqueeze(0)), target.unsqueeze(0),
        torch.tensor([eos_index], dtype=torch.long), eos_weight).sum()
    (g,) = torch.autograd.grad(loss, z)
    return g.detach()
