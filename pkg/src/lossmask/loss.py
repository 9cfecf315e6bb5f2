import torch
from torch.nn import functional as F

from src.exceptions import EmptyMask, LengthMismatch

SUM = 'sum'
MEAN = 'mean'


def masked_cross_entropy(
        logits: torch.Tensor,
        targets: torch.Tensor,
        mask: torch.Tensor,
        reduction: str = SUM
) -> torch.Tensor:
    # logits (positions, vocab), targets (positions), mask (positions)
    if logits.dim() != 2 or logits.size(0) != targets.size(0) or targets.size(0) != mask.size(0):
        raise LengthMismatch(
            f'logits {tuple(logits.shape)}, targets {tuple(targets.shape)} and mask {tuple(mask.shape)} disagree'
        )

    mask = mask.bool()
    supervised = int(mask.sum().item())
    if supervised == 0:
        raise EmptyMask('No supervised positions in the loss mask')

    log_probs = F.log_softmax(logits, dim=-1)
    picked = log_probs.gather(1, targets.long().unsqueeze(1)).squeeze(1)

    loss = -torch.where(mask, picked, torch.zeros_like(picked)).sum()

    if reduction == MEAN:
        return loss / supervised
    if reduction != SUM:
        raise ValueError(f'Unknown reduction: {reduction}')
    return loss
