import math
from typing import Iterable

import torch
from torch.optim import Optimizer
from torch.optim.lr_scheduler import LambdaLR

COSINE = 'cosine'
CONSTANT = 'constant'


def cosine_factor(step: int, total: int) -> float:
    if total <= 0:
        return 1.0
    step = min(max(step, 0), total)
    return 0.5 * (1.0 + math.cos(math.pi * step / total))


def cosine_lr(step: int, total: int, base_lr: float = 1.0) -> float:
    return base_lr * cosine_factor(step, total)


def build_scheduler(optimizer: Optimizer, schedule: str, total_steps: int) -> LambdaLR:
    if schedule == COSINE:
        return LambdaLR(optimizer, lambda step: cosine_factor(step, total_steps))
    if schedule == CONSTANT:
        return LambdaLR(optimizer, lambda step: 1.0)
    raise ValueError(f'Unknown learning rate schedule: {schedule}')


def clip_gradients(params: Iterable[torch.nn.Parameter], max_norm: float) -> float:
    # returns the norm before clipping
    return float(torch.nn.utils.clip_grad_norm_(list(params), max_norm))
