import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence

import torch

from src.exceptions import DeadEnd, ModelShapeMismatch
from src.grammar.index import TokenFsmIndex

logger = logging.getLogger(__name__)

scorer_t = Callable[[Sequence[int]], torch.Tensor]


@dataclass(frozen=True)
class DecodeConfig:
    temperature: float = 0.1
    top_p: float = 0.9
    max_new_tokens: int = 200
    seed: int = 0
    greedy: bool = False

    def __post_init__(self):
        if not 0.0 < self.temperature:
            raise ValueError(f'Invalid temperature: {self.temperature}')
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f'Invalid top_p: {self.top_p}')
        if self.max_new_tokens < 0:
            raise ValueError(f'Invalid max_new_tokens: {self.max_new_tokens}')


def top_p_filter(probs: torch.Tensor, top_p: float) -> torch.Tensor:
    sorted_probs, _ = torch.sort(probs, descending=True)
    n_positive = int((sorted_probs > 0).sum().item())

    cumulative = torch.cumsum(sorted_probs, dim=0)
    target = torch.tensor([top_p], dtype=cumulative.dtype)
    boundary = int(torch.searchsorted(cumulative, target).item())
    boundary = min(boundary, n_positive - 1)

    # every token tied with the boundary token stays in the nucleus
    threshold = sorted_probs[boundary]
    kept = torch.where((probs >= threshold) & (probs > 0), probs, torch.zeros_like(probs))
    return kept / kept.sum()


def constrained_sample(
        model: scorer_t,
        prompt_ids: Sequence[int],
        index: TokenFsmIndex,
        cfg: DecodeConfig
) -> List[int]:
    generator = torch.Generator().manual_seed(cfg.seed)

    state = index.start
    context = list(prompt_ids)
    generated = []

    for _ in range(cfg.max_new_tokens):
        scores = model(context)
        if scores.dim() != 1 or scores.size(0) != index.vocab_size:
            raise ModelShapeMismatch(
                f'Scorer returned shape {tuple(scores.shape)}, expected ({index.vocab_size},)'
            )

        allowed = index.allowed_tokens(state)
        if not allowed:
            raise DeadEnd(state)

        allowed = torch.tensor(allowed, dtype=torch.long)
        masked = torch.full((index.vocab_size,), float('-inf'), dtype=torch.float64)
        masked[allowed] = scores.detach().to(torch.float64)[allowed]

        if cfg.greedy:
            token_id = int(torch.argmax(masked).item())
        else:
            probs = torch.softmax(masked / cfg.temperature, dim=0)
            probs = top_p_filter(probs, cfg.top_p)
            token_id = int(torch.multinomial(probs, 1, generator=generator).item())

        generated.append(token_id)
        if token_id == index.eos_id:
            break

        context.append(token_id)
        state = index.next_state(state, token_id)

    return generated
