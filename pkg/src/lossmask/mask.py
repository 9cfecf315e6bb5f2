import enum
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import torch

from src.common_types import token_range_t
from src.exceptions import EvalPrompt
from src.lossmask.segments import TokenizedPrompt
from src.lossmask.tokenizer import TokenizerSpec


class Strategy(str, enum.Enum):
    VANILLA = 'vanilla'
    SRC = 'src'
    MRC = 'mrc'


@dataclass(frozen=True)
class LossMask:
    bits: Tuple[bool, ...]

    def __len__(self):
        return len(self.bits)

    def count(self) -> int:
        return sum(self.bits)


@dataclass
class Batch:
    ids: torch.LongTensor
    loss_mask: torch.BoolTensor
    attention_mask: torch.BoolTensor

    def __len__(self):
        return self.ids.size(0)


def _fill(length: int, ranges: Sequence[token_range_t]) -> Tuple[bool, ...]:
    bits = [False] * length
    for start, end in ranges:
        for i in range(start, end):
            bits[i] = True
    return tuple(bits)


def compute_loss_mask(tp: TokenizedPrompt, strategy: Strategy) -> LossMask:
    segments = tp.segment_token_ranges
    if segments.query_response is None:
        raise EvalPrompt(f'Prompt {tp.id} has no query response to supervise')

    strategy = Strategy(strategy)
    if strategy == Strategy.VANILLA:
        return LossMask((True,) * len(tp.ids))
    if strategy == Strategy.SRC:
        return LossMask(_fill(len(tp.ids), [segments.query_response]))
    return LossMask(_fill(len(tp.ids), segments.response_ranges()))


def pad_batch(tps: Sequence[TokenizedPrompt], masks: Sequence[LossMask], tok: TokenizerSpec) -> Batch:
    if not tps:
        raise ValueError('Cannot pad an empty batch')
    if len(tps) != len(masks):
        raise ValueError(f'{len(tps)} prompts but {len(masks)} masks')

    max_length = max(len(tp.ids) for tp in tps)

    ids = torch.full((len(tps), max_length), tok.pad_id, dtype=torch.long)
    loss_mask = torch.zeros((len(tps), max_length), dtype=torch.bool)
    attention_mask = torch.zeros((len(tps), max_length), dtype=torch.bool)

    for i, (tp, mask) in enumerate(zip(tps, masks)):
        if len(mask) != len(tp.ids):
            raise ValueError(f'Mask of prompt {tp.id} has {len(mask)} bits for {len(tp.ids)} tokens')

        # left padding
        offset = max_length - len(tp.ids)
        ids[i, offset:] = torch.tensor(tp.ids, dtype=torch.long)
        loss_mask[i, offset:] = torch.tensor(mask.bits, dtype=torch.bool)
        attention_mask[i, offset:] = True

    return Batch(ids=ids, loss_mask=loss_mask, attention_mask=attention_mask)


def unpad_row(batch: Batch, row: int) -> List[int]:
    return batch.ids[row][batch.attention_mask[row]].tolist()
