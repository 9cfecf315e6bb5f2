from typing import Sequence

import torch


def context_windows(ids: torch.Tensor, window: int, pad_id: int) -> torch.Tensor:
    # (batch, length) -> (batch, length, window); row t holds ids[t - window + 1 .. t]
    batch, length = ids.shape
    if length == 0:
        return ids.new_empty((batch, 0, window))

    padded = torch.cat(
        [torch.full((batch, window - 1), pad_id, dtype=ids.dtype), ids],
        dim=1
    )
    return padded.unfold(1, window, 1)[:, :length]


def last_window(context: Sequence[int], window: int, pad_id: int) -> torch.Tensor:
    context = list(context)[-window:]
    return torch.tensor([pad_id] * (window - len(context)) + context, dtype=torch.long)
