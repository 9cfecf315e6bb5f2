from typing import Iterator, List, Sequence

import torch
from torch.utils import data

from src.exceptions import EmptyDataset
from src.lossmask.mask import Batch, LossMask, pad_batch
from src.lossmask.segments import TokenizedPrompt
from src.lossmask.tokenizer import TokenizerSpec


class PromptDataLoader(data.Dataset):
    def __init__(
            self,
            prompts: Sequence[TokenizedPrompt],
            masks: Sequence[LossMask],
            tok: TokenizerSpec,
            batch_size: int = 8,
            seed: int = 0
    ):
        if not prompts:
            raise EmptyDataset('No prompts to train on')
        if len(prompts) != len(masks):
            raise ValueError(f'{len(prompts)} prompts but {len(masks)} masks')
        if batch_size < 1:
            raise ValueError(f'Invalid batch size: {batch_size}')

        self.__prompts = list(prompts)
        self.__masks = list(masks)
        self.__tok = tok
        self.batch_size = batch_size

        self.__generator = torch.Generator().manual_seed(seed)
        self.__order: List[int] = list(range(len(self.__prompts)))

    def shuffle(self):
        self.__order = torch.randperm(len(self.__prompts), generator=self.__generator).tolist()

    def __len__(self):
        return (len(self.__prompts) + self.batch_size - 1) // self.batch_size

    def __getitem__(self, idx) -> Batch:
        if not 0 <= idx < len(self):
            raise IndexError(idx)

        indices = self.__order[idx * self.batch_size:(idx + 1) * self.batch_size]
        return pad_batch(
            [self.__prompts[i] for i in indices],
            [self.__masks[i] for i in indices],
            self.__tok
        )

    def __iter__(self) -> Iterator[Batch]:
        for idx in range(len(self)):
            yield self[idx]
