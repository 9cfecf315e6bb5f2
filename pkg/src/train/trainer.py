import abc
import asyncio
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from time import time
from typing import Dict, List, Sequence, Tuple

import torch
from torch.optim import AdamW, Optimizer
from tqdm import tqdm

from src.data.dataloader import PromptDataLoader
from src.exceptions import DivergenceDetected
from src.lossmask.loss import MEAN, SUM
from src.lossmask.mask import Strategy, compute_loss_mask
from src.lossmask.segments import TokenizedPrompt
from src.lossmask.tokenizer import TokenizerSpec
from src.model.toylm import ModelDims, ToyLanguageModel, supervised_positions
from src.optimiser.schedule import COSINE, CONSTANT, build_scheduler, clip_gradients
from src.train.checkpoint import HardCheckpoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-4
    epochs: int = 5
    batch_size: int = 8
    betas: Tuple[float, float] = (0.9, 0.95)
    eps: float = 1e-5
    weight_decay: float = 0.1
    grad_clip: float = 1.0
    lr_schedule: str = COSINE
    seeds: Tuple[int, ...] = (0, 1, 2, 3)
    reduction: str = SUM

    def __post_init__(self):
        for name in ('learning_rate', 'epochs', 'batch_size', 'eps', 'grad_clip'):
            if not getattr(self, name) > 0:
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')
        if not all(0.0 <= beta < 1.0 for beta in self.betas):
            raise ValueError(f'betas must lie in [0, 1), got {self.betas}')
        if self.weight_decay < 0:
            raise ValueError(f'weight_decay must be non-negative, got {self.weight_decay}')
        if self.lr_schedule not in (COSINE, CONSTANT):
            raise ValueError(f'Unknown learning rate schedule: {self.lr_schedule}')
        if self.reduction not in (SUM, MEAN):
            raise ValueError(f'Unknown reduction: {self.reduction}')
        if not self.seeds:
            raise ValueError('At least one seed is required')


class Trainer:
    def __init__(
            self,
            checkpoint: str or Path,
            model: ToyLanguageModel,
            optimizer: Optimizer,
            seed: int = 0,
            config_hash: str = ''
    ):
        self._model = model
        self._optimizer = optimizer

        self._last_checkpoint = HardCheckpoint(
            path=checkpoint,
            model=model,
            optimizer=optimizer,
            epoch=0,
            loss=float('inf'),
            seed=seed,
            config_hash=config_hash
        )

    @property
    def checkpoint(self) -> HardCheckpoint:
        return self._last_checkpoint

    async def run(self, epochs: int) -> List[float]:
        # epoch 0 is the loss before any update
        curve = [await self.evaluate()]

        logger.info(
            'Training start. Final epochs is {:3d}, initial loss is {:5.2f}.'.format(epochs, curve[0])
        )

        start_time = time()

        for epoch in range(1, epochs + 1):
            self._last_checkpoint.epoch = epoch

            epoch_start_time = time()

            self._last_checkpoint.loss = await self.train()
            curve.append(self._last_checkpoint.loss)

            epoch_end_time = time()

            logger.info(
                '{:3d} epoch, {:5.2f} loss, {:8.2f} ppl, {:5.2f}s'.format(
                    epoch,
                    self._last_checkpoint.loss,
                    math.exp(min(self._last_checkpoint.loss, 50.0)),
                    (epoch_end_time - epoch_start_time),
                )
            )

        self._last_checkpoint.curve = curve
        self.save()

        logger.info('Training finish. {:5.2f}s'.format(time() - start_time))

        return curve

    def save(self):
        self._last_checkpoint.save()

    @abc.abstractmethod
    async def train(self) -> float:
        raise NotImplementedError

    @abc.abstractmethod
    async def evaluate(self) -> float:
        raise NotImplementedError


class ToyLMTrainer(Trainer):
    def __init__(
            self,
            checkpoint: str or Path,
            model: ToyLanguageModel,
            dataset: PromptDataLoader,
            cfg: TrainConfig,
            seed: int = 0,
            config_hash: str = ''
    ):
        optimizer = AdamW(
            model.parameters(),
            lr=cfg.learning_rate,
            betas=cfg.betas,
            eps=cfg.eps,
            weight_decay=cfg.weight_decay
        )

        super().__init__(
            checkpoint,
            model,
            optimizer,
            seed=seed,
            config_hash=config_hash
        )

        self.__dataset = dataset
        self.__cfg = cfg
        self.__scheduler = build_scheduler(optimizer, cfg.lr_schedule, cfg.epochs * len(dataset))
        self.__step = 0

    @property
    def lr(self) -> float:
        return self._optimizer.param_groups[0]['lr']

    def __batch_loss(self, loss: float, batch) -> Tuple[float, int]:
        tokens = int(supervised_positions(batch).sum().item())
        # curve entries are per supervised token whatever the reduction
        return (loss if self.__cfg.reduction == SUM else loss * tokens), tokens

    async def train(self) -> float:
        self._model.train()

        self.__dataset.shuffle()

        total_loss = 0.0
        total_tokens = 0

        data = tqdm(self.__dataset, leave=False)
        for batch in data:
            self._optimizer.zero_grad()

            loss, _ = self._model.loss_and_grads(batch, self.__cfg.reduction)
            if not math.isfinite(loss):
                raise DivergenceDetected(self._last_checkpoint.epoch, self.__step, loss, self.lr)

            clip_gradients(self._model.parameters(), self.__cfg.grad_clip)

            self._optimizer.step()
            self.__scheduler.step()
            self.__step += 1

            batch_loss, tokens = self.__batch_loss(loss, batch)
            total_loss += batch_loss
            total_tokens += tokens

            cur_loss = total_loss / max(total_tokens, 1)
            data.set_description('{:3d} epoch, {:5.2f} loss, {:8.2f} ppl'.format(
                self._last_checkpoint.epoch,
                cur_loss,
                math.exp(min(cur_loss, 50.0))
            ))

        return total_loss / max(total_tokens, 1)

    async def evaluate(self) -> float:
        self._model.eval()

        total_loss = 0.0
        total_tokens = 0

        with torch.no_grad():
            for batch in tqdm(self.__dataset, leave=False):
                loss = self._model.loss(batch, self.__cfg.reduction).item()
                batch_loss, tokens = self.__batch_loss(loss, batch)
                total_loss += batch_loss
                total_tokens += tokens

        loss = total_loss / max(total_tokens, 1)
        if not math.isfinite(loss):
            raise DivergenceDetected(self._last_checkpoint.epoch, self.__step, loss, self.lr)
        return loss


def train(
        prompts: Sequence[TokenizedPrompt],
        tok: TokenizerSpec,
        strategy: Strategy,
        cfg: TrainConfig,
        dims: ModelDims,
        checkpoints: str or Path,
        config_hash: str = ''
) -> Dict[int, HardCheckpoint]:
    """Trains one model per seed and keeps the last-epoch model of each."""
    masks = [compute_loss_mask(tp, strategy) for tp in prompts]

    results = {}
    for seed in cfg.seeds:
        logger.info('Seed %d: %d prompts, strategy %s', seed, len(prompts), Strategy(strategy).value)

        dataset = PromptDataLoader(prompts, masks, tok, batch_size=cfg.batch_size, seed=seed)
        model = ToyLanguageModel(dims, tok.pad_id, seed=seed)

        trainer = ToyLMTrainer(
            checkpoint=Path(checkpoints).joinpath(f'seed-{seed}.pt'),
            model=model,
            dataset=dataset,
            cfg=cfg,
            seed=seed,
            config_hash=config_hash
        )

        asyncio.run(trainer.run(epochs=cfg.epochs))
        results[seed] = trainer.checkpoint

    return results
