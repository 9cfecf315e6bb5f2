from pathlib import Path
from typing import List, Optional

import torch
from torch.optim import Optimizer

from src.exceptions import ArtifactMismatch, MissingArtifact
from src.model.toylm import ToyLanguageModel, load_model


class HardCheckpoint:
    def __init__(
            self,
            path: str or Path,
            model: ToyLanguageModel,
            optimizer: Optional[Optimizer],
            epoch: int,
            loss: float,
            seed: int = 0,
            config_hash: str = ''
    ):
        self.__path = Path(path)

        self.__model = model
        self.__optimizer = optimizer
        self.__epoch = epoch
        self.__loss = loss
        self.__seed = seed
        self.__config_hash = config_hash
        self.__curve: List[float] = []

    @property
    def path(self) -> Path:
        return self.__path

    @property
    def model(self) -> ToyLanguageModel:
        return self.__model

    @property
    def optimizer(self) -> Optional[Optimizer]:
        return self.__optimizer

    @property
    def epoch(self) -> int:
        return self.__epoch

    @epoch.setter
    def epoch(self, value: int) -> None:
        self.__epoch = value

    @property
    def loss(self) -> float:
        return self.__loss

    @loss.setter
    def loss(self, value: float) -> None:
        self.__loss = value

    @property
    def seed(self) -> int:
        return self.__seed

    @property
    def config_hash(self) -> str:
        return self.__config_hash

    @property
    def curve(self) -> List[float]:
        return self.__curve

    @curve.setter
    def curve(self, value: List[float]) -> None:
        self.__curve = list(value)

    def save(self) -> bool:
        if self.__path.exists():
            raise ArtifactMismatch(f'{self.__path} already exists; checkpoints are written once')

        self.__path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {
                'loss': self.loss,
                'epoch': self.epoch,
                'seed': self.seed,
                'config_hash': self.config_hash,
                'curve': self.curve,
                'dims': self.__model.dims.to_dict(),
                'pad_id': self.__model.pad_id,
                'model_state_dict': self.__model.state_dict(),
                'optimizer_state_dict': self.__optimizer.state_dict() if self.__optimizer is not None else None,
            },
            self.__path
        )
        return True

    def load(self, map_location=None) -> bool:
        if not self.__path.exists():
            return False

        checkpoint = torch.load(self.__path, map_location=map_location)

        self.__model.load_state_dict(checkpoint['model_state_dict'])
        if self.__optimizer is not None and checkpoint['optimizer_state_dict'] is not None:
            self.__optimizer.load_state_dict(checkpoint['optimizer_state_dict'])
        self.__epoch = checkpoint['epoch']
        self.__loss = checkpoint['loss']
        self.__seed = checkpoint['seed']
        self.__config_hash = checkpoint['config_hash']
        self.__curve = list(checkpoint['curve'])

        return True

    @classmethod
    def restore(cls, path: str or Path, config_hash: Optional[str] = None) -> 'HardCheckpoint':
        path = Path(path)
        if not path.exists():
            raise MissingArtifact(f'Checkpoint not found: {path}')

        checkpoint = torch.load(path, map_location='cpu')
        if config_hash is not None and checkpoint['config_hash'] != config_hash:
            raise ArtifactMismatch(
                f'Checkpoint {path} was written for config {checkpoint["config_hash"]}, expected {config_hash}'
            )

        model = load_model(checkpoint['dims'], checkpoint['pad_id'], checkpoint['model_state_dict'])

        restored = cls(
            path=path,
            model=model,
            optimizer=None,
            epoch=checkpoint['epoch'],
            loss=checkpoint['loss'],
            seed=checkpoint['seed'],
            config_hash=checkpoint['config_hash']
        )
        restored.curve = checkpoint['curve']
        return restored
