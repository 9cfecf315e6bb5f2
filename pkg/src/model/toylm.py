"""Windowed MLP next-token model with a hand-written backward pass.

The score row for position t is computed from the embeddings of the last
`window` tokens up to and including t, left-padded with the pad id:

    x = concat(embed[ids[t - W + 1]], ..., embed[ids[t]])
    h = tanh(x @ w1 + b1)
    z = h @ w2 + b2

All parameters are float64.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence, Tuple

import torch
from torch import nn
from torch.nn import functional as F

from src.exceptions import BadDims, UnknownTokenId
from src.lossmask.loss import MEAN, SUM, masked_cross_entropy
from src.lossmask.mask import Batch
from src.model.common import context_windows, last_window

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelDims:
    vocab_size: int
    embed_dim: int = 16
    hidden_dim: int = 64
    window: int = 16

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not isinstance(value, int) or value < 1:
                raise BadDims(f'{name} must be a positive integer, got {value!r}')
        if self.vocab_size < 2:
            raise BadDims(f'vocab_size must be at least 2, got {self.vocab_size}')

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'ModelDims':
        return cls(**data)


def supervised_positions(batch: Batch) -> torch.Tensor:
    # (batch, length - 1): target t + 1 is scored when it is supervised and its source token is real
    return batch.loss_mask[:, 1:] & batch.attention_mask[:, 1:] & batch.attention_mask[:, :-1]


class ToyLanguageModel(nn.Module):
    def __init__(self, dims: ModelDims, pad_id: int, seed: int = 0):
        super().__init__()

        if not 0 <= pad_id < dims.vocab_size:
            raise BadDims(f'pad id {pad_id} outside of vocabulary of size {dims.vocab_size}')

        self.dims = dims
        self.pad_id = pad_id

        v, d, h, w = dims.vocab_size, dims.embed_dim, dims.hidden_dim, dims.window

        self.embed = nn.Parameter(torch.empty(v, d, dtype=torch.float64))
        self.w1 = nn.Parameter(torch.empty(w * d, h, dtype=torch.float64))
        self.b1 = nn.Parameter(torch.empty(h, dtype=torch.float64))
        self.w2 = nn.Parameter(torch.empty(h, v, dtype=torch.float64))
        self.b2 = nn.Parameter(torch.empty(v, dtype=torch.float64))

        self.reset_parameters(seed)

    def init_bounds(self) -> Dict[str, float]:
        d, h, w = self.dims.embed_dim, self.dims.hidden_dim, self.dims.window
        return {
            'embed': d ** -0.5,
            'w1': (w * d) ** -0.5,
            'b1': 0.0,
            'w2': h ** -0.5,
            'b2': 0.0,
        }

    def reset_parameters(self, seed: int) -> None:
        generator = torch.Generator().manual_seed(seed)

        with torch.no_grad():
            for name, bound in self.init_bounds().items():
                param = getattr(self, name)
                if bound == 0.0:
                    param.zero_()
                    continue
                # uniform in [-bound, bound)
                sample = torch.rand(param.shape, generator=generator, dtype=torch.float64)
                param.copy_((sample * 2.0 - 1.0) * bound)

    def check_ids(self, ids: torch.Tensor) -> None:
        if ids.numel() and (ids.min().item() < 0 or ids.max().item() >= self.dims.vocab_size):
            bad = ids[(ids < 0) | (ids >= self.dims.vocab_size)][0].item()
            raise UnknownTokenId(f'Token id {bad} outside of vocabulary of size {self.dims.vocab_size}')

    def __features(self, windows: torch.Tensor) -> torch.Tensor:
        return self.embed[windows].reshape(*windows.shape[:-1], self.dims.window * self.dims.embed_dim)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        # (batch, length) -> (batch, length, vocab)
        self.check_ids(ids)

        x = self.__features(context_windows(ids, self.dims.window, self.pad_id))
        h = torch.tanh(x @ self.w1 + self.b1)
        return h @ self.w2 + self.b2

    def score(self, context: Sequence[int]) -> torch.Tensor:
        if len(context) == 0:
            raise ValueError('Context must hold at least one token')

        window = last_window(context, self.dims.window, self.pad_id)
        self.check_ids(window)

        with torch.no_grad():
            x = self.__features(window.unsqueeze(0))
            h = torch.tanh(x @ self.w1 + self.b1)
            return (h @ self.w2 + self.b2).squeeze(0)

    def __supervised(self, batch: Batch):
        ids = batch.ids
        self.check_ids(ids)

        # position t predicts token t + 1; padding never predicts
        windows = context_windows(ids[:, :-1], self.dims.window, self.pad_id)
        targets = ids[:, 1:]
        mask = supervised_positions(batch)

        return windows[mask], targets[mask]

    def loss(self, batch: Batch, reduction: str = SUM) -> torch.Tensor:
        windows, targets = self.__supervised(batch)

        x = self.__features(windows)
        h = torch.tanh(x @ self.w1 + self.b1)
        z = h @ self.w2 + self.b2

        return masked_cross_entropy(z, targets, torch.ones_like(targets, dtype=torch.bool), reduction)

    def loss_and_grads(self, batch: Batch, reduction: str = SUM) -> Tuple[float, Dict[str, torch.Tensor]]:
        """Computes the masked loss and its exact gradients, keyed by parameter name.

        The gradients are also written into `.grad` so an optimizer can step on them.
        """
        with torch.no_grad():
            windows, targets = self.__supervised(batch)

            x = self.__features(windows)
            h = torch.tanh(x @ self.w1 + self.b1)
            z = h @ self.w2 + self.b2

            loss = masked_cross_entropy(z, targets, torch.ones_like(targets, dtype=torch.bool), reduction)

            dz = F.softmax(z, dim=-1)
            dz[torch.arange(targets.size(0)), targets] -= 1.0
            if reduction == MEAN:
                dz /= targets.size(0)

            dw2 = h.t() @ dz
            db2 = dz.sum(dim=0)

            dpre = (dz @ self.w2.t()) * (1.0 - h * h)
            dw1 = x.t() @ dpre
            db1 = dpre.sum(dim=0)

            dx = (dpre @ self.w1.t()).reshape(-1, self.dims.embed_dim)
            dembed = torch.zeros_like(self.embed).index_add_(0, windows.reshape(-1), dx)

            grads = {'embed': dembed, 'w1': dw1, 'b1': db1, 'w2': dw2, 'b2': db2}
            for name, param in self.named_parameters():
                param.grad = grads[name]

        return loss.item(), grads


def grad_check(
        model: ToyLanguageModel,
        batch: Batch,
        eps: float = 1e-4,
        n_coordinates: int = 200,
        seed: int = 0,
        reduction: str = SUM
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks a random subsample of `n_coordinates` parameter coordinates, or all
    of them when the model has fewer.
    """
    _, grads = model.loss_and_grads(batch, reduction)
    params = list(model.parameters())
    analytic = torch.cat([grads[name].reshape(-1) for name, _ in model.named_parameters()])

    coordinates = [(i, j) for i, param in enumerate(params) for j in range(param.numel())]
    if len(coordinates) > n_coordinates:
        generator = torch.Generator().manual_seed(seed)
        chosen = torch.randperm(len(coordinates), generator=generator)[:n_coordinates].tolist()
        coordinates = [coordinates[k] for k in sorted(chosen)]

    offsets = [0]
    for param in params:
        offsets.append(offsets[-1] + param.numel())

    worst = 0.0
    with torch.no_grad():
        for i, j in coordinates:
            flat = params[i].view(-1)
            original = flat[j].item()

            flat[j] = original + eps
            plus = model.loss(batch, reduction).item()
            flat[j] = original - eps
            minus = model.loss(batch, reduction).item()
            flat[j] = original

            numeric = (plus - minus) / (2.0 * eps)
            exact = analytic[offsets[i] + j].item()
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-6)
            worst = max(worst, error)

    logger.debug('Gradient check over %d coordinates: max relative error %.3e', len(coordinates), worst)
    return worst


def zero_model(dims: ModelDims, pad_id: int) -> ToyLanguageModel:
    model = ToyLanguageModel(dims, pad_id)
    with torch.no_grad():
        for param in model.parameters():
            param.zero_()
    return model


def load_model(dims: dict or ModelDims, pad_id: int, state_dict: Optional[dict] = None) -> ToyLanguageModel:
    dims = dims if isinstance(dims, ModelDims) else ModelDims.from_dict(dims)
    model = ToyLanguageModel(dims, pad_id)
    if state_dict is not None:
        model.load_state_dict(state_dict)
    return model
