"""Run configuration.

A flat TOML file of documented keys; every key is optional and defaults to the
protocol constants (AdamW betas 0.9/0.95, lr 2e-4, five epochs, batch 8,
temperature 0.1, top-p 0.9, 200 new tokens, four seeds).

A run lives under `<outdir>/<config_hash>/`; each evaluation setting of that run
lives under `eval/<eval_hash>/` inside it, so new evaluations reuse the trained models.
"""
import hashlib
import json
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional

from src.data.corpus import SPLITS, LabelScheme, TaskKind
from src.grammar.sampler import DecodeConfig
from src.lossmask.mask import Strategy
from src.lossmask.segments import DEFAULT_MAX_LENGTH
from src.lossmask.tokenizer import CHAR, WORD
from src.model.toylm import ModelDims
from src.optimiser.schedule import COSINE
from src.prompt.template import DEFAULT_NONSENSE, INSTRUCTIONS, InstructionKind, InstructionVariant, Mode
from src.train.trainer import TrainConfig

SHOT_GRID = (0, 1, 5, 10)

HASH_LENGTH = 12

# keys that only shape prompting and decoding at evaluation time; they never move the training run
EVAL_KEYS = (
    'eval_split',
    'eval_n_shots',
    'eval_instruction',
    'permutation_seed',
    'nonsense_text',
    'temperature',
    'top_p',
    'max_new_tokens',
    'greedy',
    'minimize_dfa',
)


def _digest(data: dict) -> str:
    canonical = json.dumps(data, sort_keys=True, separators=(',', ':'), ensure_ascii=False)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:HASH_LENGTH]


@dataclass(frozen=True)
class RunConfig:
    # data
    data_dir: str = 'data'
    classes: List[str] = field(default_factory=lambda: ['person', 'location', 'organization', 'miscellaneous'])
    task_kind: str = TaskKind.PLAIN.value
    eval_split: str = 'test'

    # prompts
    strategy: str = Strategy.MRC.value
    n_shots: int = 0
    eval_n_shots: Optional[int] = None
    instruction: str = 'ner'
    instruction_text: Optional[str] = None
    train_instruction: str = InstructionKind.VANILLA.value
    eval_instruction: Optional[str] = None
    permutation_seed: int = 0
    nonsense_text: str = DEFAULT_NONSENSE
    tokenizer: str = WORD
    max_length: int = DEFAULT_MAX_LENGTH

    # model
    embed_dim: int = 16
    hidden_dim: int = 64
    window: int = 16

    # training
    learning_rate: float = 2e-4
    epochs: int = 5
    batch_size: int = 8
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-5
    weight_decay: float = 0.1
    grad_clip: float = 1.0
    lr_schedule: str = COSINE
    reduction: str = 'sum'
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3])

    # decoding
    temperature: float = 0.1
    top_p: float = 0.9
    max_new_tokens: int = 200
    greedy: bool = False
    minimize_dfa: bool = True

    # synthetic task
    synthetic_seed: int = 0
    train_size: int = 400
    valid_size: int = 50
    test_size: int = 100

    outdir: str = 'runs'

    def __post_init__(self):
        object.__setattr__(self, 'classes', list(self.classes))
        object.__setattr__(self, 'seeds', [int(seed) for seed in self.seeds])

        Strategy(self.strategy)
        InstructionKind(self.train_instruction)
        if self.eval_instruction is not None:
            InstructionKind(self.eval_instruction)

        if self.n_shots not in SHOT_GRID:
            raise ValueError(f'n_shots must be one of {SHOT_GRID}, got {self.n_shots}')
        if self.eval_n_shots is not None and self.eval_n_shots < 0:
            raise ValueError(f'Invalid eval_n_shots: {self.eval_n_shots}')
        if self.eval_split not in SPLITS:
            raise ValueError(f'eval_split must be one of {SPLITS}, got {self.eval_split!r}')
        if self.instruction_text is None and self.instruction not in INSTRUCTIONS:
            raise ValueError(f'Unknown instruction preset {self.instruction!r}, expected one of {sorted(INSTRUCTIONS)}')
        if self.tokenizer not in (WORD, CHAR):
            raise ValueError(f'Unknown tokenizer kind: {self.tokenizer}')
        if not self.seeds:
            raise ValueError('At least one seed is required')
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f'Seeds must be unique: {self.seeds}')

        # derived configs validate their own values
        LabelScheme(classes=tuple(self.classes), task_kind=TaskKind(self.task_kind))
        self.train_config()
        self.decode_config()

    @classmethod
    def load(cls, path: str or Path) -> 'RunConfig':
        with open(path, 'rb') as file:
            data = tomllib.load(file)
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> 'RunConfig':
        known = {it.name for it in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f'Unknown config keys: {", ".join(unknown)}')
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **overrides) -> 'RunConfig':
        overrides = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **overrides) if overrides else self

    def __eval_only(self) -> set:
        keys = set(EVAL_KEYS)
        # a training instruction variant pulls its own parameters into the training run
        if self.train_instruction == InstructionKind.PERMUTED.value:
            keys.discard('permutation_seed')
        if self.train_instruction == InstructionKind.NONSENSE.value:
            keys.discard('nonsense_text')
        return keys

    @property
    def config_hash(self) -> str:
        """Hash of the training-side keys; evaluation-only keys leave it unchanged."""
        eval_only = self.__eval_only()
        data = {key: value for key, value in self.to_dict().items() if key != 'outdir' and key not in eval_only}
        return _digest(data)

    @property
    def eval_hash(self) -> str:
        data = self.to_dict()
        return _digest({'config_hash': self.config_hash, **{key: data[key] for key in EVAL_KEYS}})

    @property
    def run_dir(self) -> Path:
        return Path(self.outdir).joinpath(self.config_hash)

    @property
    def eval_dir(self) -> Path:
        return self.run_dir.joinpath('eval', self.eval_hash)

    @property
    def scheme(self) -> LabelScheme:
        return LabelScheme(classes=tuple(self.classes), task_kind=TaskKind(self.task_kind))

    @property
    def shots_for_eval(self) -> int:
        # evaluation matches the training shot count unless overridden
        return self.n_shots if self.eval_n_shots is None else self.eval_n_shots

    @property
    def base_instruction(self) -> str:
        return self.instruction_text if self.instruction_text is not None else INSTRUCTIONS[self.instruction]

    def instruction_variant(self, mode: Mode) -> InstructionVariant:
        name = self.train_instruction
        if Mode(mode) == Mode.EVAL and self.eval_instruction is not None:
            name = self.eval_instruction
        return InstructionVariant.from_name(name, self.permutation_seed, self.nonsense_text)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            betas=(self.beta1, self.beta2),
            eps=self.eps,
            weight_decay=self.weight_decay,
            grad_clip=self.grad_clip,
            lr_schedule=self.lr_schedule,
            seeds=tuple(self.seeds),
            reduction=self.reduction
        )

    def decode_config(self, seed: int = 0) -> DecodeConfig:
        return DecodeConfig(
            temperature=self.temperature,
            top_p=self.top_p,
            max_new_tokens=self.max_new_tokens,
            seed=seed,
            greedy=self.greedy
        )

    def model_dims(self, vocab_size: int) -> ModelDims:
        return ModelDims(
            vocab_size=vocab_size,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            window=self.window
        )
