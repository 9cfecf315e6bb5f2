import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.data.corpus import LabelScheme, Sentence, TaskKind, to_conll
from src.data.tagging import OUTSIDE

logger = logging.getLogger(__name__)

ENTITY_CLASS = 'animal'
ENTITY_WORDS = ('cat', 'dog', 'fox', 'owl')
FILLER_WORDS = ('the', 'a', 'big', 'small', 'runs', 'sleeps', 'near', 'under', 'house', 'tree', 'sees', 'jumps')

SYNTHETIC_SCHEME = LabelScheme(classes=(ENTITY_CLASS,), task_kind=TaskKind.PLAIN)


class SyntheticTaskGenerator:
    """Short sentences over a filler vocabulary where a marked word subclass forms single-token entities."""

    def __init__(
            self,
            path: str or Path,
            sizes: Dict[str, int],
            seed: int = 0,
            min_length: int = 3,
            max_length: int = 5,
            entity_rate: float = 0.9,
            entity_words: Sequence[str] = ENTITY_WORDS,
            filler_words: Sequence[str] = FILLER_WORDS
    ):
        if not 1 <= min_length <= max_length:
            raise ValueError(f'Invalid sentence length range: {min_length}..{max_length}')
        if not 0.0 <= entity_rate <= 1.0:
            raise ValueError(f'Invalid entity rate: {entity_rate}')

        self.__path = Path(path)
        self.__sizes = dict(sizes)
        self.__rng = np.random.default_rng(seed)
        self.__length_range = (min_length, max_length)
        self.__entity_rate = entity_rate
        self.__entity_words = tuple(entity_words)
        self.__filler_words = tuple(filler_words)

    @property
    def scheme(self) -> LabelScheme:
        return SYNTHETIC_SCHEME

    def sentence(self, sentence_id: str) -> Sentence:
        length = int(self.__rng.integers(self.__length_range[0], self.__length_range[1] + 1))
        tokens: List[str] = [str(it) for it in self.__rng.choice(self.__filler_words, size=length)]
        tags = [OUTSIDE] * length

        if self.__rng.random() < self.__entity_rate:
            position = int(self.__rng.integers(0, length))
            tokens[position] = str(self.__rng.choice(self.__entity_words))
            tags[position] = f'B-{ENTITY_CLASS}'

        return Sentence(id=sentence_id, tokens=tuple(tokens), tags=tuple(tags))

    def sentences(self, split: str) -> List[Sentence]:
        return [self.sentence(f'{split}-{i}') for i in range(self.__sizes.get(split, 0))]

    def generate(self, force: bool = False) -> Dict[str, Path]:
        self.__path.mkdir(parents=True, exist_ok=True)

        logger.info('Generate synthetic task into %s', self.__path)

        files = {}
        for split in tqdm(self.__sizes, leave=False):
            # sentences are drawn even for existing files so every split sees the same stream
            text = to_conll(self.sentences(split))

            file = self.__path.joinpath(f'{split}.conll')
            files[split] = file
            if file.exists() and not force:
                logger.info('%s already exists, keeping it', file)
                continue

            file.write_text(text, encoding='utf-8')

        return files


def synthesize(
        path: str or Path,
        sizes: Dict[str, int],
        seed: int = 0,
        force: bool = False
) -> Tuple[LabelScheme, Dict[str, Path]]:
    generator = SyntheticTaskGenerator(path=path, sizes=sizes, seed=seed)
    return generator.scheme, generator.generate(force=force)
