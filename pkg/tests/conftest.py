from typing import Callable, List

import numpy as np
import pytest

from src.data.corpus import LabelScheme, Sentence, TaskKind
from src.data.tagging import OUTSIDE

NER_CLASSES = ('person', 'location', 'organization', 'miscellaneous')
SRL_CLASSES = ('ARG0', 'ARG1', 'ARGM-TMP')

# distinct words, so every token run of a generated sentence is a unique occurrence
WORDS = tuple(f'w{i}' for i in range(40))


@pytest.fixture
def ner_scheme() -> LabelScheme:
    return LabelScheme(classes=NER_CLASSES)


@pytest.fixture
def srl_scheme() -> LabelScheme:
    return LabelScheme(classes=SRL_CLASSES, task_kind=TaskKind.VERB_CONDITIONED)


@pytest.fixture
def la_sentence() -> Sentence:
    return Sentence(
        id='train-0',
        tokens=('LOS', 'ANGELES', 'AT', 'MONTREAL'),
        tags=('B-organization', 'I-organization', 'O', 'B-location')
    )


@pytest.fixture
def eu_sentence() -> Sentence:
    return Sentence(
        id='test-0',
        tokens=('EU', 'rejects', 'German', 'call', 'to', 'boycott', 'British', 'lamb', '.'),
        tags=('B-organization', 'O', 'B-miscellaneous', 'O', 'O', 'O', 'B-miscellaneous', 'O', 'O')
    )


def random_tags(rng: np.random.Generator, length: int, classes) -> List[str]:
    tags = [OUTSIDE] * length
    i = 0
    while i < length:
        if rng.random() < 0.35:
            span = int(rng.integers(1, 4))
            class_name = str(rng.choice(classes))
            end = min(i + span, length)
            tags[i] = f'B-{class_name}'
            for j in range(i + 1, end):
                tags[j] = f'I-{class_name}'
            i = end
        else:
            i += 1
    return tags


@pytest.fixture
def make_sentences() -> Callable[..., List[Sentence]]:
    def make(n: int, scheme: LabelScheme, seed: int = 0, split: str = 'train', max_length: int = 10):
        rng = np.random.default_rng(seed)
        sentences = []
        for i in range(n):
            length = int(rng.integers(1, max_length + 1))
            tokens = tuple(str(it) for it in rng.choice(WORDS, size=length, replace=False))
            verb_index = int(rng.integers(0, length)) if scheme.verb_conditioned else None
            sentences.append(Sentence(
                id=f'{split}-{i}',
                tokens=tokens,
                tags=tuple(random_tags(rng, length, scheme.classes)),
                verb_index=verb_index
            ))
        return sentences

    return make
