import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from src.common_types import tags_t
from src.data.tagging import OUTSIDE, SpanAnnotation, split_tag, tags_to_spans
from src.exceptions import GrammarViolation, IobViolation, MalformedLine, MissingVerb, UnknownTag

SPLITS = ('train', 'valid', 'test')

VERB_MARK = 'V'


class TaskKind(str, enum.Enum):
    PLAIN = 'plain'
    VERB_CONDITIONED = 'verb_conditioned'


@dataclass(frozen=True)
class LabelScheme:
    classes: Tuple[str, ...]
    task_kind: TaskKind = TaskKind.PLAIN

    def __post_init__(self):
        object.__setattr__(self, 'classes', tuple(self.classes))
        object.__setattr__(self, 'task_kind', TaskKind(self.task_kind))

        for class_name in self.classes:
            if not class_name:
                raise ValueError('Class names must be non-empty')
            if ':' in class_name or ';' in class_name:
                raise GrammarViolation(f'Class name {class_name!r} contains a response separator')

        if len(set(self.classes)) != len(self.classes):
            raise ValueError(f'Class names must be unique: {self.classes}')

    @property
    def verb_conditioned(self) -> bool:
        return self.task_kind == TaskKind.VERB_CONDITIONED

    def to_dict(self) -> dict:
        return {'classes': list(self.classes), 'task_kind': self.task_kind.value}

    @classmethod
    def from_dict(cls, data: dict) -> 'LabelScheme':
        return cls(classes=tuple(data['classes']), task_kind=TaskKind(data['task_kind']))


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: Tuple[str, ...]
    tags: Tuple[str, ...]
    verb_index: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'tokens', tuple(self.tokens))
        object.__setattr__(self, 'tags', tuple(self.tags))

        if len(self.tokens) != len(self.tags):
            raise ValueError(f'Sentence {self.id}: {len(self.tokens)} tokens but {len(self.tags)} tags')
        if self.verb_index is not None and not 0 <= self.verb_index < len(self.tokens):
            raise ValueError(f'Sentence {self.id}: verb index {self.verb_index} out of range')

    def __len__(self):
        return len(self.tokens)

    @property
    def spans(self) -> List[SpanAnnotation]:
        return tags_to_spans(self.tags)

    @property
    def verb(self) -> Optional[str]:
        return self.tokens[self.verb_index] if self.verb_index is not None else None

    def to_dict(self) -> dict:
        return {
            'id': self.id,
            'tokens': list(self.tokens),
            'tags': list(self.tags),
            'verb_index': self.verb_index,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'Sentence':
        return cls(
            id=data['id'],
            tokens=tuple(data['tokens']),
            tags=tuple(data['tags']),
            verb_index=data.get('verb_index')
        )


@dataclass
class Dataset:
    scheme: LabelScheme
    train: List[Sentence] = field(default_factory=list)
    valid: List[Sentence] = field(default_factory=list)
    test: List[Sentence] = field(default_factory=list)

    def __post_init__(self):
        for split in SPLITS:
            ids = [sentence.id for sentence in self.split(split)]
            if len(set(ids)) != len(ids):
                raise ValueError(f'Sentence ids in split {split!r} are not unique')

    def split(self, name: str) -> List[Sentence]:
        if name not in SPLITS:
            raise ValueError(f'Unknown split {name!r}, expected one of {SPLITS}')
        return getattr(self, name)

    def sizes(self) -> Dict[str, int]:
        return {split: len(self.split(split)) for split in SPLITS}

    def to_dict(self) -> dict:
        return {
            'scheme': self.scheme.to_dict(),
            **{split: [sentence.to_dict() for sentence in self.split(split)] for split in SPLITS}
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'Dataset':
        return cls(
            scheme=LabelScheme.from_dict(data['scheme']),
            **{split: [Sentence.from_dict(it) for it in data.get(split, [])] for split in SPLITS}
        )


class _SentenceBuilder:
    def __init__(self, scheme: LabelScheme):
        self.scheme = scheme

        self.tokens: List[str] = []
        self.tags: tags_t = []
        self.verb_index: Optional[int] = None

        self.__previous = OUTSIDE
        self.__previous_class = None

    def __bool__(self):
        return len(self.tokens) > 0

    def add(self, line_number: int, line: str) -> None:
        columns = line.split('\t')
        if len(columns) not in (2, 3):
            raise MalformedLine(line_number, f'expected 2 or 3 tab-separated columns, got {len(columns)} in {line!r}')

        token, tag = columns[0], columns[1]
        if not token:
            raise MalformedLine(line_number, 'empty token')

        if len(columns) == 3:
            if columns[2] != VERB_MARK:
                raise MalformedLine(line_number, f'third column must be {VERB_MARK!r}, got {columns[2]!r}')
            if not self.scheme.verb_conditioned:
                raise MalformedLine(line_number, 'verb column is only allowed for verb-conditioned schemes')
            if self.verb_index is not None:
                raise MalformedLine(line_number, 'sentence already has a verb')
            self.verb_index = len(self.tokens)

        try:
            prefix, class_name = split_tag(tag)
        except ValueError:
            raise UnknownTag(tag, line_number)

        if class_name is not None and class_name not in self.scheme.classes:
            raise UnknownTag(tag, line_number)

        if prefix == 'I' and (self.__previous == OUTSIDE or self.__previous_class != class_name):
            raise IobViolation(len(self.tokens), tag, self.tags[-1] if self.tags else '<start>', line_number)

        self.__previous, self.__previous_class = prefix, class_name

        self.tokens.append(token)
        self.tags.append(tag)

    def build(self, sentence_id: str, line_number: int) -> Sentence:
        if self.scheme.verb_conditioned and self.verb_index is None:
            raise MissingVerb(sentence_id, line_number)

        return Sentence(
            id=sentence_id,
            tokens=tuple(self.tokens),
            tags=tuple(self.tags),
            verb_index=self.verb_index
        )


def parse_conll(text: str, scheme: LabelScheme, split: str = 'train') -> List[Sentence]:
    sentences = []
    builder = _SentenceBuilder(scheme)

    line_number = 0
    for line_number, line in enumerate(text.split('\n'), start=1):
        if line.strip() == '':
            if builder:
                sentences.append(builder.build(f'{split}-{len(sentences)}', line_number - 1))
                builder = _SentenceBuilder(scheme)
            continue

        builder.add(line_number, line)

    if builder:
        sentences.append(builder.build(f'{split}-{len(sentences)}', line_number))

    return sentences


def to_conll(sentences: Sequence[Sentence]) -> str:
    blocks = []
    for sentence in sentences:
        lines = []
        for i, (token, tag) in enumerate(zip(sentence.tokens, sentence.tags)):
            line = f'{token}\t{tag}'
            if i == sentence.verb_index:
                line += f'\t{VERB_MARK}'
            lines.append(line)
        blocks.append('\n'.join(lines))

    return '\n\n'.join(blocks) + '\n' if blocks else ''


def load_split(path: str or Path, scheme: LabelScheme, split: str) -> List[Sentence]:
    path = Path(path)
    return parse_conll(path.read_text(encoding='utf-8'), scheme, split)
