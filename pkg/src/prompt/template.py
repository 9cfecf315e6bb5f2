import enum
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from src.common_types import byte_range_t, char_range_t
from src.data.corpus import LabelScheme, Sentence
from src.data.tagging import SpanAnnotation
from src.exceptions import GrammarViolation, MissingGold, VerbRequired
from src.prompt.prng import Xorshift64Star

INSTRUCTION_MARKER = '### Instruction:'
OPTIONS_MARKER = '### Options:'
SENTENCE_MARKER = '### Sentence:'
VERB_MARKER = '### Verb:'
RESPONSE_MARKER = '### Response:'

BLOCK_SEPARATOR = '\n\n'
OPTIONS_SEPARATOR = ', '

NA = 'NA'
SPAN_SEPARATOR = ';'
CLASS_SEPARATOR = ':'

INSTRUCTIONS = {
    'ner': (
        'extract named entities and their type from the input sentence, all entity types are in options\n'
        "if there are no named entities in the sentence the output should just be 'NA'\n"
        'if there are multiple extractions from the sentence, the extraction format should be '
        'entity_1_span:entity_1_class;entity_2_span:entity_2_class;...'
    ),
    'abam': (
        'extract argument aspects and their type from the input sentence, all aspect types are in options\n'
        "if there are no argument aspects in the sentence the output should just be 'NA'\n"
        'if there are multiple extractions from the sentence, the extraction format should be '
        'aspect_1_span:aspect_1_class;aspect_2_span:aspect_2_class;...'
    ),
    'slot': (
        'extract slots and their type from the input sentence, all slot label types are in options\n'
        "if there are no slots in the sentence the output should just be 'NA'\n"
        'if there are multiple extractions from the sentence, the extraction format should be '
        'slot_1_span:slot_1_class;slot_2_span:slot_2_class;...'
    ),
    'srl': (
        'extract arguments of the given verb and their semantic roles from the input sentence, '
        'all semantic roles are in options\n'
        'if there are multiple extractions from the sentence, the extraction format should be '
        'argument_1_span:argument_1_role;argument_2_span:argument_2_role;...'
    ),
}

DEFAULT_NONSENSE = (
    'Tide pools form where the sea retreats twice a day and leaves water trapped between rocks. '
    'Anemones, hermit crabs and small fish live in them, surviving sudden changes in temperature '
    'and salt until the tide returns.'
)


class InstructionKind(str, enum.Enum):
    VANILLA = 'vanilla'
    PERMUTED = 'permuted'
    NONSENSE = 'nonsense'
    NONE = 'none'


@dataclass(frozen=True)
class InstructionVariant:
    kind: InstructionKind = InstructionKind.VANILLA
    permutation_seed: Optional[int] = None
    nonsense_text: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', InstructionKind(self.kind))

        if self.kind == InstructionKind.PERMUTED and self.permutation_seed is None:
            raise ValueError('Permuted instruction requires a permutation seed')
        if self.kind == InstructionKind.NONSENSE and not self.nonsense_text:
            raise ValueError('Nonsense instruction requires nonsense text')

    @classmethod
    def vanilla(cls) -> 'InstructionVariant':
        return cls(InstructionKind.VANILLA)

    @classmethod
    def permuted(cls, seed: int) -> 'InstructionVariant':
        return cls(InstructionKind.PERMUTED, permutation_seed=seed)

    @classmethod
    def nonsense(cls, text: str = DEFAULT_NONSENSE) -> 'InstructionVariant':
        return cls(InstructionKind.NONSENSE, nonsense_text=text)

    @classmethod
    def none(cls) -> 'InstructionVariant':
        return cls(InstructionKind.NONE)

    @classmethod
    def from_name(cls, name: str, permutation_seed: int = 0, nonsense_text: str = DEFAULT_NONSENSE):
        kind = InstructionKind(name)
        if kind == InstructionKind.PERMUTED:
            return cls.permuted(permutation_seed)
        if kind == InstructionKind.NONSENSE:
            return cls.nonsense(nonsense_text)
        return cls(kind)


class Mode(str, enum.Enum):
    TRAIN = 'train'
    EVAL = 'eval'


@dataclass(frozen=True)
class Demonstration:
    sentence: Sentence
    response_text: str


@dataclass(frozen=True)
class DemonstrationSegments:
    example: char_range_t
    response: char_range_t


@dataclass(frozen=True)
class Segments:
    instruction: Optional[char_range_t]
    demonstrations: Tuple[DemonstrationSegments, ...]
    query_example: char_range_t
    query_response: Optional[char_range_t]

    def ordered(self) -> List[Tuple[str, char_range_t]]:
        ranges = []
        if self.instruction is not None:
            ranges.append(('instruction', self.instruction))
        for i, demonstration in enumerate(self.demonstrations):
            ranges.append((f'demonstration_{i}_example', demonstration.example))
            ranges.append((f'demonstration_{i}_response', demonstration.response))
        ranges.append(('query_example', self.query_example))
        if self.query_response is not None:
            ranges.append(('query_response', self.query_response))
        return ranges

    def response_ranges(self) -> List[char_range_t]:
        ranges = [demonstration.response for demonstration in self.demonstrations]
        if self.query_response is not None:
            ranges.append(self.query_response)
        return ranges

    def to_dict(self) -> dict:
        return {
            'instruction': self.instruction,
            'demonstrations': [
                {'example': it.example, 'response': it.response} for it in self.demonstrations
            ],
            'query_example': self.query_example,
            'query_response': self.query_response,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'Segments':
        def as_range(value) -> Optional[char_range_t]:
            return tuple(value) if value is not None else None

        return cls(
            instruction=as_range(data['instruction']),
            demonstrations=tuple(
                DemonstrationSegments(as_range(it['example']), as_range(it['response']))
                for it in data['demonstrations']
            ),
            query_example=as_range(data['query_example']),
            query_response=as_range(data['query_response'])
        )

    def map(self, convert) -> 'Segments':
        def apply(value):
            return convert(value) if value is not None else None

        return Segments(
            instruction=apply(self.instruction),
            demonstrations=tuple(
                DemonstrationSegments(convert(it.example), convert(it.response)) for it in self.demonstrations
            ),
            query_example=convert(self.query_example),
            query_response=apply(self.query_response)
        )


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    segments: Segments
    has_eos: bool
    id: str = ''
    variant: str = InstructionKind.VANILLA.value

    @property
    def mode(self) -> Mode:
        return Mode.TRAIN if self.segments.query_response is not None else Mode.EVAL

    @property
    def n_shots(self) -> int:
        return len(self.segments.demonstrations)

    def to_record(self) -> dict:
        def to_bytes(value: char_range_t) -> byte_range_t:
            start, end = value
            return len(self.text[:start].encode('utf-8')), len(self.text[:end].encode('utf-8'))

        return {
            'id': self.id,
            'text': self.text,
            'segments': self.segments.map(to_bytes).to_dict(),
            'n_shots': self.n_shots,
            'variant': self.variant,
            'mode': self.mode.value,
        }

    @classmethod
    def from_record(cls, record: dict) -> 'RenderedPrompt':
        text = record['text']
        encoded = text.encode('utf-8')

        def to_chars(value: byte_range_t) -> char_range_t:
            start, end = value
            return len(encoded[:start].decode('utf-8')), len(encoded[:end].decode('utf-8'))

        segments = Segments.from_dict(record['segments']).map(to_chars)
        return cls(
            text=text,
            segments=segments,
            has_eos=record['mode'] == Mode.TRAIN.value,
            id=record['id'],
            variant=record['variant']
        )


def span_text(sentence: Sentence, span: SpanAnnotation) -> str:
    return ' '.join(sentence.tokens[span.start:span.end])


def render_response(sentence: Sentence, spans: Sequence[SpanAnnotation]) -> str:
    if not spans:
        return NA

    pieces = []
    for span in spans:
        text = span_text(sentence, span)
        if CLASS_SEPARATOR in text or SPAN_SEPARATOR in text:
            raise GrammarViolation(f'Span {text!r} of sentence {sentence.id} contains a response separator')
        pieces.append(f'{text}{CLASS_SEPARATOR}{span.class_name}')

    return SPAN_SEPARATOR.join(pieces)


def default_instruction(scheme: LabelScheme) -> str:
    return INSTRUCTIONS['srl'] if scheme.verb_conditioned else INSTRUCTIONS['ner']


def make_instruction(
        scheme: LabelScheme,
        base_instruction: Optional[str],
        variant: InstructionVariant
) -> Optional[str]:
    if base_instruction is None:
        base_instruction = default_instruction(scheme)

    if variant.kind == InstructionKind.NONE:
        return None
    if variant.kind == InstructionKind.NONSENSE:
        return variant.nonsense_text

    if not base_instruction:
        raise ValueError(f'{variant.kind.value} instruction requires a non-empty base instruction')

    if variant.kind == InstructionKind.VANILLA:
        return base_instruction

    words = base_instruction.split()
    Xorshift64Star(variant.permutation_seed).shuffle(words)
    return ' '.join(words)


class _PromptWriter:
    def __init__(self):
        self.__parts: List[str] = []
        self.__length = 0

    def write(self, text: str) -> char_range_t:
        start = self.__length
        self.__parts.append(text)
        self.__length += len(text)
        return start, self.__length

    def separate(self) -> None:
        if self.__length > 0:
            self.write(BLOCK_SEPARATOR)

    @property
    def position(self) -> int:
        return self.__length

    def text(self) -> str:
        return ''.join(self.__parts)


def _example_block(scheme: LabelScheme, sentence: Sentence) -> str:
    block = f'{SENTENCE_MARKER}{BLOCK_SEPARATOR}{" ".join(sentence.tokens)}{BLOCK_SEPARATOR}'

    if scheme.verb_conditioned:
        if sentence.verb_index is None:
            raise VerbRequired(f'Sentence {sentence.id} has no verb but the scheme is verb-conditioned')
        block += f'{VERB_MARKER}{BLOCK_SEPARATOR}{sentence.verb}{BLOCK_SEPARATOR}'

    return block + f'{RESPONSE_MARKER}{BLOCK_SEPARATOR}'


def build_prompt(
        scheme: LabelScheme,
        instruction_variant: InstructionVariant,
        demonstrations: Sequence[Demonstration],
        query: Sentence,
        mode: Mode,
        gold_query_spans: Optional[Sequence[SpanAnnotation]] = None,
        base_instruction: Optional[str] = None,
        prompt_id: Optional[str] = None
) -> RenderedPrompt:
    mode = Mode(mode)
    if mode == Mode.TRAIN and gold_query_spans is None:
        raise MissingGold(f'Training prompt for {query.id} needs the gold query spans')

    writer = _PromptWriter()

    instruction_range = None
    instruction = make_instruction(scheme, base_instruction, instruction_variant)
    if instruction is not None:
        options = OPTIONS_SEPARATOR.join(scheme.classes)
        instruction_range = writer.write(
            f'{INSTRUCTION_MARKER}{BLOCK_SEPARATOR}{instruction}{BLOCK_SEPARATOR}'
            f'{OPTIONS_MARKER}{BLOCK_SEPARATOR}{options}'
        )

    demonstration_ranges = []
    for demonstration in demonstrations:
        writer.separate()
        example = writer.write(_example_block(scheme, demonstration.sentence))
        response = writer.write(demonstration.response_text)
        demonstration_ranges.append(DemonstrationSegments(example, response))

    writer.separate()
    query_example = writer.write(_example_block(scheme, query))

    query_response = None
    if mode == Mode.TRAIN:
        query_response = writer.write(render_response(query, gold_query_spans))

    return RenderedPrompt(
        text=writer.text(),
        segments=Segments(
            instruction=instruction_range,
            demonstrations=tuple(demonstration_ranges),
            query_example=query_example,
            query_response=query_response
        ),
        has_eos=mode == Mode.TRAIN,
        id=prompt_id if prompt_id is not None else query.id,
        variant=instruction_variant.kind.value
    )
