from dataclasses import dataclass
from typing import FrozenSet, Iterable, Sequence, Tuple

from src.data.corpus import LabelScheme
from src.exceptions import EmptyScheme, GrammarViolation

META_CHARACTERS = frozenset('\\()|*+?[]{}.^$')

PRINTABLE_ASCII = frozenset(chr(i) for i in range(32, 127))


@dataclass(frozen=True)
class ResponseRegex:
    pattern: str
    classes: Tuple[str, ...]


def escape(text: str) -> str:
    return ''.join(f'\\{ch}' if ch in META_CHARACTERS else ch for ch in text)


def build_response_regex(scheme: LabelScheme or Sequence[str]) -> ResponseRegex:
    classes = tuple(scheme.classes if isinstance(scheme, LabelScheme) else scheme)
    if not classes:
        raise EmptyScheme('The label scheme has no classes')

    for class_name in classes:
        if not class_name or ':' in class_name or ';' in class_name:
            raise GrammarViolation(f'Class name {class_name!r} cannot be expressed in the response grammar')

    alternatives = '|'.join(escape(class_name) for class_name in classes)
    pattern = f'NA|([^:;]+:({alternatives});)*[^:;]+:({alternatives})'

    return ResponseRegex(pattern=pattern, classes=classes)


def default_alphabet(texts: Iterable[str] = ()) -> FrozenSet[str]:
    # printable ASCII plus every non-control character seen in the corpus
    extra = {ch for text in texts for ch in text if ch.isprintable()}
    return PRINTABLE_ASCII | frozenset(extra)
