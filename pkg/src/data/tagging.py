from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from src.common_types import tags_t
from src.exceptions import IobViolation, OutOfBounds, OverlapError

OUTSIDE = 'O'


@dataclass(frozen=True, order=True)
class SpanAnnotation:
    start: int
    end: int
    class_name: str


def split_tag(tag: str) -> Tuple[str, Optional[str]]:
    # 'B-ARGM-TMP' -> ('B', 'ARGM-TMP')
    if tag == OUTSIDE:
        return OUTSIDE, None

    prefix, sep, class_name = tag.partition('-')
    if not sep or prefix not in ('B', 'I') or not class_name:
        raise ValueError(f'Not an IOB2 tag: {tag!r}')

    return prefix, class_name


def check_iob2(tags: Sequence[str]) -> None:
    previous = OUTSIDE
    previous_class = None

    for i, tag in enumerate(tags):
        try:
            prefix, class_name = split_tag(tag)
        except ValueError:
            raise IobViolation(i, tag, tags[i - 1] if i > 0 else '<start>')

        if prefix == 'I' and (previous == OUTSIDE or previous_class != class_name):
            raise IobViolation(i, tag, tags[i - 1] if i > 0 else '<start>')

        previous, previous_class = prefix, class_name


def tags_to_spans(tags: Sequence[str]) -> List[SpanAnnotation]:
    check_iob2(tags)

    spans = []
    start = None
    current = None

    for i, tag in enumerate(tags):
        prefix, class_name = split_tag(tag)

        if prefix == 'I':
            continue

        if start is not None:
            spans.append(SpanAnnotation(start, i, current))
            start, current = None, None

        if prefix == 'B':
            start, current = i, class_name

    if start is not None:
        spans.append(SpanAnnotation(start, len(tags), current))

    return spans


def spans_to_tags(spans: Sequence[SpanAnnotation], sentence_len: int) -> tags_t:
    tags = [OUTSIDE] * sentence_len

    cursor = 0
    for span in spans:
        if span.start < 0 or span.end > sentence_len or span.start >= span.end:
            raise OutOfBounds(f'Span {span} does not fit a sentence of length {sentence_len}')
        if span.start < cursor:
            raise OverlapError(f'Span {span} overlaps or precedes the previous span ending at {cursor}')

        tags[span.start] = f'B-{span.class_name}'
        for i in range(span.start + 1, span.end):
            tags[i] = f'I-{span.class_name}'

        cursor = span.end

    return tags
