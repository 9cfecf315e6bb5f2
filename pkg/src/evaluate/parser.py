import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from src.common_types import tags_t
from src.data.corpus import LabelScheme
from src.data.tagging import OUTSIDE
from src.prompt.template import CLASS_SEPARATOR, NA, SPAN_SEPARATOR

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParsedResponse:
    """Exactly one of `is_na` and a non-empty `extractions` holds."""

    extractions: Tuple[Tuple[str, str], ...]
    is_na: bool
    # pieces without exactly one class separator or with an empty side
    malformed: int = 0
    # well-formed pieces naming a class outside the scheme
    invalid: int = 0

    @property
    def usable(self) -> bool:
        return not self.is_na


def first_line(text: str) -> str:
    return text.split('\n', 1)[0]


def parse_response(text: str, scheme: Optional[LabelScheme] = None) -> ParsedResponse:
    line = first_line(text)
    if line == NA:
        return ParsedResponse(extractions=(), is_na=True)

    extractions = []
    malformed = 0
    invalid = 0

    for piece in line.split(SPAN_SEPARATOR):
        if piece.count(CLASS_SEPARATOR) != 1:
            malformed += 1
            continue

        span_text, class_name = piece.split(CLASS_SEPARATOR)
        if not span_text or not class_name:
            malformed += 1
            continue

        if scheme is not None and class_name not in scheme.classes:
            invalid += 1
            continue

        extractions.append((span_text, class_name))

    # nothing usable reads as NA; the counts keep the difference
    return ParsedResponse(extractions=tuple(extractions), is_na=not extractions, malformed=malformed, invalid=invalid)


def _find(tokens: Sequence[str], span_text: str, cursor: int) -> Optional[Tuple[int, int]]:
    # earliest run starting at or after the cursor whose space-joined text is the span
    for start in range(cursor, len(tokens)):
        text = tokens[start]
        end = start + 1
        while len(text) < len(span_text) and end < len(tokens):
            text += ' ' + tokens[end]
            end += 1
        if text == span_text:
            return start, end
    return None


def match_spans(parsed: ParsedResponse, tokens: Sequence[str]) -> Tuple[tags_t, bool]:
    """Greedy span matching. Returns the tags and whether the all-O fallback was taken."""
    outside = [OUTSIDE] * len(tokens)
    if not parsed.usable:
        return outside, True

    try:
        tags = list(outside)
        cursor = 0
        matched = 0

        for span_text, class_name in parsed.extractions:
            found = _find(tokens, span_text, cursor)
            if found is None:
                continue

            start, end = found
            tags[start] = f'B-{class_name}'
            for i in range(start + 1, end):
                tags[i] = f'I-{class_name}'

            cursor = end
            matched += 1
    except Exception as e:
        logger.debug('Span matching failed, falling back to all-O: %s', e)
        return outside, True

    if matched == 0:
        return outside, True
    return tags, False


def map_spans_to_iob2(parsed: ParsedResponse, tokens: Sequence[str]) -> tags_t:
    return match_spans(parsed, tokens)[0]
