from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import List, Optional, Tuple

from src.common_types import char_range_t, token_range_t
from src.exceptions import PromptTooLong, SegmentSplit
from src.lossmask.tokenizer import TokenizerSpec
from src.prompt.template import DemonstrationSegments, RenderedPrompt, Segments

DEFAULT_MAX_LENGTH = 1024


@dataclass(frozen=True)
class TokenizedPrompt:
    ids: Tuple[int, ...]
    segment_token_ranges: Segments
    eos_appended: bool
    id: str = ''

    def __len__(self):
        return len(self.ids)


class _Aligner:
    def __init__(self, offsets: List[char_range_t]):
        self.__starts = [start for start, _ in offsets]
        self.__ends = [end for _, end in offsets]

    def cover(self, value: char_range_t) -> token_range_t:
        # minimal token range touching any character of the segment
        start, end = value
        if start == end:
            position = bisect_left(self.__starts, start)
            return position, position

        first = bisect_right(self.__ends, start)
        last = bisect_left(self.__starts, end)
        return first, last


def _overlaps(a: token_range_t, b: token_range_t) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def _trim(value: token_range_t, claimed: List[token_range_t]) -> token_range_t:
    start, end = value
    for other in claimed:
        if not _overlaps((start, end), other):
            continue
        if other[0] <= start:
            start = min(max(start, other[1]), end)
        if other[1] >= end:
            end = max(min(end, other[0]), start)
    return start, end


def tokenize_with_segments(
        prompt: RenderedPrompt,
        tok: TokenizerSpec,
        max_length: Optional[int] = DEFAULT_MAX_LENGTH
) -> TokenizedPrompt:
    ids, offsets = tok.encode_with_offsets(prompt.text)
    aligner = _Aligner(offsets)
    segments = prompt.segments

    # response ranges keep every boundary token they touch
    responses = [aligner.cover(value) for value in segments.response_ranges()]
    for i in range(1, len(responses)):
        if _overlaps(responses[i - 1], responses[i]):
            raise SegmentSplit(f'Prompt {prompt.id}: a token is shared by two responses')

    previous_end = 0

    def place(value: Optional[char_range_t]) -> Optional[token_range_t]:
        nonlocal previous_end
        if value is None:
            return None
        start, end = _trim(aligner.cover(value), responses)
        start = max(start, previous_end)
        end = max(end, start)
        previous_end = end
        return start, end

    def place_response(index: int) -> token_range_t:
        nonlocal previous_end
        value = responses[index]
        if value[0] < previous_end:
            raise SegmentSplit(f'Prompt {prompt.id}: a token straddles the start of a response')
        previous_end = value[1]
        return value

    instruction = place(segments.instruction)
    demonstrations = []
    for i, demonstration in enumerate(segments.demonstrations):
        example = place(demonstration.example)
        demonstrations.append(DemonstrationSegments(example, place_response(i)))
    query_example = place(segments.query_example)

    query_response = None
    if segments.query_response is not None:
        query_response = place_response(len(responses) - 1)

    if prompt.has_eos:
        ids = ids + [tok.eos_id]
        query_response = (query_response[0], len(ids)) if query_response is not None else (len(ids) - 1, len(ids))

    if max_length is not None and len(ids) > max_length:
        raise PromptTooLong(len(ids), max_length)

    return TokenizedPrompt(
        ids=tuple(ids),
        segment_token_ranges=Segments(
            instruction=instruction,
            demonstrations=tuple(demonstrations),
            query_example=query_example,
            query_response=query_response
        ),
        eos_appended=prompt.has_eos,
        id=prompt.id
    )


def decode_range(tp: TokenizedPrompt, tok: TokenizerSpec, value: token_range_t) -> str:
    return tok.decode(tp.ids[value[0]:value[1]])
