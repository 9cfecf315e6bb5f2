import json
import re
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from src.common_types import char_range_t, token_ids_t
from src.exceptions import TokenizeFailure

PAD_TOKEN = '<pad>'
EOS_TOKEN = '<eos>'
UNK_TOKEN = '<unk>'

WORD = 'word'
CHAR = 'char'

# newline runs and '#' runs stay whole so template markers cost few tokens
_WORD_PATTERN = re.compile(r'\w+|\n+|#+|\s|[^\w\s]')


def _is_reserved(token: str) -> bool:
    return len(token) > 2 and token.startswith('<') and token.endswith('>')


class TokenizerSpec:
    def __init__(
            self,
            tokens: Sequence[str],
            eos_id: int,
            pad_id: int,
            kind: str = WORD
    ):
        if kind not in (WORD, CHAR):
            raise ValueError(f'Unknown tokenizer kind: {kind}')
        if pad_id == eos_id:
            raise ValueError('Padding token must differ from the end-of-sequence token')
        if not (0 <= eos_id < len(tokens) and 0 <= pad_id < len(tokens)):
            raise ValueError('Special token ids out of vocabulary range')
        if len(set(tokens)) != len(tokens):
            raise ValueError('Vocabulary tokens must be unique')

        self.vocabulary = list(tokens)
        self.eos_id = eos_id
        self.pad_id = pad_id
        self.kind = kind

        self.special_ids = frozenset(i for i, token in enumerate(self.vocabulary) if _is_reserved(token))
        self.special_ids |= {eos_id, pad_id}

        self.__ids: Dict[str, int] = {
            token: i for i, token in enumerate(self.vocabulary) if i not in self.special_ids
        }

    def __len__(self):
        return len(self.vocabulary)

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    def token_text(self, token_id: int) -> str:
        return '' if token_id in self.special_ids else self.vocabulary[token_id]

    def _pieces(self, text: str) -> Iterable[Tuple[str, int]]:
        if self.kind == CHAR:
            return ((ch, i) for i, ch in enumerate(text))
        return ((match.group(), match.start()) for match in _WORD_PATTERN.finditer(text))

    def encode_with_offsets(self, text: str) -> Tuple[token_ids_t, List[char_range_t]]:
        ids = []
        offsets = []

        for piece, start in self._pieces(text):
            token_id = self.__ids.get(piece)
            if token_id is not None:
                ids.append(token_id)
                offsets.append((start, start + len(piece)))
                continue

            # unknown word, fall back to characters
            for i, ch in enumerate(piece):
                token_id = self.__ids.get(ch)
                if token_id is None:
                    raise TokenizeFailure(f'Cannot tokenize {piece!r} at character {start}: {ch!r} not in vocabulary')
                ids.append(token_id)
                offsets.append((start + i, start + i + 1))

        return ids, offsets

    def encode(self, text: str) -> token_ids_t:
        return self.encode_with_offsets(text)[0]

    def decode(self, ids: Iterable[int]) -> str:
        return ''.join(self.token_text(i) for i in ids)

    def to_dict(self) -> dict:
        return {'tokens': self.vocabulary, 'eos': self.eos_id, 'pad': self.pad_id, 'kind': self.kind}

    def save(self, path: str or Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False), encoding='utf-8')

    @classmethod
    def from_dict(cls, data: dict) -> 'TokenizerSpec':
        tokens = data['tokens']
        eos_id = data['eos']

        pad_id = data.get('pad')
        if pad_id is None:
            pad_id = substitute_pad_id(tokens, eos_id)

        return cls(tokens, eos_id=eos_id, pad_id=pad_id, kind=data.get('kind', WORD))

    @classmethod
    def load(cls, path: str or Path) -> 'TokenizerSpec':
        return cls.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))


def substitute_pad_id(tokens: Sequence[str], eos_id: int) -> int:
    # reserved tokens first, <unk> as the last resort; never EOS
    candidates = [i for i, token in enumerate(tokens) if _is_reserved(token) and token != UNK_TOKEN and i != eos_id]
    candidates += [i for i, token in enumerate(tokens) if token == UNK_TOKEN and i != eos_id]

    if not candidates:
        raise ValueError('Vocabulary defines no padding token and no reserved token can substitute it')
    return candidates[0]


def _build(pieces: Iterable[str], kind: str, extra: Sequence[str]) -> TokenizerSpec:
    vocabulary = sorted(set(pieces) | set(extra))
    tokens = [PAD_TOKEN, EOS_TOKEN] + [token for token in vocabulary if token not in (PAD_TOKEN, EOS_TOKEN)]
    return TokenizerSpec(tokens, eos_id=1, pad_id=0, kind=kind)


def build_word_tokenizer(texts: Iterable[str], extra: Sequence[str] = ()) -> TokenizerSpec:
    pieces = set()
    for text in texts:
        pieces.update(match.group() for match in _WORD_PATTERN.finditer(text))
        # single characters back the unknown-word fallback
        pieces.update(text)
    return _build(pieces, WORD, extra)


def build_char_tokenizer(texts: Iterable[str], extra: Sequence[str] = ()) -> TokenizerSpec:
    pieces = (ch for text in texts for ch in text)
    return _build(pieces, CHAR, extra)


def build_tokenizer(kind: str, texts: Iterable[str], extra: Sequence[str] = ()) -> TokenizerSpec:
    if kind == WORD:
        return build_word_tokenizer(texts, extra)
    if kind == CHAR:
        return build_char_tokenizer(texts, extra)
    raise ValueError(f'Unknown tokenizer kind: {kind}')
