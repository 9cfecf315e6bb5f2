import json
import logging
from pathlib import Path
from typing import Dict, List, Optional

from tqdm import tqdm

from src.common_types import token_edges_t
from src.grammar.automaton import Dfa
from src.lossmask.tokenizer import TokenizerSpec

logger = logging.getLogger(__name__)


class TokenFsmIndex:
    def __init__(
            self,
            token_edges: token_edges_t,
            accepting: List[bool],
            eos_id: int,
            vocab_size: int,
            start: int = 0
    ):
        if not 0 <= start < len(accepting):
            raise ValueError(f'Start state {start} outside of {len(accepting)} states')

        self.__token_edges = {state: dict(edges) for state, edges in token_edges.items()}
        self.__accepting = list(accepting)
        self.__allowed = {state: sorted(edges) for state, edges in self.__token_edges.items()}

        self.eos_id = eos_id
        self.vocab_size = vocab_size
        self.start = start

    @property
    def n_states(self) -> int:
        return len(self.__accepting)

    @property
    def token_edges(self) -> token_edges_t:
        return self.__token_edges

    def eos_allowed(self, state: int) -> bool:
        return self.__accepting[state]

    def allowed_tokens(self, state: int) -> List[int]:
        allowed = list(self.__allowed.get(state, []))
        if self.eos_allowed(state):
            allowed.append(self.eos_id)
        return allowed

    def next_state(self, state: int, token_id: int) -> Optional[int]:
        return self.__token_edges.get(state, {}).get(token_id)

    def to_json(self) -> dict:
        return {
            'states': self.n_states,
            'start': self.start,
            'accepting': [state for state, accepting in enumerate(self.__accepting) if accepting],
            'eos': self.eos_id,
            'vocab_size': self.vocab_size,
            'token_edges': {
                str(state): {str(token_id): target for token_id, target in sorted(edges.items())}
                for state, edges in sorted(self.__token_edges.items())
            }
        }

    @classmethod
    def from_json(cls, data: dict) -> 'TokenFsmIndex':
        accepting = set(data['accepting'])
        return cls(
            token_edges={
                int(state): {int(token_id): int(target) for token_id, target in edges.items()}
                for state, edges in data['token_edges'].items()
            },
            accepting=[state in accepting for state in range(data['states'])],
            eos_id=data['eos'],
            vocab_size=data['vocab_size'],
            start=data.get('start', 0)
        )

    def save(self, path: str or Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding='utf-8')

    @classmethod
    def load(cls, path: str or Path) -> 'TokenFsmIndex':
        return cls.from_json(json.loads(Path(path).read_text(encoding='utf-8')))


def index_vocabulary(dfa: Dfa, tok: TokenizerSpec) -> TokenFsmIndex:
    texts = [(token_id, tok.token_text(token_id)) for token_id in range(tok.vocab_size)]
    # specials decode to nothing and never advance the automaton
    texts = [(token_id, text) for token_id, text in texts if text]

    token_edges: Dict[int, Dict[int, int]] = {}
    states = tqdm(range(dfa.n_states), leave=False)
    states.set_description('Indexing {:d} tokens'.format(len(texts)))
    for state in states:
        edges = {}
        for token_id, text in texts:
            target = dfa.walk(text, state)
            if target is not None:
                edges[token_id] = target
        token_edges[state] = edges

    # a state is live when some token path reaches an accepting state
    live = set(dfa.accepting)
    changed = True
    while changed:
        changed = False
        for state, edges in token_edges.items():
            if state not in live and any(target in live for target in edges.values()):
                live.add(state)
                changed = True

    token_edges = {
        state: {token_id: target for token_id, target in edges.items() if target in live}
        for state, edges in token_edges.items()
    }

    logger.debug(
        'Indexed %d tokens over %d states, %d edges',
        len(texts), dfa.n_states, sum(len(edges) for edges in token_edges.values())
    )

    return TokenFsmIndex(
        token_edges=token_edges,
        accepting=[state in dfa.accepting for state in range(dfa.n_states)],
        eos_id=tok.eos_id,
        vocab_size=tok.vocab_size,
        start=dfa.start
    )
