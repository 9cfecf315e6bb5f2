"""Regex compiler for the response grammar.

Supported subset: literal characters (backslash escapes a metacharacter),
alternation `|`, grouping `(...)`, the quantifiers `*` and `+`, and negated
character classes `[^...]`. Negated classes are expanded against a finite
alphabet, so the compiled automaton only knows characters from that alphabet
and the literals of the pattern.

Pipeline: recursive-descent parser -> Thompson NFA -> subset construction ->
dead-state pruning -> Moore minimization (optional).
"""
import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from src.exceptions import RegexParseError, UnsupportedConstruct
from src.grammar.regex import META_CHARACTERS, PRINTABLE_ASCII

logger = logging.getLogger(__name__)

_label_t = Optional[FrozenSet[str]]  # None is an epsilon edge


class _Nfa:
    def __init__(self):
        self.edges: List[List[Tuple[_label_t, int]]] = []

    def new_state(self) -> int:
        self.edges.append([])
        return len(self.edges) - 1

    def connect(self, source: int, target: int, label: _label_t = None) -> None:
        self.edges[source].append((label, target))

    def epsilon_closure(self, states: Iterable[int]) -> FrozenSet[int]:
        closure = set(states)
        stack = list(closure)
        while stack:
            state = stack.pop()
            for label, target in self.edges[state]:
                if label is None and target not in closure:
                    closure.add(target)
                    stack.append(target)
        return frozenset(closure)


# fragment: (start, accept)
_fragment_t = Tuple[int, int]


class _RegexParser:
    """
    expr   -> term ('|' term)*
    term   -> factor*
    factor -> atom ('*' | '+')*
    atom   -> '(' expr ')' | '[^' class ']' | '\\' meta | literal
    """

    def __init__(self, pattern: str, alphabet: FrozenSet[str], nfa: _Nfa):
        self.pattern = pattern
        self.alphabet = alphabet
        self.nfa = nfa
        self.pos = 0

    def peek(self) -> Optional[str]:
        return self.pattern[self.pos] if self.pos < len(self.pattern) else None

    def advance(self) -> str:
        if self.pos >= len(self.pattern):
            raise RegexParseError('Unexpected end of pattern', self.pos)
        ch = self.pattern[self.pos]
        self.pos += 1
        return ch

    def parse(self) -> _fragment_t:
        fragment = self.parse_expr()
        if self.pos < len(self.pattern):
            raise RegexParseError(f'Unexpected {self.pattern[self.pos]!r}', self.pos)
        return fragment

    def parse_expr(self) -> _fragment_t:
        branches = [self.parse_term()]
        while self.peek() == '|':
            self.advance()
            branches.append(self.parse_term())

        if len(branches) == 1:
            return branches[0]

        start, accept = self.nfa.new_state(), self.nfa.new_state()
        for branch_start, branch_accept in branches:
            self.nfa.connect(start, branch_start)
            self.nfa.connect(branch_accept, accept)
        return start, accept

    def parse_term(self) -> _fragment_t:
        fragments = []
        while self.peek() is not None and self.peek() not in '|)':
            fragments.append(self.parse_factor())

        if not fragments:
            state = self.nfa.new_state()
            return state, state

        for (_, previous_accept), (next_start, _) in zip(fragments, fragments[1:]):
            self.nfa.connect(previous_accept, next_start)
        return fragments[0][0], fragments[-1][1]

    def parse_factor(self) -> _fragment_t:
        fragment = self.parse_atom()

        while self.peek() in ('*', '+'):
            quantifier = self.advance()

            inner_start, inner_accept = fragment
            start, accept = self.nfa.new_state(), self.nfa.new_state()
            self.nfa.connect(start, inner_start)
            self.nfa.connect(inner_accept, inner_start)
            self.nfa.connect(inner_accept, accept)
            if quantifier == '*':
                self.nfa.connect(start, accept)
            fragment = start, accept

        return fragment

    def parse_atom(self) -> _fragment_t:
        position = self.pos
        ch = self.advance()

        if ch == '(':
            if self.peek() == '?':
                raise UnsupportedConstruct('(?', position)
            fragment = self.parse_expr()
            if self.peek() != ')':
                raise RegexParseError('Unbalanced parenthesis', position)
            self.advance()
            return fragment

        if ch == '[':
            return self.labelled(self.parse_class(position))

        if ch == '\\':
            if self.peek() is None:
                raise RegexParseError('Dangling escape', position)
            escaped = self.advance()
            if escaped not in META_CHARACTERS:
                raise UnsupportedConstruct(f'\\{escaped}', position)
            return self.labelled(frozenset(escaped))

        if ch in ('*', '+'):
            raise RegexParseError(f'Nothing to repeat with {ch!r}', position)
        if ch == ')':
            raise RegexParseError('Unbalanced parenthesis', position)
        if ch in '?{}.^$]':
            raise UnsupportedConstruct(ch, position)

        return self.labelled(frozenset(ch))

    def parse_class(self, position: int) -> FrozenSet[str]:
        if self.peek() != '^':
            raise UnsupportedConstruct('[', position)
        self.advance()

        excluded = set()
        while True:
            if self.peek() is None:
                raise RegexParseError('Unterminated character class', position)
            ch = self.advance()
            if ch == ']':
                break
            if ch == '\\':
                ch = self.advance()
            excluded.add(ch)

        if not excluded:
            raise RegexParseError('Empty character class', position)
        return frozenset(self.alphabet - excluded)

    def labelled(self, label: FrozenSet[str]) -> _fragment_t:
        start, accept = self.nfa.new_state(), self.nfa.new_state()
        self.nfa.connect(start, accept, label)
        return start, accept


@dataclass(frozen=True)
class Dfa:
    start: int
    accepting: FrozenSet[int]
    transitions: Tuple[Dict[str, int], ...]
    alphabet: FrozenSet[str]

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    def step(self, state: int, ch: str) -> Optional[int]:
        return self.transitions[state].get(ch)

    def walk(self, text: str, state: Optional[int] = None) -> Optional[int]:
        state = self.start if state is None else state
        for ch in text:
            state = self.transitions[state].get(ch)
            if state is None:
                return None
        return state

    def accepts(self, text: str) -> bool:
        state = self.walk(text)
        return state is not None and state in self.accepting


def _subset_construction(nfa: _Nfa, start: int, accept: int) -> Tuple[List[Dict[str, int]], Set[int]]:
    initial = nfa.epsilon_closure([start])
    index = {initial: 0}
    transitions: List[Dict[str, int]] = [{}]
    accepting = set()

    queue = deque([initial])
    while queue:
        current = queue.popleft()
        source = index[current]
        if accept in current:
            accepting.add(source)

        moves: Dict[str, Set[int]] = {}
        for state in current:
            for label, target in nfa.edges[state]:
                if label is None:
                    continue
                for ch in label:
                    moves.setdefault(ch, set()).add(target)

        for ch in sorted(moves):
            closure = nfa.epsilon_closure(moves[ch])
            if closure not in index:
                index[closure] = len(transitions)
                transitions.append({})
                queue.append(closure)
            transitions[source][ch] = index[closure]

    return transitions, accepting


def _renumber(
        start: int,
        transitions: List[Dict[str, int]],
        accepting: Set[int],
        keep: Set[int]
) -> Tuple[List[Dict[str, int]], Set[int]]:
    # breadth-first order from the start state, sorted characters, for stable ids
    order = {start: 0}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        for ch in sorted(transitions[state]):
            target = transitions[state][ch]
            if target in keep and target not in order:
                order[target] = len(order)
                queue.append(target)

    renumbered = [{} for _ in order]
    for state, new_id in order.items():
        renumbered[new_id] = {
            ch: order[target] for ch, target in transitions[state].items() if target in order
        }
    return renumbered, {order[state] for state in accepting if state in order}


def _prune_dead(
        start: int,
        transitions: List[Dict[str, int]],
        accepting: Set[int]
) -> Tuple[List[Dict[str, int]], Set[int]]:
    reverse: Dict[int, Set[int]] = {}
    for source, edges in enumerate(transitions):
        for target in edges.values():
            reverse.setdefault(target, set()).add(source)

    live = set(accepting)
    stack = list(accepting)
    while stack:
        state = stack.pop()
        for source in reverse.get(state, ()):
            if source not in live:
                live.add(source)
                stack.append(source)

    # an empty language still keeps its start state
    live.add(start)
    return _renumber(start, transitions, accepting, live)


def _minimize(
        transitions: List[Dict[str, int]],
        accepting: Set[int],
        alphabet: List[str]
) -> Tuple[List[Dict[str, int]], Set[int]]:
    blocks = [1 if state in accepting else 0 for state in range(len(transitions))]

    while True:
        signatures = {}
        refined = []
        for state, edges in enumerate(transitions):
            signature = (blocks[state],) + tuple(
                blocks[edges[ch]] if ch in edges else -1 for ch in alphabet
            )
            refined.append(signatures.setdefault(signature, len(signatures)))

        stable = len(signatures) == len(set(blocks))
        blocks = refined
        if stable:
            break

    merged: List[Dict[str, int]] = [{} for _ in range(len(set(blocks)))]
    for state, edges in enumerate(transitions):
        merged[blocks[state]] = {ch: blocks[target] for ch, target in edges.items()}

    merged_accepting = {blocks[state] for state in accepting}
    return _renumber(blocks[0], merged, merged_accepting, set(range(len(merged))))


def compile_regex(
        pattern: str,
        alphabet: Optional[FrozenSet[str]] = None,
        minimize: bool = True
) -> Dfa:
    alphabet = PRINTABLE_ASCII if alphabet is None else frozenset(alphabet)

    nfa = _Nfa()
    start, accept = _RegexParser(pattern, alphabet, nfa).parse()

    transitions, accepting = _subset_construction(nfa, start, accept)
    transitions, accepting = _prune_dead(0, transitions, accepting)

    used = sorted({ch for edges in transitions for ch in edges})
    if minimize:
        transitions, accepting = _minimize(transitions, accepting, used)

    logger.debug('Compiled %r into %d DFA states (%d NFA states)', pattern, len(transitions), len(nfa.edges))

    return Dfa(
        start=0,
        accepting=frozenset(accepting),
        transitions=tuple(transitions),
        alphabet=frozenset(used)
    )
