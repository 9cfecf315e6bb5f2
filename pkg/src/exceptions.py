from typing import Optional


class SiftError(Exception):
    pass


class MalformedLine(SiftError, ValueError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f'Line {line_number}: {message}')
        self.line_number = line_number


class UnknownTag(SiftError, ValueError):
    def __init__(self, tag: str, line_number: Optional[int] = None):
        where = f'Line {line_number}: ' if line_number is not None else ''
        super().__init__(f'{where}tag {tag!r} is not in the label scheme')
        self.tag = tag
        self.line_number = line_number


class IobViolation(SiftError, ValueError):
    def __init__(self, position: int, tag: str, previous: str, line_number: Optional[int] = None):
        where = f'Line {line_number}: ' if line_number is not None else f'Position {position}: '
        super().__init__(f'{where}{tag!r} cannot follow {previous!r}')
        self.position = position
        self.line_number = line_number


class MissingVerb(SiftError, ValueError):
    def __init__(self, sentence_id: str, line_number: Optional[int] = None):
        where = f' (ending at line {line_number})' if line_number is not None else ''
        super().__init__(f'Sentence {sentence_id}{where} has no verb column')
        self.sentence_id = sentence_id
        self.line_number = line_number


class OverlapError(SiftError, ValueError):
    pass


class OutOfBounds(SiftError, ValueError):
    pass


class GrammarViolation(SiftError, ValueError):
    pass


class InsufficientPool(SiftError, ValueError):
    def __init__(self, pool_size: int, n_shots: int):
        super().__init__(f'Cannot draw {n_shots} demonstrations from a pool of {pool_size}')
        self.pool_size = pool_size
        self.n_shots = n_shots


class MissingGold(SiftError, ValueError):
    pass


class VerbRequired(SiftError, ValueError):
    pass


class SegmentSplit(SiftError, ValueError):
    pass


class TokenizeFailure(SiftError, ValueError):
    pass


class PromptTooLong(SiftError, ValueError):
    def __init__(self, length: int, max_length: int):
        super().__init__(f'Prompt has {length} tokens, maximum is {max_length}')
        self.length = length
        self.max_length = max_length


class EvalPrompt(SiftError, ValueError):
    pass


class EmptyMask(SiftError, ValueError):
    pass


class EmptyScheme(SiftError, ValueError):
    pass


class UnsupportedConstruct(SiftError, ValueError):
    def __init__(self, construct: str, position: int):
        super().__init__(f'Unsupported regex construct {construct!r} at position {position}')
        self.position = position


class RegexParseError(SiftError, ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f'{message} at position {position}')
        self.position = position


class DeadEnd(SiftError):
    def __init__(self, state: int):
        super().__init__(f'No token is allowed at automaton state {state} and EOS is disallowed')
        self.state = state


class ModelShapeMismatch(SiftError, ValueError):
    pass


class BadDims(SiftError, ValueError):
    pass


class UnknownTokenId(SiftError, ValueError):
    pass


class DivergenceDetected(SiftError):
    def __init__(self, epoch: int, step: int, loss: float, lr: float):
        super().__init__(f'Loss became {loss} at epoch {epoch}, step {step} (lr {lr:.3e})')
        self.epoch = epoch
        self.step = step
        self.loss = loss
        self.lr = lr


class LengthMismatch(SiftError, ValueError):
    pass


class EmptyDataset(SiftError, ValueError):
    pass


class SeedMismatch(SiftError, ValueError):
    pass


class ArtifactMismatch(SiftError):
    pass


class MissingArtifact(SiftError, FileNotFoundError):
    pass
