from typing import List, Sequence

from src.data.corpus import Sentence
from src.exceptions import InsufficientPool
from src.prompt.prng import Xorshift64Star
from src.prompt.template import Demonstration, render_response


def sample_demonstrations(
        train_split: Sequence[Sentence],
        query_id: str,
        n_shots: int,
        seed: int
) -> List[Demonstration]:
    if n_shots < 0:
        raise ValueError(f'Invalid number of shots: {n_shots}')
    if n_shots == 0:
        return []

    pool = [sentence for sentence in train_split if sentence.id != query_id]
    if len(pool) < n_shots:
        raise InsufficientPool(len(pool), n_shots)

    rng = Xorshift64Star.for_key(seed, query_id)

    return [
        Demonstration(sentence=sentence, response_text=render_response(sentence, sentence.spans))
        for sentence in rng.sample(pool, n_shots)
    ]
