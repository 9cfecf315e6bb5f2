"""Deterministic 64-bit generator for demonstration sampling and instruction permutation.

The state is seeded through SplitMix64 and advanced with xorshift64*
(Vigna, 2016). Outputs are identical on every platform and Python version,
unlike `random.Random`, whose sampling helpers changed between releases.
"""
from typing import List, MutableSequence, Sequence, TypeVar

T = TypeVar('T')

MASK_64 = (1 << 64) - 1

FNV_OFFSET = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3


def fnv1a_64(text: str) -> int:
    value = FNV_OFFSET
    for byte in text.encode('utf-8'):
        value ^= byte
        value = (value * FNV_PRIME) & MASK_64
    return value


def splitmix64(value: int) -> int:
    value = (value + 0x9e3779b97f4a7c15) & MASK_64
    value = ((value ^ (value >> 30)) * 0xbf58476d1ce4e5b9) & MASK_64
    value = ((value ^ (value >> 27)) * 0x94d049bb133111eb) & MASK_64
    return value ^ (value >> 31)


class Xorshift64Star:
    def __init__(self, seed: int):
        state = splitmix64(seed & MASK_64)
        # xorshift has a fixed point at zero
        self.__state = state if state != 0 else 0x9e3779b97f4a7c15

    @classmethod
    def for_key(cls, seed: int, key: str) -> 'Xorshift64Star':
        return cls(splitmix64(seed & MASK_64) ^ fnv1a_64(key))

    def next_u64(self) -> int:
        x = self.__state
        x ^= x >> 12
        x ^= (x << 25) & MASK_64
        x ^= x >> 27
        self.__state = x
        return (x * 0x2545f4914f6cdd1d) & MASK_64

    def below(self, bound: int) -> int:
        if bound <= 0:
            raise ValueError(f'Invalid bound: {bound}')

        # rejection sampling, no modulo bias
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            value = self.next_u64()
            if value < limit:
                return value % bound

    def shuffle(self, items: MutableSequence[T]) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, population: Sequence[T], k: int) -> List[T]:
        if not 0 <= k <= len(population):
            raise ValueError(f'Sample size {k} outside population of {len(population)}')

        pool = list(population)
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
