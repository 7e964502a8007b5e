"""Seeded pseudo-random functions on tuples of integers (splitmix64 mixing).

Used to draw reproducible random protocols: a function is fully described by
its integer salt and output alphabet.
"""

from __future__ import annotations

from typing import Callable

_MASK = (1 << 64) - 1


def _splitmix(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _digest(salt: int, args) -> int:
    h = salt & _MASK
    for a in _flatten(args):
        h = _splitmix(h ^ (int(a) + 0x632BE59BD9B4E019) & _MASK)
    return h


def _flatten(v):
    if isinstance(v, tuple):
        yield len(v) + 1_000_003
        for x in v:
            yield from _flatten(x)
    else:
        yield v


def random_function(salt: int, alphabet: int) -> Callable:
    """Deterministic pseudo-random map from any tuple of integer arguments to range(alphabet)."""
    return lambda *args: _digest(salt, args) % alphabet
