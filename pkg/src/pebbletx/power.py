"""The block-copy function power_k and its regular post-processing pipeline.

power_k(w) concatenates, for every tuple t over {0..n}^(k-1) in lexicographic
order, a copy of #w whose position t(j) carries mark j (the separator # is
position 0).  Marked letters serialize as ``a%{1,3}``; composing with a
regular function over the marked alphabet captures exactly the degree-k
transducer functions, which the difftest harness checks at bounded length.
"""

from __future__ import annotations

import itertools
from typing import Iterable

from .core import Letter, OnePebbleTransducer, Word
from .semantics import RunResult, run1

SEPARATOR = "#"


def marked_token(base: str, marks) -> str:
    if not marks:
        return base
    return f"{base}%{{{','.join(str(m) for m in sorted(marks))}}}"


def marked_letter(base: str, marks=()) -> Letter:
    return Letter(marked_token(base, marks))


def power_k(w: Word, k: int, index_from_zero: bool = True,
            one_is_identity: bool = False) -> Word:
    """All (k-1)-tuples of marked copies of #w, lexicographically.

    ``index_from_zero`` switches the tuple range between {0..n} (the default,
    matching the worked block count of n+1 copies per coordinate) and {1..n}.
    ``one_is_identity`` makes k = 1 return the word unchanged instead of the
    single #-prefixed block.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if k == 1 and one_is_identity:
        return tuple(w)
    n = len(w)
    positions = range(0, n + 1) if index_from_zero else range(1, n + 1)
    out = []
    bases = [SEPARATOR] + [letter.base for letter in w]
    for t in itertools.product(positions, repeat=k - 1):
        for i, base in enumerate(bases):
            marks = [j + 1 for j, tj in enumerate(t) if tj == i]
            out.append(marked_letter(base, marks))
    return tuple(out)


def marked_alphabet(bases: Iterable[str], k: int):
    """Every marked letter that power_k can produce over the given bases."""
    out = set()
    all_marks = range(1, k)
    for base in set(bases) | {SEPARATOR}:
        for r in range(0, k):
            for combo in itertools.combinations(all_marks, r):
                out.add(marked_token(base, combo))
    return sorted(out)


def reg_power_eval(post: OnePebbleTransducer, k: int, w: Word,
                   index_from_zero: bool = True) -> RunResult:
    """Run a regular post-processor over power_k of the input."""
    return run1(post, power_k(w, k, index_from_zero=index_from_zero))
