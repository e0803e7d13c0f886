"""Bounded-length differential testing between machines and pipelines."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .core import Letter, Word
from .labelling import Pipeline, eval_pipeline
from .semantics import run_nested


@dataclass(frozen=True)
class DiffResult:
    equivalent: bool
    checked: int
    counterexample: Optional[Word] = None
    left: Optional[tuple] = None   # (accepted, output tokens)
    right: Optional[tuple] = None


def _evaluate(obj, w: Word):
    if isinstance(obj, Pipeline):
        r = eval_pipeline(obj, w)
    else:
        r = run_nested(obj, w)
    return (r.accepted, tuple(map(str, r.output)) if r.accepted else None)


def _alphabet_of(obj):
    if isinstance(obj, Pipeline):
        if obj.labelling is None:
            return sorted(obj.machine.base_input)
        return sorted({b for (_, b) in dict(obj.labelling.left.trans)})
    return sorted(obj.base_input)


def difftest(a, b, max_len: int, alphabet=None) -> DiffResult:
    """Exhaustive comparison on all words up to ``max_len``; undefined versus
    defined counts as inequivalence.  The lexicographically first failing
    word (shortest first) is reported."""
    bases = sorted(alphabet) if alphabet is not None else _alphabet_of(a)
    checked = 0
    for n in range(max_len + 1):
        for combo in itertools.product(bases, repeat=n):
            w = tuple(Letter(s) for s in combo)
            checked += 1
            left = _evaluate(a, w)
            right = _evaluate(b, w)
            if left != right:
                return DiffResult(False, checked, w, left, right)
    return DiffResult(True, checked)
