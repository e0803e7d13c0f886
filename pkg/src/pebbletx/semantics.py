"""Reference run semantics for one-pebble and nested transducers.

Runs are deterministic; divergence is detected by exhausting the exact
configuration budget |Q| * (n + 2).  A run stops at the first final
configuration (head on the right endmarker in the final state); a right
move on the right endmarker is the halting transition and leaves the head
in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import (BOT, EOT, LEFT, RIGHT, RMARK, CallSym, InputError,
                   Letter, NestedTransducer, OnePebbleTransducer, Word)

ACCEPTED = "accepted"
DIVERGED = "diverged"
NO_RUN = "no_accepting_run"


@dataclass(frozen=True)
class Configuration:
    word: Word  # letters between the endmarkers
    head: int   # 0 = left endmarker, len(word) + 1 = right endmarker
    state: str

    def letter(self) -> Letter:
        if self.head == 0:
            return BOT
        if self.head == len(self.word) + 1:
            return EOT
        return self.word[self.head - 1]


@dataclass(frozen=True)
class RunResult:
    status: str
    output: tuple = ()
    trace: Optional[tuple] = None
    call_count: dict = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return self.status == ACCEPTED


def _check_word(t: OnePebbleTransducer, w: Word):
    for letter in w:
        if letter.base not in t.input_bases:
            raise InputError(f"letter {letter.token()} outside input alphabet")
        for layer, state in letter.anns:
            if layer <= t.layer:
                raise InputError(f"letter {letter.token()} annotated at layer "
                                 f"{layer} <= {t.layer}")


def run1(t: OnePebbleTransducer, w: Word, trace: bool = False) -> RunResult:
    """Run a single layer over ``w`` (without endmarkers) and collect its raw output."""
    _check_word(t, w)
    n = len(w)
    budget = len(t.states) * (n + 2)
    head, state = 0, t.initial
    out = []
    calls = {}
    configs = [Configuration(w, head, state)] if trace else None
    for _ in range(budget):
        cfg_letter = w[head - 1] if 1 <= head <= n else (BOT if head == 0 else EOT)
        got = t.delta(cfg_letter, state)
        if got is None:
            return RunResult(NO_RUN, trace=tuple(configs) if trace else None)
        target, direction, output = got
        out.extend(output)
        for item in output:
            if isinstance(item, CallSym):
                calls[item] = calls.get(item, 0) + 1
        if head == n + 1 and direction == RIGHT:
            head_next = head  # halting transition
        else:
            head_next = head + 1 if direction == RIGHT else head - 1
        head, state = head_next, target
        if configs is not None:
            configs.append(Configuration(w, head, state))
        if head == n + 1 and state == t.final:
            return RunResult(ACCEPTED, tuple(out),
                             tuple(configs) if trace else None, calls)
    return RunResult(DIVERGED, trace=tuple(configs) if trace else None)


def direct_pass(t: OnePebbleTransducer, w: Word, state: str, direction: str,
                delta_set=None):
    """Simulate one two-way pass through ``w`` entered from the given side.

    Entering with direction R starts on the first letter, with L on the last.
    Returns (exit state, exit direction, flag) where flag says whether the
    pass produced a symbol in ``delta_set``, or None when the pass never
    leaves the word.  Used as the independent oracle for behavior elements.
    """
    n = len(w)
    if n == 0:
        return state, direction, False
    pos = 0 if direction == RIGHT else n - 1
    flag = False
    seen = set()
    while True:
        if w[pos].base == RMARK and state == t.final:
            return state, RIGHT, flag  # a run stops at its first final configuration
        key = (pos, state)
        if key in seen:
            return None
        seen.add(key)
        got = t.delta(w[pos], state)
        if got is None:
            return None
        target, d, output = got
        if delta_set is not None:
            flag = flag or any(item in delta_set for item in output)
        state = target
        if w[pos].base == RMARK and d == RIGHT:
            return state, RIGHT, flag  # halting transition exits rightward
        pos = pos + 1 if d == RIGHT else pos - 1
        if pos >= n:
            return state, RIGHT, flag
        if pos < 0:
            return state, LEFT, flag


def _status_min(*statuses):
    for s in (DIVERGED, NO_RUN):
        if s in statuses:
            return s
    return ACCEPTED


def run_nested(nt: NestedTransducer, w: Word, trace: bool = False) -> RunResult:
    """Evaluate the full stack on a base word: the top layer runs and every
    ``call(i)`` is replaced by layer i's value on the current configuration."""
    return _eval_layer(nt, nt.depth, w, trace)


def _eval_layer(nt: NestedTransducer, depth: int, w: Word, trace: bool) -> RunResult:
    t = nt.layer(depth)
    raw = run1(t, w, trace=trace)
    if not raw.accepted:
        return raw
    if not raw.call_count:
        return raw
    # replay the run to pair each call with its configuration
    out = []
    n = len(w)
    head, state = 0, t.initial
    while not (head == n + 1 and state == t.final):
        cfg_letter = w[head - 1] if 1 <= head <= n else (BOT if head == 0 else EOT)
        target, direction, output = t.delta(cfg_letter, state)
        for item in output:
            if isinstance(item, CallSym):
                if not 1 <= head <= n:
                    raise InputError("call emitted on an endmarker")
                config = w[:head - 1] + (w[head - 1].annotate(t.layer, state),) + w[head:]
                inner = _eval_layer(nt, item.target, config, False)
                if not inner.accepted:
                    return RunResult(inner.status, trace=raw.trace,
                                     call_count=raw.call_count)
                out.extend(inner.output)
            else:
                out.append(item)
        if head == n + 1 and direction == RIGHT:
            pass
        else:
            head = head + 1 if direction == RIGHT else head - 1
        state = target
    return RunResult(ACCEPTED, tuple(out), raw.trace, raw.call_count)


def output_length(nt: NestedTransducer, w: Word, _memo=None) -> Optional[int]:
    """|run_nested(nt, w).output| without materializing the output.

    Returns None when the function is undefined at ``w``.
    """
    memo = {} if _memo is None else _memo
    return _length_layer(nt, nt.depth, w, memo)


def _length_layer(nt, depth, w, memo):
    key = (depth, w)
    if key in memo:
        return memo[key]
    t = nt.layer(depth)
    raw = run1(t, w)
    if not raw.accepted:
        memo[key] = None
        return None
    total = 0
    n = len(w)
    head, state = 0, t.initial
    while not (head == n + 1 and state == t.final):
        cfg_letter = w[head - 1] if 1 <= head <= n else (BOT if head == 0 else EOT)
        target, direction, output = t.delta(cfg_letter, state)
        for item in output:
            if isinstance(item, CallSym):
                if not 1 <= head <= n:
                    raise InputError("call emitted on an endmarker")
                config = w[:head - 1] + (w[head - 1].annotate(t.layer, state),) + w[head:]
                inner = _length_layer(nt, item.target, config, memo)
                if inner is None:
                    memo[key] = None
                    return None
                total += inner
            else:
                total += 1
        if not (head == n + 1 and direction == RIGHT):
            head = head + 1 if direction == RIGHT else head - 1
        state = target
    memo[key] = total
    return total
