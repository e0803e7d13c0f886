"""Transition behavior of a two-way transducer.

An element summarizes every pass of the machine through a word: a total map
(state, entry side) -> (state, exit side, payload) or Divergent.  Payloads
count produced symbols from a chosen set, saturating at a cap; cap 1 gives
the does-it-produce flag used by the boundedness analysis, larger caps give
the counting abstraction used for call positions.

Composition follows the alternating transition sequence across the seam of
two words.  Entries from the final state on the right endmarker exit to the
right: a run never continues past its first final configuration, so the
composed behavior of a full word agrees exactly with the run semantics.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .core import (BOT, EOT, LEFT, RIGHT, RMARK, CallSym, Letter,
                   OnePebbleTransducer, Word)

DIVERGENT = "divergent"

INTERIOR = "interior"
LEFT_CLOSED = "left_closed"
RIGHT_CLOSED = "right_closed"


@dataclass(frozen=True)
class Element:
    """Behavior element: sorted tuple of ((q, d), (q', d', payload) | DIVERGENT)."""

    table: tuple

    def entry(self, q, d):
        return dict(self.table)[(q, d)]

    def mapping(self):
        return dict(self.table)

    def __repr__(self):
        rows = ", ".join(
            f"({q},{d})->{v if v == DIVERGENT else f'({v[0]},{v[1]},{v[2]})'}"
            for (q, d), v in self.table)
        return f"<{rows}>"


def _freeze(mapping) -> Element:
    return Element(tuple(sorted(mapping.items())))


@dataclass(frozen=True)
class Witnessed:
    element: Element
    witness: Word
    zone: str


@dataclass
class Sequence:
    """Transition sequence of a list of elements from one entry.

    ``consults`` lists (block index, state, direction) in order; the first
    consult is the initial entry, later ones are seam crossings.  ``exit`` is
    (state, side) or None when the simulation diverges.
    """

    consults: list
    exit: Optional[tuple]
    payload: int


def transition_sequence(elements, q, d, add, cap, zero=0) -> Sequence:
    """Simulate the two-way traversal of a block word given per-block summaries."""
    last = len(elements) - 1
    block = 0 if d == RIGHT else last
    consults = []
    seen = set()
    total = zero
    while True:
        key = (block, q, d)
        if key in seen:
            return Sequence(consults, None, total)
        seen.add(key)
        consults.append(key)
        got = elements[block].entry(q, d)
        if got == DIVERGENT:
            return Sequence(consults, None, total)
        q2, d2, payload = got
        total = add(total, payload, cap)
        if d2 == RIGHT:
            if block == last:
                return Sequence(consults, (q2, RIGHT), total)
            block += 1
        else:
            if block == 0:
                return Sequence(consults, (q2, LEFT), total)
            block -= 1
        q, d = q2, d2


def _sat_add(a, b, cap):
    return min(a + b, cap)


class BehaviorMonoid:
    """Behavior elements of one transducer with payloads counting ``delta_set``.

    ``delta_set`` is a set of output symbols (or CallSym values); ``cap`` is
    the payload saturation bound (1 for plain flags).
    """

    def __init__(self, t: OnePebbleTransducer, delta_set, cap: int = 1):
        self.t = t
        self.delta_set = frozenset(delta_set)
        self.cap = cap
        self._letters = {}
        states = sorted(t.states)
        self.identity = _freeze({(q, d): (q, d, 0)
                                 for q in states for d in (RIGHT, LEFT)})

    def payload_of(self, output) -> int:
        return min(sum(1 for item in output if item in self.delta_set), self.cap)

    def letter(self, letter: Letter) -> Element:
        hit = self._letters.get(letter)
        if hit is not None:
            return hit
        table = {}
        for q in sorted(self.t.states):
            got = self.t.delta(letter, q)
            if letter.base == RMARK and q == self.t.final:
                # runs stop at the first final configuration
                row = (q, RIGHT, 0)
            elif got is None:
                row = DIVERGENT
            else:
                target, direction, output = got
                row = (target, direction, self.payload_of(output))
            for d in (RIGHT, LEFT):
                table[(q, d)] = row
        elt = _freeze(table)
        self._letters[letter] = elt
        return elt

    def compose(self, f: Element, g: Element) -> Element:
        table = {}
        for q in sorted(self.t.states):
            for d in (RIGHT, LEFT):
                seq = transition_sequence([f, g], q, d, _sat_add, self.cap)
                if seq.exit is None:
                    table[(q, d)] = DIVERGENT
                else:
                    q2, d2 = seq.exit
                    table[(q, d)] = (q2, d2, seq.payload)
        return _freeze(table)

    def word(self, w: Iterable[Letter]) -> Element:
        elt = self.identity
        for letter in w:
            elt = self.compose(elt, self.letter(letter))
        return elt

    def is_idempotent(self, e: Element) -> bool:
        return self.compose(e, e) == e

    def power_idempotent(self, e: Element, limit: int = 64) -> Element:
        """Iterated squaring until stable; every finite monoid element has an
        idempotent power."""
        cur = e
        for _ in range(limit):
            sq = self.compose(cur, cur)
            if sq == cur:
                return cur
            cur = sq
        raise RuntimeError("no idempotent power found within limit")

    def alphabet(self):
        return sorted(self.t.expanded_letters())

    def reachable_sets(self):
        """Witnessed elements of the interior, left-closed and right-closed
        zones, with shortest witnesses, by breadth-first closure."""
        letters = self.alphabet()
        letter_elts = [(l, self.letter(l)) for l in letters]

        def bfs(seeds):
            found = {}
            queue = deque()
            for wit, elt in seeds:
                if elt not in found:
                    found[elt] = wit
                    queue.append((wit, elt))
            while queue:
                wit, elt = queue.popleft()
                for l, le in letter_elts:
                    nxt = self.compose(elt, le)
                    if nxt not in found:
                        nw = wit + (l,)
                        found[nxt] = nw
                        queue.append((nw, nxt))
            return found

        interior = bfs([((l,), e) for l, e in letter_elts])
        left = bfs([((BOT,), self.word((BOT,)))])
        bot_r = self.letter(EOT)
        right = {}
        for elt, wit in itertools.chain(
                [(self.identity, ())], sorted(interior.items(), key=lambda kv: kv[1])):
            r = self.compose(elt, bot_r)
            w = wit + (EOT,)
            if r not in right or len(w) < len(right[r]):
                right[r] = w
        zones = ((interior, INTERIOR), (left, LEFT_CLOSED), (right, RIGHT_CLOSED))
        return tuple(
            tuple(Witnessed(elt, wit, zone)
                  for elt, wit in sorted(found.items(), key=lambda kv: (len(kv[1]), kv[1])))
            for found, zone in zones)


def letter_behavior(t: OnePebbleTransducer, delta_set, letter: Letter) -> Element:
    return BehaviorMonoid(t, delta_set).letter(letter)


def word_behavior(t: OnePebbleTransducer, delta_set, w: Word) -> Element:
    return BehaviorMonoid(t, delta_set).word(w)


def compose(t: OnePebbleTransducer, delta_set, f: Element, g: Element) -> Element:
    return BehaviorMonoid(t, delta_set).compose(f, g)


class ProductMonoid:
    """Componentwise product of behavior monoids over a shared alphabet."""

    def __init__(self, monoids):
        self.monoids = tuple(monoids)
        self.identity = tuple(m.identity for m in self.monoids)

    def letter(self, l: Letter):
        return tuple(m.letter(l) for m in self.monoids)

    def compose(self, f, g):
        return tuple(m.compose(a, b) for m, a, b in zip(self.monoids, f, g))

    def word(self, w):
        elt = self.identity
        for l in w:
            elt = self.compose(elt, self.letter(l))
        return elt

    def is_idempotent(self, e):
        return self.compose(e, e) == e

    def reachable(self, letters, seeds=None):
        """BFS closure with shortest witnesses starting from letters or seeds."""
        letter_elts = [(l, self.letter(l)) for l in letters]
        found = {}
        queue = deque()
        init = seeds if seeds is not None else [((l,), e) for l, e in letter_elts]
        for wit, elt in init:
            if elt not in found:
                found[elt] = wit
                queue.append((wit, elt))
        while queue:
            wit, elt = queue.popleft()
            for l, le in letter_elts:
                nxt = self.compose(elt, le)
                if nxt not in found:
                    nw = wit + (l,)
                    found[nxt] = nw
                    queue.append((nw, nxt))
        return found
