"""Boundedness analysis: producing triples, factorizations, Ramsey bounds,
and pumping witness families.

A producing triple (x, e, y) with idempotent e certifies that the output
symbols under watch can be pumped without bound: the transition sequence of
(x*e, e*y) from the initial entry terminates in the final state going right
and some seam crossing fires e's payload.  Pumping any word that factors
accordingly repeats that crossing once per inserted block.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .behavior import (DIVERGENT, BehaviorMonoid, Element, Witnessed,
                       transition_sequence)
from .core import RIGHT, OnePebbleTransducer, Word


@dataclass(frozen=True)
class ProducingTriple:
    x: Witnessed
    e: Witnessed
    y: Witnessed
    producing_index: int  # position in the transition sequence where e fires

    def family_parts(self):
        """(w0, x1, w1) over bare letters; w0/w1 absorb one block each so the
        produced count is strictly increasing from n = 1 on."""
        u0 = tuple(l for l in self.x.witness if not l.is_marker)
        u1 = self.e.witness
        u2 = tuple(l for l in self.y.witness if not l.is_marker)
        return (u0 + u1, u1, u1 + u2)


def _sat_add(a, b, cap):
    return min(a + b, cap)


def triple_sequence(monoid: BehaviorMonoid, x: Element, e: Element, y: Element):
    xe = monoid.compose(x, e)
    ey = monoid.compose(e, y)
    return transition_sequence([xe, ey], monoid.t.initial, RIGHT, _sat_add, monoid.cap)


def is_producing(monoid: BehaviorMonoid, x: Element, e: Element, y: Element,
                 forbid_final_interior: bool = False) -> Optional[int]:
    """Index of the first seam crossing at which e fires, or None.

    ``forbid_final_interior`` additionally rejects sequences that cross the
    seam in (final, right) before terminating; both readings agree on the
    shipped corpus and the permissive one is the default.
    """
    if not monoid.is_idempotent(e):
        return None
    seq = triple_sequence(monoid, x, e, y)
    if seq.exit != (monoid.t.final, RIGHT):
        return None
    interior = seq.consults[1:]
    if forbid_final_interior and any(
            (q, d) == (monoid.t.final, RIGHT) for _, q, d in interior):
        return None
    emap = e.mapping()
    for i, (_, q, d) in enumerate(interior, start=1):
        row = emap[(q, d)]
        if row != DIVERGENT and row[2] >= 1:
            return i
    return None


def producing_triples(t: OnePebbleTransducer, delta_set,
                      forbid_final_interior: bool = False,
                      monoid: Optional[BehaviorMonoid] = None):
    """All producing triples over the witnessed reachable elements."""
    monoid = monoid or BehaviorMonoid(t, delta_set)
    interior, left, right = monoid.reachable_sets()
    idems = [e for e in interior if monoid.is_idempotent(e.element)]
    out = []
    for e in idems:
        flagged = {(q, d) for (q, d), row in e.element.table
                   if row != DIVERGENT and row[2] >= 1}
        if not flagged:
            continue
        for x in left:
            for y in right:
                idx = is_producing(monoid, x.element, e.element, y.element,
                                   forbid_final_interior)
                if idx is not None:
                    out.append(ProducingTriple(x, e, y, idx))
    return out


@dataclass(frozen=True)
class Boundedness:
    bounded: bool
    family: Optional[tuple] = None       # (w0, x1, w1) bare words
    triple: Optional[ProducingTriple] = None

    def pumped(self, n: int) -> Word:
        w0, x1, w1 = self.family
        return w0 + x1 * n + w1


def bounded_in(t: OnePebbleTransducer, delta_set, monoid=None) -> Boundedness:
    """Decide whether the t-output restricted to ``delta_set`` is bounded;
    if not, return a word family with strictly increasing counts."""
    triples = producing_triples(t, delta_set, monoid=monoid)
    if not triples:
        return Boundedness(True)
    best = min(triples, key=lambda tr: (len(tr.x.witness) + len(tr.e.witness)
                                        + len(tr.y.witness),
                                        tuple(map(repr, (tr.x.witness, tr.e.witness,
                                                         tr.y.witness)))))
    return Boundedness(False, best.family_parts(), best)


@dataclass(frozen=True)
class Factorization:
    parts: tuple          # (w0, x1, w1, ..., xk, wk) as letter tuples
    multiplicity: int     # each xi is r equal-image idempotent blocks
    images: tuple         # monoid images of the parts
    blocks: tuple         # per pump part, the tuple of block words

    @property
    def k(self):
        return len(self.parts) // 2

    def pumped(self, n: int) -> Word:
        out = ()
        for i, part in enumerate(self.parts):
            out += part * (n if i % 2 == 1 else 1)
        return out


class _Mu:
    """Prefix-product table for a fixed word under a monoid-like object."""

    def __init__(self, monoid, w):
        self.m = monoid
        self.w = w
        self.prefix = [monoid.identity]
        for l in w:
            self.prefix.append(monoid.compose(self.prefix[-1], monoid.letter(l)))
        self._img = {}

    def img(self, i, j):
        key = (i, j)
        hit = self._img.get(key)
        if hit is None:
            if i == j:
                hit = self.m.identity
            else:
                hit = self.m.compose(self.img(i, j - 1), self.m.letter(self.w[j - 1]))
            self._img[key] = hit
        return hit


def iter_factorizations(w: Word, monoid, k: int, r: int,
                        according=None, forbid_span=None):
    """Yield every idempotent k,r-factorization of ``w``.

    ``according`` is an optional tuple (m0, e1, m1, ..., ek, mk) of images;
    ``forbid_span`` = (lo, hi) keeps pump blocks out of w[lo:hi).  All parts
    are non-empty.  Exhaustive; meant for short words and witness splicing.
    """
    mu = _Mu(monoid, w)
    n = len(w)
    idem = {}

    def is_idem(i, j):
        key = (i, j)
        if key not in idem:
            e = mu.img(i, j)
            idem[key] = monoid.compose(e, e) == e
        return idem[key]

    def block_runs(i, j):
        """Ways to cut w[i:j) into r non-empty blocks of equal image."""
        target = mu.img(i, j)
        if not is_idem(i, j):
            return
        def rec(pos, count, acc):
            if count == r:
                if pos == j:
                    yield tuple(acc)
                return
            for mid in range(pos + 1, j - (r - count - 1) + 1):
                if mu.img(pos, mid) == target:
                    yield from rec(mid, count + 1, acc + [(pos, mid)])
        yield from rec(i, 0, [])

    def parts_ok(idx, i, j):
        if according is not None and mu.img(i, j) != according[idx]:
            return False
        return True

    def pump_ok(i, j):
        if forbid_span is not None:
            lo, hi = forbid_span
            if i < hi and lo < j:
                return False
        if according is None:
            return True
        return True

    def rec(pos, idx, acc_parts, acc_blocks):
        if idx == 2 * k:
            if pos < n and parts_ok(idx, pos, n):
                yield tuple(acc_parts + [w[pos:n]]), tuple(acc_blocks)
            return
        if idx % 2 == 0:  # a w-part
            for mid in range(pos + 1, n):
                if parts_ok(idx, pos, mid):
                    yield from rec(mid, idx + 1, acc_parts + [w[pos:mid]], acc_blocks)
        else:  # a pump part of r blocks
            for end in range(pos + r, n):
                if not pump_ok(pos, end):
                    continue
                if according is not None and mu.img(pos, end) != according[idx]:
                    continue
                if not is_idem(pos, end):
                    continue
                for cuts in block_runs(pos, end):
                    blocks = tuple(w[a:b] for a, b in cuts)
                    yield from rec(end, idx + 1, acc_parts + [w[pos:end]],
                                   acc_blocks + [blocks])

    for parts, blocks in rec(0, 0, [], []):
        images = tuple(mu.img(*span) for span in _spans(parts))
        yield Factorization(parts, r, images, blocks)


def _spans(parts):
    pos = 0
    for p in parts:
        yield pos, pos + len(p)
        pos += len(p)


def find_factorization(w: Word, monoid, k: int, r: int,
                       according=None, forbid_span=None) -> Optional[Factorization]:
    for f in iter_factorizations(w, monoid, k, r, according, forbid_span):
        return f
    return None


def quick_factorization(w: Word, monoid, k: int, r: int,
                        max_block: int = 3) -> Optional[Factorization]:
    """Cheap constructive search: k disjoint interior runs of r adjacent
    blocks of period <= max_block with equal idempotent image.  Complete
    enough for long words; the exhaustive search remains the authority."""
    n = len(w)
    runs = []
    pos = 1  # keep the leading part non-empty
    while pos < n and len(runs) < k:
        found = None
        for width in range(1, max_block + 1):
            end = pos + width * r
            if end >= n:  # keep the trailing part non-empty
                continue
            block = w[pos:pos + width]
            if any(w[pos + t * width:pos + (t + 1) * width] != block
                   for t in range(1, r)):
                continue
            img = monoid.word(block)
            if monoid.compose(img, img) == img:
                found = (pos, end, img)
                break
        if found:
            runs.append(found)
            pos = found[1] + 1  # non-empty separator
        else:
            pos += 1
    if len(runs) < k:
        return None
    parts = []
    blocks = []
    prev = 0
    for (lo, hi, img) in runs:
        parts.append(w[prev:lo])
        parts.append(w[lo:hi])
        width = (hi - lo) // r
        blocks.append(tuple(w[lo + t * width:lo + (t + 1) * width]
                            for t in range(r)))
        prev = hi
    parts.append(w[prev:])
    images = tuple(monoid.word(p) for p in parts)
    return Factorization(tuple(parts), r, images, tuple(blocks))


class Saturated:
    """Marker for a Ramsey bound beyond the configured cap."""

    def __repr__(self):
        return "Saturated"


SATURATED = Saturated()


def ramsey_bound(colors: int, clique: int, cap: int = 10 ** 12):
    """Upper bound on the symmetric Ramsey number R(clique, ..., clique) with
    ``colors`` colors, by the pigeonhole recurrence.  Not tight."""
    if colors < 1 or clique < 1:
        raise ValueError("need colors >= 1 and clique >= 1")

    @lru_cache(maxsize=None)
    def bound(vec):
        if any(t == 1 for t in vec):
            return 1
        if len(vec) == 1:
            return vec[0]
        total = 2 - len(vec)
        for i in range(len(vec)):
            reduced = tuple(sorted(vec[:i] + (vec[i] - 1,) + vec[i + 1:]))
            total += bound(reduced)
            if total > cap:
                return cap + 1
        return total

    value = bound(tuple([clique] * colors))
    return SATURATED if value > cap else value


def pump_family(parts, n: int) -> Word:
    """w0 x1^n w1 ... xk^n wk for parts (w0, x1, w1, ..., xk, wk)."""
    out = ()
    for i, part in enumerate(parts):
        out += tuple(part) * (n if i % 2 == 1 else 1)
    return out


def count_in(output, delta_set) -> int:
    return sum(1 for item in output if item in delta_set)
