"""Regular position labellings as bimachines, and labelled pipelines.

A labelling computes, for every position, a label from a finite set that
depends only on the automaton state after the prefix, the letter, and the
co-automaton state after the suffix.  Labelled letters keep their base
recoverable: the token of a labelled letter is ``base~label``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from . import semantics
from .behavior import BehaviorMonoid, DIVERGENT
from .core import (BOT, EOT, RIGHT, CallSym, InputError, Letter,
                   NestedTransducer, OnePebbleTransducer, Pattern, PebbleError,
                   Rule, Word)

KEEP = "K"
CHEAP = "C"

OVERFLOW = object()
OVERFLOW_LABEL = "overflow"


class BoundViolation(PebbleError):
    """The certified call-count bound was exceeded by some position."""


@dataclass(frozen=True)
class SimpleDFA:
    states: tuple
    init: str
    trans: tuple  # sorted ((state, base), state)

    def table(self):
        return dict(self.trans)

    def step(self, state, base):
        return self.table().get((state, base))


def _dfa(states, init, trans) -> SimpleDFA:
    return SimpleDFA(tuple(states), init, tuple(sorted(trans.items())))


@dataclass(frozen=True)
class RegularLabelling:
    left: SimpleDFA
    right: SimpleDFA          # reads the suffix from the right end inward
    out: tuple                # sorted ((lstate, base, rstate), label)
    labels: tuple

    def out_table(self):
        return dict(self.out)

    def apply(self, w: Word) -> Word:
        """Length-preserving relabelling; annotations ride along untouched."""
        n = len(w)
        ltab, rtab, otab = self.left.table(), self.right.table(), self.out_table()
        lstates = [self.left.init]
        for letter in w:
            nxt = ltab.get((lstates[-1], letter.base))
            if nxt is None:
                raise InputError(f"letter {letter.token()} outside labelling alphabet")
            lstates.append(nxt)
        rstates = [None] * (n + 1)
        rstates[n] = self.right.init
        for j in range(n - 1, -1, -1):
            nxt = rtab.get((rstates[j + 1], w[j].base))
            if nxt is None:
                raise InputError(f"letter {w[j].token()} outside labelling alphabet")
            rstates[j] = nxt
        out = []
        for j, letter in enumerate(w):
            label = otab[(lstates[j], letter.base, rstates[j + 1])]
            if label == OVERFLOW_LABEL:
                raise BoundViolation(
                    f"position {j} needs an emission ordinal beyond the bound")
            out.append(Letter(f"{letter.base}~{label}", letter.anns))
        return tuple(out)

    def label_at(self, w: Word, j: int) -> str:
        return _base_label(self.apply(w)[j].base)[1]


def _base_label(token: str):
    base, _, label = token.rpartition("~")
    return base, label


def strip_label(letter: Letter) -> Letter:
    base, _ = _base_label(letter.base)
    return Letter(base, letter.anns)


def identity_labelling(bases, label: str = "*") -> RegularLabelling:
    trans = {("s", b): "s" for b in bases}
    out = {("s", b, "s"): label for b in bases}
    return RegularLabelling(_dfa(("s",), "s", trans), _dfa(("s",), "s", trans),
                            tuple(sorted(out.items())), (label,))


@dataclass(frozen=True)
class Pipeline:
    """A regular labelling stage followed by a nested transducer."""

    labelling: Optional[RegularLabelling]
    machine: NestedTransducer
    name: str = "pipeline"

    @property
    def depth(self):
        return self.machine.depth


def eval_pipeline(p: Pipeline, w: Word) -> semantics.RunResult:
    lw = p.labelling.apply(w) if p.labelling is not None else w
    return semantics.run_nested(p.machine, lw)


def pipeline_output_length(p: Pipeline, w: Word):
    lw = p.labelling.apply(w) if p.labelling is not None else w
    return semantics.output_length(p.machine, lw)


def _mint(values, prefix):
    order = {}
    for v in values:
        if v not in order:
            order[v] = f"{prefix}{len(order)}"
    return order


def bimachine_from_nfa(nfa, bases, mid_transition, label_of, cap=10 ** 6,
                       context="recognizer labelling"):
    """Bimachine whose label at a position summarizes NFA acceptance.

    The NFA reads full marked words.  The left automaton tracks the subset
    reached after the left endmarker and the prefix; the right automaton the
    co-reachable subset through the suffix and the right endmarker.
    ``mid_transition(lset, q)`` gives the subset after consuming the current
    position annotated with state q; ``label_of(pred)`` turns the per-state
    acceptance predicate into a label.
    """
    from .automata import StateCapExceeded

    init_l = nfa.step(nfa.closure(nfa.inits), BOT)
    rev = nfa.reversed()
    init_r = rev.step(rev.closure(rev.inits), EOT)

    def explore(init, step):
        states, order = {init}, [init]
        queue = deque([init])
        trans = {}
        while queue:
            cur = queue.popleft()
            for b in bases:
                nxt = step(cur, b)
                trans[(cur, b)] = nxt
                if nxt not in states:
                    states.add(nxt)
                    order.append(nxt)
                    if len(states) > cap:
                        raise StateCapExceeded(cap, context)
                    queue.append(nxt)
        return order, trans

    lorder, ltrans = explore(init_l, lambda s, b: nfa.step(s, Letter(b)))
    rorder, rtrans = explore(init_r, lambda s, b: rev.step(s, Letter(b)))
    lnames = _mint(lorder, "s")
    rnames = _mint(rorder, "t")
    out = {}
    labels = {}
    for lset in lorder:
        for b in bases:
            for rset in rorder:
                pred = lambda q, lset=lset, b=b, rset=rset: bool(
                    mid_transition(lset, Letter(b), q) & rset)
                label = label_of(pred)
                labels[label] = None
                out[(lnames[lset], b, rnames[rset])] = label
    left = _dfa([lnames[s] for s in lorder], lnames[init_l],
                {(lnames[s], b): lnames[t] for (s, b), t in ltrans.items()})
    right = _dfa([rnames[s] for s in rorder], rnames[init_r],
                 {(rnames[s], b): rnames[t] for (s, b), t in rtrans.items()})
    return RegularLabelling(left, right, tuple(sorted(out.items())),
                            tuple(labels))


def relabel_inputs(t: OnePebbleTransducer, labels) -> OnePebbleTransducer:
    """Lift a machine to the labelled alphabet; behavior ignores the label."""
    rules = []
    for r in t.rules:
        if r.pattern.base in (BOT.base, EOT.base):
            rules.append(r)
            continue
        for label in labels:
            pat = Pattern(f"{r.pattern.base}~{label}", r.pattern.kind, r.pattern.arg)
            rules.append(Rule(r.state, pat, r.target, r.direction, r.output))
    bases = {f"{b}~{label}" for b in t.input_bases for label in labels}
    return OnePebbleTransducer(t.layer, t.states, t.initial, t.final, rules,
                               bases, t.output_symbols, t.ann_universe)


def call_position_labelling(top: OnePebbleTransducer, call: CallSym,
                            bound: int) -> RegularLabelling:
    """Label every position with the set of call ordinals emitted there.

    The counting abstraction saturates at bound + 1; observing saturation
    means the certified bound is violated and raises BoundViolation.
    """
    cap = bound + 1
    monoid = BehaviorMonoid(top, {call}, cap=cap)
    bases = sorted(top.input_bases)

    def explore(init, extend):
        order = [init]
        seen = {init}
        trans = {}
        queue = deque([init])
        while queue:
            cur = queue.popleft()
            for b in bases:
                nxt = extend(cur, b)
                trans[(cur, b)] = nxt
                if nxt not in seen:
                    seen.add(nxt)
                    order.append(nxt)
                    queue.append(nxt)
        return order, trans

    lorder, ltrans = explore(monoid.letter(BOT),
                             lambda x, b: monoid.compose(x, monoid.letter(Letter(b))))
    rorder, rtrans = explore(monoid.letter(EOT),
                             lambda y, b: monoid.compose(monoid.letter(Letter(b)), y))
    lnames = _mint(lorder, "s")
    rnames = _mint(rorder, "t")
    out = {}
    labels = {}
    for x in lorder:
        for b in bases:
            mid = monoid.letter(Letter(b))
            for y in rorder:
                indices = _indices_at_position(monoid, x, mid, y, cap)
                if indices is OVERFLOW:
                    label = OVERFLOW_LABEL
                elif indices:
                    label = "i" + "_".join(map(str, sorted(indices)))
                else:
                    label = "none"
                labels[label] = None
                out[(lnames[x], b, rnames[y])] = label
    left = _dfa([lnames[s] for s in lorder], lnames[lorder[0]],
                {(lnames[s], b): lnames[t] for (s, b), t in ltrans.items()})
    right = _dfa([rnames[s] for s in rorder], rnames[rorder[0]],
                 {(rnames[s], b): rnames[t] for (s, b), t in rtrans.items()})
    return RegularLabelling(left, right, tuple(sorted(out.items())), tuple(labels))


def _indices_at_position(monoid, x, mid, y, cap):
    """Ordinals of the watched emissions that happen at the middle block of
    the accepting traversal of [x, mid, y]; OVERFLOW when the count saturates."""
    elements = [x, mid, y]
    t = monoid.t
    q, d = t.initial, RIGHT
    block = 0
    seen = set()
    total = 0
    indices = set()
    while True:
        key = (block, q, d)
        if key in seen:
            return set()  # diverging word: not in the domain
        seen.add(key)
        got = elements[block].entry(q, d)
        if got == DIVERGENT:
            return set()
        q2, d2, payload = got
        total += payload
        if payload >= cap or total >= cap:
            return OVERFLOW
        if block == 1:
            indices.update(range(total - payload + 1, total + 1))
        if d2 == RIGHT:
            if block == 2:
                return indices if (q2, d2) == (t.final, RIGHT) else set()
            block += 1
        else:
            if block == 0:
                return set()
            block -= 1
        q, d = q2, d2


def compose_labellings(first: RegularLabelling, second: RegularLabelling,
                       bases) -> RegularLabelling:
    """Single bimachine equal to applying ``first`` then ``second``.

    The composed label token is ``lab1~lab2`` so the labelled letters are
    byte-identical with staged application.
    """
    l1, r1, o1 = first.left.table(), first.right.table(), first.out_table()
    l2, r2, o2 = second.left.table(), second.right.table(), second.out_table()
    r1_states = [s for s in first.right.states]

    def lstep(state, b):
        p1, fmap = state
        fmap_dict = dict(fmap)
        items = tuple(sorted(
            (rp, l2[(fmap_dict[r1[(rp, b)]], f"{b}~{o1[(p1, b, rp)]}")])
            for rp in r1_states))
        return (l1[(p1, b)], items)

    def rstep(state, b):
        q1, gmap = state
        gmap_dict = dict(gmap)
        items = tuple(sorted(
            (lp, r2[(gmap_dict[l1[(lp, b)]], f"{b}~{o1[(lp, b, q1)]}")])
            for lp in first.left.states))
        return (r1[(q1, b)], items)

    linit = (first.left.init,
             tuple(sorted((rp, second.left.init) for rp in r1_states)))
    rinit = (first.right.init,
             tuple(sorted((lp, second.right.init) for lp in first.left.states)))

    def explore(init, step):
        order, seen, trans = [init], {init}, {}
        queue = deque([init])
        while queue:
            cur = queue.popleft()
            for b in bases:
                nxt = step(cur, b)
                trans[(cur, b)] = nxt
                if nxt not in seen:
                    seen.add(nxt)
                    order.append(nxt)
                    queue.append(nxt)
        return order, trans

    lorder, ltrans = explore(linit, lstep)
    rorder, rtrans = explore(rinit, rstep)
    lnames = _mint(lorder, "s")
    rnames = _mint(rorder, "t")
    out = {}
    labels = {}
    for ls in lorder:
        p1, fmap = ls
        fdict = dict(fmap)
        for b in bases:
            for rs in rorder:
                q1, gmap = rs
                gdict = dict(gmap)
                lab1 = o1[(p1, b, q1)]
                token = f"{b}~{lab1}"
                lab2 = o2[(fdict[q1], token, gdict[p1])]
                label = f"{lab1}~{lab2}"
                labels[label] = None
                out[(lnames[ls], b, rnames[rs])] = label
    left = _dfa([lnames[s] for s in lorder], lnames[linit],
                {(lnames[s], b): lnames[t] for (s, b), t in ltrans.items()})
    right = _dfa([rnames[s] for s in rorder], rnames[rinit],
                 {(rnames[s], b): rnames[t] for (s, b), t in rtrans.items()})
    return RegularLabelling(left, right, tuple(sorted(out.items())), tuple(labels))


# ---------------------------------------------------------------------------
# Serialization of labellings and pipelines (PTX-adjacent blocks).


def render_pipeline(p: Pipeline) -> str:
    from . import ptx
    lines = [f"pipeline {p.name}"]
    if p.labelling is not None:
        lab = p.labelling
        lines.append("labelling {")
        lines.append("  labels { " + " ".join(ptx._sym(l) for l in lab.labels) + " }")
        for title, dfa in (("left", lab.left), ("right", lab.right)):
            lines.append(f"  {title} {{")
            lines.append("    states { " + " ".join(dfa.states) + " }")
            lines.append(f"    initial {dfa.init}")
            for (s, b), t in sorted(dfa.trans):
                lines.append(f"    trans {s} {ptx._sym(b)} -> {t}")
            lines.append("  }")
        lines.append("  out {")
        for (l, b, r), label in sorted(p.labelling.out):
            lines.append(f"    {l} {ptx._sym(b)} {r} -> {ptx._sym(label)}")
        lines.append("  }")
        lines.append("}")
    return "\n".join(lines) + "\n" + ptx.render(p.machine)


def _parse_simple_dfa(r):
    from . import ptx
    r.next("{")
    states, init, trans = None, None, {}
    while not r.at("}"):
        kw = r.ident("automaton item")
        if kw == "states":
            r.next("{")
            states = []
            while not r.at("}"):
                states.append(r.ident("state"))
            r.next("}")
        elif kw == "initial":
            init = r.ident("state")
        elif kw == "trans":
            s = r.ident("state")
            b = r.symbol()
            r.next("->")
            t = r.ident("state")
            trans[(s, b)] = t
        else:
            raise ptx.ParseError(f"unknown automaton item {kw!r}")
    r.next("}")
    if states is None or init is None:
        raise ptx.ParseError("automaton needs states and initial")
    return SimpleDFA(tuple(states), init, tuple(sorted(trans.items())))


def parse_pipeline(r):
    from . import ptx
    r.next("pipeline")
    name = r.ident("pipeline name")
    lab = None
    if r.at("labelling"):
        r.next("labelling")
        r.next("{")
        labels, left, right, out = None, None, None, {}
        while not r.at("}"):
            kw = r.ident("labelling item")
            if kw == "labels":
                r.next("{")
                labels = []
                while not r.at("}"):
                    labels.append(r.symbol())
                r.next("}")
            elif kw == "left":
                left = _parse_simple_dfa(r)
            elif kw == "right":
                right = _parse_simple_dfa(r)
            elif kw == "out":
                r.next("{")
                while not r.at("}"):
                    l = r.ident("left state")
                    b = r.symbol()
                    rr = r.ident("right state")
                    r.next("->")
                    label = r.symbol()
                    out[(l, b, rr)] = label
                r.next("}")
            else:
                raise ptx.ParseError(f"unknown labelling item {kw!r}")
        r.next("}")
        if left is None or right is None or labels is None:
            raise ptx.ParseError("labelling needs labels, left and right blocks")
        lab = RegularLabelling(left, right, tuple(sorted(out.items())),
                               tuple(labels))
    machine = ptx._parse_transducer(r)
    return Pipeline(lab, machine, name=name)
