"""Growth-degree analysis and pebble minimization.

The engine builds, level by level, sets of producing tuples: a level-k tuple
is a (2k+1)-part split of a witness word whose pump parts can be repeated to
force output growth of order n^k.  Level 1 tuples are producing triples of
the innermost layer; a level k+1 tuple splices a level-k tuple into a
call-producing loop of layer k+1 whose emitted configuration factors
according to the lower tuple.

When the top level is empty, one nesting layer is removed: either the top
makes boundedly many calls to the layer below (which is then simulated
inline, guided by a call-position labelling), or the callee's function is
bounded and every call is replaced by a looked-up value.  Analysis runs over
labelled pipelines throughout, so witnesses stay words over the base
alphabet.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

from . import analysis
from .analysis import find_factorization
from .automata import NFA, StateCapExceeded, determinize
from .behavior import (DIVERGENT, BehaviorMonoid, Element,
                       transition_sequence)
from .core import (BOT, EOT, LEFT, RIGHT, CallSym, Letter, NestedTransducer,
                   OnePebbleTransducer, Pattern, PebbleError, Rule, Word)
from .labelling import (CHEAP, KEEP, Pipeline, RegularLabelling,
                        bimachine_from_nfa, call_position_labelling,
                        compose_labellings, eval_pipeline,
                        pipeline_output_length, relabel_inputs, strip_label)


class AnalysisRefusal(PebbleError):
    """A decision or construction could not be carried out; carries evidence."""

    def __init__(self, message, evidence=None):
        super().__init__(message)
        self.evidence = evidence


class CollapseUnsupported(AnalysisRefusal):
    pass


def as_pipeline(obj) -> Pipeline:
    if isinstance(obj, Pipeline):
        return obj
    return Pipeline(None, obj, name=obj.name)


def pipeline_bases(p: Pipeline):
    if p.labelling is None:
        return sorted(p.machine.base_input)
    return sorted({b for (_, b) in dict(p.labelling.left.trans)})


# ---------------------------------------------------------------------------
# Curried morphism: behavior of a labelled pipeline's layers on base words.


def _sat_add(a, b, cap):
    return min(a + b, cap)


@dataclass(frozen=True)
class Curried:
    """Product behavior of the machine layers, parameterized by the labelling
    automata states at the segment boundaries."""

    alpha: tuple  # sorted (lstate, lstate'): left automaton transformation
    rho: tuple    # sorted (rstate, rstate'): right automaton transformation
    table: tuple  # sorted ((lstate, rstate), product element)

    def alpha_map(self):
        return dict(self.alpha)

    def rho_map(self):
        return dict(self.rho)

    def at(self, l, r):
        return dict(self.table)[(l, r)]


class PipelineMorphism:
    """Monoid morphism sending base words to curried product behaviors.

    ``monoids`` are BehaviorMonoid instances of the machine layers, reading
    labelled letters; with no labelling the curry is over singleton automata.
    """

    def __init__(self, pipeline: Pipeline, monoids):
        self.pipeline = pipeline
        self.monoids = tuple(monoids)
        lab = pipeline.labelling
        if lab is None:
            self.lstates, self.rstates = ("*",), ("*",)
            self.l0 = self.r0 = "*"
            self._ltrans = self._rtrans = self._out = None
        else:
            self.lstates = lab.left.states
            self.rstates = lab.right.states
            self.l0, self.r0 = lab.left.init, lab.right.init
            self._ltrans = lab.left.table()
            self._rtrans = lab.right.table()
            self._out = lab.out_table()
        self._letters = {}
        ident = tuple(m.identity for m in self.monoids)
        self.identity = Curried(
            tuple((s, s) for s in self.lstates),
            tuple((s, s) for s in self.rstates),
            tuple(sorted(((l, r), ident) for l in self.lstates for r in self.rstates)))

    def _labelled(self, letter: Letter, l, r) -> Letter:
        if self._out is None or letter.is_marker:
            return letter
        label = self._out[(l, letter.base, r)]
        return Letter(f"{letter.base}~{label}", letter.anns)

    def letter(self, letter: Letter) -> Curried:
        hit = self._letters.get(letter)
        if hit is not None:
            return hit
        if letter.is_marker or self._out is None:
            alpha = tuple((s, s) for s in self.lstates)
            rho = tuple((s, s) for s in self.rstates)
        else:
            alpha = tuple(sorted((s, self._ltrans[(s, letter.base)])
                                 for s in self.lstates))
            rho = tuple(sorted((s, self._rtrans[(s, letter.base)])
                               for s in self.rstates))
        table = {}
        for l in self.lstates:
            for r in self.rstates:
                ll = self._labelled(letter, l, r)
                table[(l, r)] = tuple(m.letter(ll) for m in self.monoids)
        out = Curried(alpha, rho, tuple(sorted(table.items())))
        self._letters[letter] = out
        return out

    def compose(self, f: Curried, g: Curried) -> Curried:
        fa, fr, ga, gr = f.alpha_map(), f.rho_map(), g.alpha_map(), g.rho_map()
        ft, gt = dict(f.table), dict(g.table)
        alpha = tuple(sorted((s, ga[fa[s]]) for s in self.lstates))
        rho = tuple(sorted((s, fr[gr[s]]) for s in self.rstates))
        table = {}
        for l in self.lstates:
            for r in self.rstates:
                left = ft[(l, gr[r])]
                right = gt[(fa[l], r)]
                table[(l, r)] = tuple(m.compose(a, b)
                                      for m, a, b in zip(self.monoids, left, right))
        return Curried(alpha, rho, tuple(sorted(table.items())))

    def word(self, w) -> Curried:
        elt = self.identity
        for letter in w:
            elt = self.compose(elt, self.letter(letter))
        return elt

    def is_idempotent(self, e: Curried) -> bool:
        return self.compose(e, e) == e

    def machine_element(self, e: Curried, component: int, l, r) -> Element:
        return e.at(l, r)[component]

    def reachable_sets(self, letters, state_cap: int = 10 ** 6):
        """Witnessed interior / left-closed / right-closed curried elements."""
        from .automata import StateCapExceeded
        letter_elts = [(l, self.letter(l)) for l in letters]

        def bfs(seeds):
            found, queue = {}, deque()
            for wit, elt in seeds:
                if elt not in found:
                    found[elt] = wit
                    queue.append((wit, elt))
            while queue:
                wit, elt = queue.popleft()
                for l, le in letter_elts:
                    nxt = self.compose(elt, le)
                    if nxt not in found:
                        if len(found) >= state_cap:
                            raise StateCapExceeded(state_cap,
                                                   "closing the behavior monoid")
                        found[nxt] = wit + (l,)
                        queue.append((wit + (l,), nxt))
            return found

        interior = bfs([((l,), e) for l, e in letter_elts])
        left = bfs([((BOT,), self.letter(BOT))])
        eot = self.letter(EOT)
        right = {}
        for elt, wit in itertools.chain(
                [(self.identity, ())],
                sorted(interior.items(), key=lambda kv: (len(kv[1]), kv[1]))):
            relt = self.compose(elt, eot)
            rwit = wit + (EOT,)
            if relt not in right:
                right[relt] = rwit
        def ordered(found):
            return tuple(sorted(found.items(), key=lambda kv: (len(kv[1]), kv[1])))
        return ordered(interior), ordered(left), ordered(right)


# ---------------------------------------------------------------------------
# Producing tuple sets.


@dataclass(frozen=True)
class SplicedTuple:
    """A (2k+1)-part witness whose odd parts pump to degree-k growth."""

    level: int
    components: tuple  # curried element per part
    parts: tuple       # concrete words; parts[0] starts with BOT, parts[-1] ends with EOT

    def family_parts(self):
        strip = lambda part: tuple(l for l in part if not l.is_marker)
        return tuple(strip(p) for p in self.parts)

    def family(self, n: int) -> Word:
        out = ()
        for i, part in enumerate(self.family_parts()):
            out += part * (n if i % 2 == 1 else 1)
        return out

    def size(self):
        return sum(len(p) for p in self.parts)


@dataclass
class ProducingTupleSet:
    level: int
    tuples: list
    morphism: PipelineMorphism

    @property
    def empty(self):
        return not self.tuples


def _annotation_combos(machine: NestedTransducer, above_layer: int):
    layers = [t for t in machine.layers if t.layer > above_layer]
    choices = [[None] + sorted(t.states) for t in layers]
    for combo in itertools.product(*choices):
        yield frozenset((t.layer, s) for t, s in zip(layers, combo) if s is not None)


def level_alphabet(pipe: Pipeline, level: int):
    """Input letters seen by the depth-``level`` sub-stack: base letters with
    any annotation combination from the layers above it."""
    bases = pipeline_bases(pipe)
    out = []
    for anns in _annotation_combos(pipe.machine, pipe.machine.layers[level - 1].layer):
        for b in bases:
            out.append(Letter(b, anns))
    return sorted(out)


def _component_monoids(pipe: Pipeline, depth: int):
    """Behavior monoids of layers 1..depth: output flags for the innermost
    layer, call flags toward the layer below for the others."""
    machine = pipe.machine
    out = [BehaviorMonoid(machine.layers[0],
                          machine.output_alphabet | machine.layers[0].call_letters())]
    for i in range(1, depth):
        t = machine.layers[i]
        out.append(BehaviorMonoid(t, {CallSym(machine.layers[i - 1].layer)}))
    return out


def _producing_crossings(morph, X, E, Y, top_idx):
    """Seam crossings of the (xe, ey) sequence at which the top component of
    E fires, evaluated in the middle-copy labelling context."""
    XE = morph.compose(X, E)
    EY = morph.compose(E, Y)
    l_mid = XE.alpha_map()[morph.l0]
    r_mid = EY.rho_map()[morph.r0]
    t = morph.monoids[top_idx].t
    xe_m = XE.at(morph.l0, EY.rho_map()[morph.r0])[top_idx]
    ey_m = EY.at(XE.alpha_map()[morph.l0], morph.r0)[top_idx]
    e_m = E.at(l_mid, r_mid)[top_idx]
    seq = transition_sequence([xe_m, ey_m], t.initial, RIGHT, _sat_add, 1)
    if seq.exit != (t.final, RIGHT):
        return None
    emap = e_m.mapping()
    crossings = []
    for i, (_, q, d) in enumerate(seq.consults[1:], start=1):
        row = emap[(q, d)]
        if row != DIVERGENT and row[2] >= 1:
            crossings.append((i, q, d))
    return crossings or None


def _labelled_word(pipe: Pipeline, w):
    """Apply the pipeline labelling to a marked word (markers pass through)."""
    if pipe.labelling is None:
        return w
    core_part = tuple(l for l in w if not l.is_marker)
    labelled = pipe.labelling.apply(core_part)
    out, i = [], 0
    for l in w:
        if l.is_marker:
            out.append(l)
        else:
            out.append(labelled[i])
            i += 1
    return tuple(out)


def _call_emissions(top: OnePebbleTransducer, labelled_seg, state, direction,
                    call: CallSym):
    """Simulate one pass of ``top`` through a labelled segment; yield
    (offset, state) for each emission of ``call``."""
    n = len(labelled_seg)
    if n == 0:
        return []
    pos = 0 if direction == RIGHT else n - 1
    seen = set()
    out = []
    q = state
    while 0 <= pos < n:
        key = (pos, q)
        if key in seen:
            return []
        seen.add(key)
        got = top.delta(labelled_seg[pos], q)
        if got is None:
            return []
        target, d, output = got
        for item in output:
            if item == call:
                out.append((pos, q))
        q = target
        if labelled_seg[pos].base == EOT.base and d == RIGHT:
            break
        pos = pos + 1 if d == RIGHT else pos - 1
    return out


def _idempotent_run(morph, blocks):
    """First consecutive run of blocks whose image is idempotent; returns
    (start, end) block indices or None."""
    for width in range(1, len(blocks) + 1):
        for start in range(0, len(blocks) - width + 1):
            img = morph.word(sum(blocks[start:start + width], ()))
            if morph.is_idempotent(img):
                return start, start + width
    return None


def _splice(morph_hi, fac, copies_span, u1, level):
    """Assemble the (2(level+1)+1)-part tuple from a factorization whose pump
    blocks avoid the copies region; one flank copy is donated to each side so
    every pumped repetition sits in a stable context."""
    lo, hi = copies_span
    parts = []  # (word, is_pump)
    pos = 0
    placed = False
    for i, part in enumerate(fac.parts):
        start, end = pos, pos + len(part)
        pos = end
        if i % 2 == 1:
            blocks = fac.blocks[(i - 1) // 2]
            run = _idempotent_run(morph_hi, blocks)
            if run is None:
                return None
            b0, b1 = run
            head = sum(blocks[:b0], ())
            pump = sum(blocks[b0:b1], ())
            tail = sum(blocks[b1:], ())
            if head:
                parts[-1] = (parts[-1][0] + head, False)
            parts.append((pump, True))
            parts.append((tail, False))  # may be empty, merged below
        elif start <= lo and hi <= end:
            cut = lo - start + len(u1)
            left = part[:cut]                  # up to and incl. the first copy
            right = part[cut + len(u1):]       # third copy onward
            parts.append((left, False))
            parts.append((u1, True))           # the annotated middle copy, bare
            parts.append((right, False))
            placed = True
        else:
            parts.append((part, False))
    if not placed:
        return None
    # merge empty glue into neighbours; all non-pump parts must end non-empty
    merged = []
    for w, pump in parts:
        if pump:
            merged.append((w, True))
        elif merged and not merged[-1][1]:
            merged[-1] = (merged[-1][0] + w, False)
        else:
            merged.append((w, False))
    if any(not w for w, pump in merged):
        return None
    if sum(1 for _, pump in merged if pump) != level + 1:
        return None
    words = tuple(w for w, _ in merged)
    components = tuple(morph_hi.word(w) for w in words)
    for idx in range(1, len(words), 2):
        if not morph_hi.is_idempotent(components[idx]):
            return None
    return SplicedTuple(level + 1, components, words)


def producing_tuples(machine, s: int = 3, copies: int = 3, max_tuples: int = 8,
                     max_pads: int = 4, state_cap: int = 10 ** 6):
    """Producing tuple sets for levels 1..depth of a machine or pipeline.

    ``s`` is the block multiplicity demanded of lower-level factorizations;
    ``copies`` the repetition count of the top pump when splicing (>= 3 so
    the middle repetition has stable context on both sides).
    """
    if copies < 3:
        raise ValueError("copies must be at least 3")
    pipe = as_pipeline(machine)
    sets = []
    for depth in range(1, pipe.machine.depth + 1):
        sets.append(_level_set(pipe, depth, sets[-1] if sets else None,
                               s=s, copies=copies, max_tuples=max_tuples,
                               max_pads=max_pads, state_cap=state_cap))
    return sets


def _level_set(pipe: Pipeline, depth: int, lower: Optional[ProducingTupleSet],
               s: int, copies: int, max_tuples: int, max_pads: int,
               state_cap: int = 10 ** 6) -> ProducingTupleSet:
    monoids = _component_monoids(pipe, depth)
    morph = PipelineMorphism(pipe, monoids)
    alphabet = level_alphabet(pipe, depth)
    interior, left, right = morph.reachable_sets(alphabet, state_cap)
    top_idx = depth - 1
    tuples = []
    idems = [(e, wit) for e, wit in interior if morph.is_idempotent(e)]
    if depth == 1:
        for e, ewit in idems:
            for x, xwit in left:
                for y, ywit in right:
                    crossings = _producing_crossings(morph, x, e, y, 0)
                    if crossings:
                        tuples.append(SplicedTuple(1, (x, e, y),
                                                   (xwit, ewit, ywit)))
                        if len(tuples) >= max_tuples:
                            return ProducingTupleSet(1, tuples, morph)
        return ProducingTupleSet(1, tuples, morph)
    if lower is None or lower.empty:
        return ProducingTupleSet(depth, [], morph)

    morph_lo = lower.morphism
    call = CallSym(pipe.machine.layers[depth - 2].layer)
    top = pipe.machine.layers[depth - 1]
    pads = [()] + [wit for e, wit in idems[:max_pads]]
    seen = set()
    for e, ewit in idems:
        for x, xwit in left:
            for y, ywit in right:
                if len(tuples) >= max_tuples:
                    return ProducingTupleSet(depth, tuples, morph)
                found = _splice_candidates(
                    pipe, morph, morph_lo, lower, top, top_idx, call,
                    (x, xwit), (e, ewit), (y, ywit), pads, s, copies, depth)
                for tup in found:
                    if tup.components not in seen:
                        seen.add(tup.components)
                        tuples.append(tup)
                        if len(tuples) >= max_tuples:
                            break
    return ProducingTupleSet(depth, tuples, morph)


def _splice_candidates(pipe, morph, morph_lo, lower, top, top_idx, call,
                       xw, ew, yw, pads, s, copies, depth):
    (x, xwit), (e, ewit), (y, ywit) = xw, ew, yw
    if not ewit:
        return []
    out = []
    pad_count = (s + 1) * (depth - 1)  # room for the lower pump runs and glue
    for pad in pads:
        for side in ("right", "left"):
            if pad == () and side == "left":
                continue
            pad_words = pad * pad_count
            if side == "right":
                c_word = xwit + ewit * copies + pad_words + ywit
                copies_lo = len(xwit)
            else:
                c_word = xwit + pad_words + ewit * copies + ywit
                copies_lo = len(xwit) + len(pad_words)
            copies_hi = copies_lo + copies * len(ewit)
            pad_elt = morph.word(pad_words)
            if side == "right":
                x_eff, y_eff = x, morph.compose(pad_elt, y)
            else:
                x_eff, y_eff = morph.compose(x, pad_elt), y
            crossings = _producing_crossings(morph, x_eff, e, y_eff, top_idx)
            if not crossings:
                continue
            labelled = _labelled_word(pipe, c_word)
            mid_seg = labelled[copies_lo + len(ewit):copies_lo + 2 * len(ewit)]
            for _, q, d in crossings:
                emissions = _call_emissions(top, mid_seg, q, d, call)
                for off, q_emit in emissions[:2]:
                    j = copies_lo + len(ewit) + off
                    c_ann = (c_word[:j]
                             + (c_word[j].annotate(top.layer, q_emit),)
                             + c_word[j + 1:])
                    tup = _match_lower(morph, morph_lo, lower, c_ann,
                                       (copies_lo, copies_hi), ewit, s, depth)
                    if tup is not None:
                        out.append(tup)
                        return out
    return out


def _match_lower(morph, morph_lo, lower, c_ann, copies_span, u1, s, depth):
    for t in lower.tuples:
        fac = find_factorization(c_ann, morph_lo, depth - 1, s,
                                 according=t.components,
                                 forbid_span=copies_span)
        if fac is None:
            continue
        spliced = _splice(morph, fac, copies_span, u1, depth - 1)
        if spliced is not None:
            return spliced
    return None


# ---------------------------------------------------------------------------
# Collapse constructions: remove the top nesting layer.


_T, _GO, _S, _RET = "T", "go", "S", "ret"
_FINAL = ("F",)
_DEAD = ("D",)


def _token_base(token: str) -> str:
    base, _, _ = token.rpartition("~")
    return base


def _token_ordinals(token: str):
    _, _, label = token.rpartition("~")
    if not label.startswith("i"):
        return frozenset()
    return frozenset(int(part) for part in label[1:].split("_"))


def call_bound(top: OnePebbleTransducer, call: CallSym, start: int = 2,
               limit: int = 2 ** 16) -> int:
    """Least upper bound on the number of ``call`` emissions over any accepted
    word, by the saturating counting abstraction with a doubling cap."""
    cap = start
    while cap <= limit:
        monoid = BehaviorMonoid(top, {call}, cap=cap)
        interior, left, right = monoid.reachable_sets()
        eot = monoid.letter(EOT)
        best = 0
        saturated = False
        for wit in left:
            full = monoid.compose(wit.element, eot)
            row = full.mapping()[(top.initial, RIGHT)]
            if row == DIVERGENT or (row[0], row[1]) != (top.final, RIGHT):
                continue
            if row[2] >= cap:
                saturated = True
                break
            best = max(best, row[2])
        if not saturated:
            return best
        cap *= 2
    raise CollapseUnsupported(f"call bound for {call.token()} exceeds {limit}")


def _mint_states(tuples_in_order):
    names = {}
    for st in tuples_in_order:
        if st not in names:
            if st == _FINAL:
                names[st] = "halt"
            elif st == _DEAD:
                names[st] = "dead"
            else:
                names[st] = f"z{len(names)}"
    return names


def _split_at_call(items, call):
    for p, item in enumerate(items):
        if item == call:
            return tuple(items[:p]), tuple(items[p + 1:])
    return None


def inline_collapse(pipe: Pipeline, bound: Optional[int] = None) -> Pipeline:
    """Remove the top layer by simulating its boundedly many calls inline in
    the layer below, navigating with a call-position labelling."""
    machine = pipe.machine
    if machine.depth < 2:
        raise CollapseUnsupported("nothing to collapse below a single layer")
    top = machine.layers[-1]
    callee = machine.layers[-2]
    call = CallSym(callee.layer)
    cert = analysis.bounded_in(top, {call})
    if not cert.bounded:
        raise AnalysisRefusal(
            f"top layer emits unboundedly many {call.token()}",
            evidence=cert.triple)
    for t in machine.layers[:-2]:
        if any(r.pattern.kind != 0 for r in t.rules):  # 0 = ANY
            raise CollapseUnsupported(
                f"layer {t.layer} inspects annotations; inline collapse "
                "below it is not implemented")
    n_bound = call_bound(top, call) if bound is None else bound
    lab = call_position_labelling(top, call, n_bound)
    labels = lab.labels
    tokens = sorted(f"{b}~{l}" for b in sorted(top.input_bases) for l in labels)
    rules, order = _inline_rules(top, callee, tokens)
    names = _mint_states(order)
    specs = []
    for t in machine.layers[:-2]:
        lifted = relabel_inputs(t, labels)
        specs.append({"layer": t.layer, "states": lifted.states,
                      "initial": t.initial, "final": t.final,
                      "rules": lifted.rules})
    new_rules = [Rule(names[s], pat, names[t2], d, out)
                 for (s, pat, t2, d, out) in rules]
    specs.append({"layer": callee.layer, "states": set(names.values()),
                  "initial": names[(_T, top.initial, 0)],
                  "final": names[_FINAL], "rules": new_rules})
    new_machine = _assemble(f"{machine.name}.collapsed", specs, tokens,
                            machine.output_alphabet)
    bases = pipeline_bases(pipe)
    new_lab = lab if pipe.labelling is None else compose_labellings(
        pipe.labelling, lab, bases)
    return Pipeline(new_lab, new_machine, name=f"{pipe.name}.collapsed")


def _assemble(name, specs, bases, output_alphabet):
    from .core import build_nested
    return build_nested(name, specs, bases, output_alphabet)


def _inline_rules(top, callee, tokens):
    """Transition table of the inlined machine, over tuple states."""
    call = CallSym(callee.layer)
    letters = [Letter(tok) for tok in tokens]
    rules = []
    order = []
    seen = set()
    queue = deque()

    def visit(st):
        if st not in seen:
            seen.add(st)
            order.append(st)
            queue.append(st)

    def emit(st, letter, target, direction, output=()):
        pat = Pattern(letter.base, 0, None)  # ANY
        rules.append((st, pat, target, direction, tuple(output)))
        visit(target)

    visit((_T, top.initial, 0))
    visit(_FINAL)
    visit(_DEAD)
    while queue:
        st = queue.popleft()
        kind = st[0]
        if st == _FINAL or st == _DEAD:
            emit(st, BOT, st, RIGHT)
            emit(st, EOT, st, RIGHT if st == _FINAL else LEFT)
            for letter in letters:
                emit(st, letter, st, RIGHT)
            continue
        if kind == _T:
            _, q, c = st
            got = top.delta(BOT, q)
            emit(st, BOT, (_T, got[0], c) if got else _DEAD, RIGHT)
            if q == top.final:
                emit(st, EOT, _FINAL, RIGHT)
            else:
                got = top.delta(EOT, q)
                if got is None:
                    emit(st, EOT, _DEAD, LEFT)
                elif got[1] == RIGHT:
                    emit(st, EOT, _FINAL, RIGHT)
                else:
                    emit(st, EOT, (_T, got[0], c), LEFT)
            for letter in letters:
                base = _token_base(letter.base)
                got = top.delta(Letter(base), q)
                if got is None:
                    emit(st, letter, _DEAD, RIGHT)
                    continue
                target, direction, output = got
                split = _split_at_call(output, call)
                if split is None:
                    emit(st, letter, (_T, target, c), direction, output)
                elif c + 1 > _ordinal_cap(tokens):
                    emit(st, letter, _DEAD, RIGHT)
                else:
                    prefix, pending = split
                    info = (c + 1, q, pending, target, direction)
                    emit(st, letter, (_GO, info), LEFT, prefix)
            continue
        if kind == _GO:
            info = st[1]
            got = callee.delta(BOT, callee.initial)
            emit(st, BOT, (_S, got[0], info) if got else _DEAD, RIGHT)
            emit(st, EOT, _DEAD, LEFT)
            for letter in letters:
                emit(st, letter, st, LEFT)
            continue
        if kind == _S:
            _, s, info = st
            i, q_call, pending, tq, td = info
            got = callee.delta(BOT, s)
            emit(st, BOT, (_S, got[0], info) if got else _DEAD, RIGHT)
            if s == callee.final:
                emit(st, EOT, (_RET, info), LEFT)
            else:
                got = callee.delta(EOT, s)
                if got is None:
                    emit(st, EOT, _DEAD, LEFT)
                elif got[1] == RIGHT:
                    emit(st, EOT, (_RET, info), LEFT)
                else:
                    emit(st, EOT, (_S, got[0], info), LEFT)
            for letter in letters:
                base = _token_base(letter.base)
                here = i in _token_ordinals(letter.base)
                synth = (Letter(base, {(top.layer, q_call)}) if here
                         else Letter(base))
                got = callee.delta(synth, s)
                if got is None:
                    emit(st, letter, _DEAD, RIGHT)
                else:
                    emit(st, letter, (_S, got[0], info), got[1], got[2])
            continue
        if kind == _RET:
            info = st[1]
            i, q_call, pending, tq, td = info
            emit(st, BOT, _DEAD, RIGHT)
            emit(st, EOT, st, LEFT)
            for letter in letters:
                if i not in _token_ordinals(letter.base):
                    emit(st, letter, st, LEFT)
                    continue
                split = _split_at_call(pending, call)
                if split is None:
                    emit(st, letter, (_T, tq, i), td, pending)
                else:
                    prefix, rest = split
                    if i + 1 > _ordinal_cap(tokens):
                        emit(st, letter, _DEAD, RIGHT)
                    else:
                        info2 = (i + 1, q_call, rest, tq, td)
                        emit(st, letter, (_GO, info2), LEFT, prefix)
            continue
    return rules, order


def _ordinal_cap(tokens):
    best = 0
    for tok in tokens:
        for i in _token_ordinals(tok):
            best = max(best, i)
    return best


class _WordMonoid:
    """Behavior elements whose payload is the produced word, capped in length."""

    LONG = ("<long>",)

    def __init__(self, t: OnePebbleTransducer, cap: int):
        self.t = t
        self.cap = cap
        self._letters = {}
        states = sorted(t.states)
        self.identity = Element(tuple(sorted(
            ((q, d), (q, d, ())) for q in states for d in (RIGHT, LEFT))))

    def _add(self, a, b, cap):
        if a == self.LONG or b == self.LONG:
            return self.LONG
        joined = a + b
        return joined if len(joined) <= self.cap else self.LONG

    def letter(self, letter: Letter) -> Element:
        hit = self._letters.get(letter)
        if hit is None:
            table = {}
            for q in sorted(self.t.states):
                got = self.t.delta(letter, q)
                if letter.base == EOT.base and q == self.t.final:
                    row = (q, RIGHT, ())
                elif got is None:
                    row = DIVERGENT
                else:
                    out = tuple(got[2])
                    row = (got[0], got[1], out if len(out) <= self.cap else self.LONG)
                for d in (RIGHT, LEFT):
                    table[(q, d)] = row
            hit = Element(tuple(sorted(table.items())))
            self._letters[letter] = hit
        return hit

    def compose(self, f, g):
        table = {}
        for q in sorted(self.t.states):
            for d in (RIGHT, LEFT):
                seq = transition_sequence([f, g], q, d, self._add, None, zero=())
                if seq.exit is None:
                    table[(q, d)] = DIVERGENT
                else:
                    q2, d2 = seq.exit
                    table[(q, d)] = (q2, d2, seq.payload)
        return Element(tuple(sorted(table.items())))


def value_lookup_collapse(pipe: Pipeline, length_limit: int = 2 ** 12) -> Pipeline:
    """Remove a two-layer machine's inner layer whose function is bounded:
    every call is replaced by the value looked up from a labelling."""
    machine = pipe.machine
    if machine.depth != 2:
        raise CollapseUnsupported("value lookup collapse needs exactly 2 layers")
    callee, top = machine.layers
    call = CallSym(callee.layer)
    cert = analysis.bounded_in(callee, machine.output_alphabet)
    if not cert.bounded:
        raise AnalysisRefusal("inner layer output is unbounded",
                              evidence=cert.triple)
    cap = 4
    while True:
        built = _try_value_labelling(pipe, top, callee, call, cap)
        if built is not None:
            return built
        cap *= 2
        if cap > length_limit:
            raise CollapseUnsupported("inner values exceed the length limit")


def _try_value_labelling(pipe, top, callee, call, cap):
    from .labelling import RegularLabelling, _dfa, _mint

    wm = _WordMonoid(callee, cap)
    bases = sorted(top.input_bases)

    def explore(init, extend):
        order, seen, trans = [init], {init}, {}
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

    lorder, ltrans = explore(wm.letter(BOT),
                             lambda x, b: wm.compose(x, wm.letter(Letter(b))))
    rorder, rtrans = explore(wm.letter(EOT),
                             lambda y, b: wm.compose(wm.letter(Letter(b)), y))
    value_maps = {}
    out = {}
    lnames = _mint(lorder, "s")
    rnames = _mint(rorder, "t")
    for x in lorder:
        for b in bases:
            for y in rorder:
                vmap = {}
                for q in sorted(top.states):
                    mid = wm.letter(Letter(b, {(top.layer, q)}))
                    full = wm.compose(wm.compose(x, mid), y)
                    row = full.mapping()[(callee.initial, RIGHT)]
                    if row == DIVERGENT or (row[0], row[1]) != (callee.final, RIGHT):
                        vmap[q] = None
                    elif row[2] == wm.LONG:
                        return None  # cap too small somewhere reachable
                    else:
                        vmap[q] = row[2]
                key = tuple(sorted(vmap.items()))
                token = value_maps.setdefault(key, f"v{len(value_maps)}")
                out[(lnames[x], b, rnames[y])] = token
    left = _dfa([lnames[s] for s in lorder], lnames[lorder[0]],
                {(lnames[s], b): lnames[t] for (s, b), t in ltrans.items()})
    right = _dfa([rnames[s] for s in rorder], rnames[rorder[0]],
                 {(rnames[s], b): rnames[t] for (s, b), t in rtrans.items()})
    labels = tuple(value_maps.values())
    lab = RegularLabelling(left, right, tuple(sorted(out.items())), labels)
    by_token = {tok: dict(key) for key, tok in value_maps.items()}

    rules = []
    dead = "dead"
    for tok, vmap in by_token.items():
        for r in top.rules:
            if r.pattern.base in (BOT.base, EOT.base):
                continue
            new_out = []
            ok = True
            for item in r.output:
                if item == call:
                    value = vmap.get(r.state)
                    if value is None:
                        ok = False
                        break
                    new_out.extend(value)
                else:
                    new_out.append(item)
            pat = Pattern(f"{r.pattern.base}~{tok}", r.pattern.kind, r.pattern.arg)
            if ok:
                rules.append(Rule(r.state, pat, r.target, r.direction,
                                  tuple(new_out)))
            else:
                rules.append(Rule(r.state, pat, dead, RIGHT, ()))
    for r in top.rules:
        if r.pattern.base in (BOT.base, EOT.base):
            rules.append(r)
    tokens = sorted(f"{b}~{tok}" for b in bases for tok in labels)
    states = set(top.states) | {dead}
    for tok in [BOT.base, EOT.base] + tokens:
        direction = LEFT if tok == EOT.base else RIGHT
        rules.append(Rule(dead, Pattern(tok, 0, None), dead, direction, ()))
    specs = [{"layer": 1, "states": states, "initial": top.initial,
              "final": top.final, "rules": rules}]
    new_machine = _assemble(f"{pipe.machine.name}.flat", specs, tokens,
                            pipe.machine.output_alphabet)
    base_alpha = pipeline_bases(pipe)
    new_lab = lab if pipe.labelling is None else compose_labellings(
        pipe.labelling, lab, base_alpha)
    return Pipeline(new_lab, new_machine, name=f"{pipe.name}.flat")


# ---------------------------------------------------------------------------
# Factorization recognizers and the necessary-call rewrite.


def factorization_recognizer(tuples, s: int, morphism, alphabet,
                             state_cap: int = 10 ** 6):
    """NFA accepting the marked words with a k,s-factorization according to
    some tuple in ``tuples`` (tuple components in ``morphism``'s monoid)."""
    nfa = NFA()
    for tid, tup in enumerate(tuples):
        comps = tup.components if isinstance(tup, SplicedTuple) else tuple(tup)
        k = len(comps) // 2
        start = ("w", tid, 0, morphism.identity, False)
        nfa.inits.add(start)
        frontier = {start}
        seen = {start}
        while frontier:
            nxt = set()
            for st in frontier:
                for eps in _recognizer_eps(st, comps, s, morphism):
                    nfa.add_eps(st, eps)
                    if eps not in seen:
                        seen.add(eps)
                        nxt.add(eps)
                for letter in alphabet:
                    dst = _recognizer_step(st, letter, morphism)
                    if dst is not None:
                        nfa.add(st, letter, dst)
                        if dst not in seen:
                            seen.add(dst)
                            nxt.add(dst)
                if len(seen) > state_cap:
                    raise StateCapExceeded(state_cap, "building recognizer")
            frontier = nxt
        for st in seen:
            kind, t, seg, img, nonempty = st[:5]
            if kind == "w" and seg == 2 * k and nonempty and img == comps[2 * k]:
                nfa.finals.add(st)
    return nfa


def _recognizer_step(st, letter, morphism):
    kind, tid, seg, img, _ = st[:5]
    new = morphism.compose(img, morphism.letter(letter))
    if kind == "w":
        return ("w", tid, seg, new, True)
    blk = st[5]
    return ("x", tid, seg, new, True, blk)


def _recognizer_eps(st, comps, s, morphism):
    kind, tid, seg, img, nonempty = st[:5]
    out = []
    if kind == "w":
        if nonempty and img == comps[seg] and seg < len(comps) - 1:
            out.append(("x", tid, seg + 1, morphism.identity, False, 1))
    else:
        blk = st[5]
        if nonempty and img == comps[seg]:
            if blk < s:
                out.append(("x", tid, seg, morphism.identity, False, blk + 1))
            else:
                out.append(("w", tid, seg + 1, morphism.identity, False))
    return out


def recognizer_dfa(tuples, s, morphism, alphabet, state_cap: int = 10 ** 6):
    nfa = factorization_recognizer(tuples, s, morphism, alphabet, state_cap)
    return determinize(nfa, alphabet, state_cap, "recognizer")


@dataclass
class CallRewrite:
    labelling: RegularLabelling
    machine: OnePebbleTransducer
    call: CallSym
    cheap_symbol: str
    keep_maps: dict  # label token -> {state: KEEP | CHEAP}


def necessary_call_rewrite(top: OnePebbleTransducer, recognizer: NFA,
                           call: CallSym, state_cap: int = 10 ** 6) -> CallRewrite:
    """Keep a call only where the configuration admits a factorization; other
    emissions become a plain cheap marker.  The decision is a label computed
    from the recognizer by a bimachine."""
    bases = sorted(top.input_bases)
    keep_maps = {}

    def mid(lset, letter, q):
        return recognizer.step(lset, Letter(letter.base, {(top.layer, q)}))

    def label_of(pred):
        hmap = tuple((q, KEEP if pred(q) else CHEAP) for q in sorted(top.states))
        token = "k" + "".join("1" if v == KEEP else "0" for _, v in hmap)
        keep_maps[token] = dict(hmap)
        return token

    lab = bimachine_from_nfa(recognizer, bases, mid, label_of, state_cap,
                             "necessary-call labelling")
    cheap = f"cheap_call_{call.target}"
    rules = []
    for r in top.rules:
        if r.pattern.base in (BOT.base, EOT.base):
            rules.append(r)
            continue
        for token, hmap in keep_maps.items():
            out = tuple(item if item != call else
                        (call if hmap[r.state] == KEEP else cheap)
                        for item in r.output)
            pat = Pattern(f"{r.pattern.base}~{token}", r.pattern.kind,
                          r.pattern.arg)
            rules.append(Rule(r.state, pat, r.target, r.direction, out))
    tokens = {f"{b}~{tok}" for b in bases for tok in keep_maps}
    machine = OnePebbleTransducer(
        top.layer, top.states, top.initial, top.final, rules, tokens,
        top.output_symbols | {cheap}, top.ann_universe)
    return CallRewrite(lab, machine, call, cheap, keep_maps)


# ---------------------------------------------------------------------------
# Degree decision and minimization.


@dataclass
class GrowthReport:
    decided_degree: int
    witness_family: Optional[tuple]
    empirical_degree: Optional[int]
    agreement: bool
    level_sizes: tuple = ()
    collapse_chain: tuple = ()
    config: dict = field(default_factory=dict)


def empirical_degree(machine, families, n_max: int = 24,
                     max_degree: int = 6) -> Optional[int]:
    """Fitted growth degree from finite differences of the output length over
    pumped families; exact polynomial tails stabilize, otherwise the log-log
    slope is rounded.  Families with undefined members are rejected."""
    pipe = as_pipeline(machine)
    best = None
    for parts in families:
        ns = list(range(1, n_max + 1))
        vals = [pipeline_output_length(pipe, analysis.pump_family(parts, n))
                for n in ns]
        if any(v is None for v in vals):
            continue
        d = _fit_degree(vals, max_degree)
        if d is None:
            continue
        best = d if best is None else max(best, d)
    return best


def _fit_degree(vals, max_degree):
    import math
    seq = list(vals)
    for d in range(0, max_degree + 1):
        window = seq[2:] if len(seq) > 4 else seq
        if window and all(v == window[0] for v in window):
            return d if (d == 0 or window[0] != 0) else d - 1
        seq = [b - a for a, b in zip(seq, seq[1:])]
    pairs = [(n + 1, v) for n, v in enumerate(vals) if v and v > 0]
    if len(pairs) < 2:
        return None
    (n1, v1), (n2, v2) = pairs[len(pairs) // 2], pairs[-1]
    if n1 == n2:
        return None
    return round(math.log(v2 / v1) / math.log(n2 / n1))


def _probe_families(pipe: Pipeline):
    fams = []
    for b in pipeline_bases(pipe):
        fams.append(((), (Letter(b),), ()))
    return fams


def collapse_bounded(machine, bound: Optional[int] = None) -> Pipeline:
    """Claim-style collapse: the top layer's calls to the layer below are
    boundedly many and get simulated inline; refuses with a producing triple
    when they are not."""
    return inline_collapse(as_pipeline(machine), bound)


def _collapse_once(pipe: Pipeline) -> tuple:
    machine = pipe.machine
    top = machine.layers[-1]
    call = CallSym(machine.layers[-2].layer)
    if analysis.bounded_in(top, {call}).bounded:
        return inline_collapse(pipe), f"inline ({call.token()} bounded)"
    if machine.depth == 2:
        callee = machine.layers[0]
        if analysis.bounded_in(callee, machine.output_alphabet).bounded:
            return value_lookup_collapse(pipe), "value lookup (inner bounded)"
    raise CollapseUnsupported(
        "no supported collapse: top calls are unbounded and the inner stack "
        "is neither a single bounded layer nor inspectable at this depth")


def _decide(pipe: Pipeline, s: int, copies: int, chain,
            state_cap: int = 10 ** 6):
    sets = producing_tuples(pipe, s=s, copies=copies, state_cap=state_cap)
    sizes = tuple(len(x.tuples) for x in sets)
    if sets[-1].tuples:
        best = min(sets[-1].tuples, key=lambda t: (t.size(), t.parts))
        return pipe.machine.depth, best.family_parts(), chain, sizes
    if pipe.machine.depth == 1:
        return 0, None, chain, sizes
    collapsed, how = _collapse_once(pipe)
    chain = chain + (f"depth {pipe.machine.depth} -> {collapsed.machine.depth}: {how}",)
    degree, family, chain, _ = _decide(collapsed, s, copies, chain, state_cap)
    return degree, family, chain, sizes


def decide_degree(machine, s: int = 3, copies: int = 3,
                  n_max: Optional[int] = None,
                  state_cap: int = 10 ** 6) -> GrowthReport:
    """Growth degree of the realized function, with a pumping witness family
    and an independent empirical fit for cross-checking."""
    pipe = as_pipeline(machine)
    degree, family, chain, sizes = _decide(pipe, s, copies, (),
                                           state_cap=state_cap)
    if n_max is None:
        n_max = {1: 40, 2: 24}.get(pipe.machine.depth, 8)
    fams = _probe_families(pipe)
    if family is not None:
        fams = [family] + fams
    emp = empirical_degree(pipe, fams, n_max=n_max)
    emp = 0 if emp is None else emp
    return GrowthReport(degree, family, emp, emp == degree, sizes, chain,
                        {"s": s, "copies": copies, "n_max": n_max})


@dataclass
class MinimizeResult:
    pipeline: Pipeline
    report: GrowthReport
    finite_output_certificate: Optional[tuple] = None


def minimize(machine, s: int = 3, copies: int = 3,
             state_cap: int = 10 ** 6) -> MinimizeResult:
    """Equivalent pipeline with as few nesting layers as the growth degree
    (one layer for bounded functions, plus a finite-output certificate)."""
    pipe = as_pipeline(machine)
    chain = ()
    while pipe.machine.depth > 1:
        sets = producing_tuples(pipe, s=s, copies=copies, state_cap=state_cap)
        if sets[-1].tuples:
            break
        pipe, how = _collapse_once(pipe)
        chain = chain + (how,)
    report = decide_degree(machine, s=s, copies=copies, state_cap=state_cap)
    cert = None
    if report.decided_degree == 0:
        cert = _finite_outputs(pipe, max_len=4)
    report.collapse_chain = chain
    return MinimizeResult(pipe, report, cert)


def _finite_outputs(pipe: Pipeline, max_len: int):
    outs = set()
    bases = pipeline_bases(pipe)
    for n in range(max_len + 1):
        for combo in itertools.product(bases, repeat=n):
            r = eval_pipeline(pipe, tuple(Letter(b) for b in combo))
            if r.accepted:
                outs.add(tuple(map(str, r.output)))
    return tuple(sorted(outs))
