"""Data model for symbols, words, pebble transducers and their validation.

A letter is a base symbol plus a finite set of (layer, state) annotations;
a nested transducer is an ordered stack of deterministic two-way transducers
where layer i+1 may emit ``call_j`` (j <= i) to run layer j over its current
configuration.  Values are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

LMARK = "⊢"  # left endmarker
RMARK = "⊣"  # right endmarker
RIGHT = "R"
LEFT = "L"

RESERVED_CHARS = set("@{},") | {LMARK, RMARK}

EXACT, CONTAINS, ANY = 2, 1, 0  # pattern precedence, highest wins


class PebbleError(Exception):
    """Base class for errors raised by this package."""


class SymbolError(PebbleError):
    pass


class InputError(PebbleError):
    """A word contains a letter outside the machine's alphabet."""


_MARK_GROUP = __import__("re").compile(r"%\{\d+(,\d+)*\}$")


def check_symbol(name: str) -> str:
    if not name:
        raise SymbolError("empty symbol name")
    core_part = _MARK_GROUP.sub("", name)  # marked letters like a%{1,3}
    for ch in core_part:
        if ch.isspace() or ch in RESERVED_CHARS:
            raise SymbolError(f"illegal character {ch!r} in symbol {name!r}")
    return name


@dataclass(frozen=True, order=True)
class Letter:
    """A base symbol with optional (layer, state) annotations.

    Annotations mark the control state of enclosing layers; at most one
    annotation per layer.  Endmarkers are plain letters with the reserved
    bases and never carry annotations.
    """

    base: str
    anns: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "anns", frozenset(self.anns))

    @property
    def is_marker(self) -> bool:
        return self.base in (LMARK, RMARK)

    def annotate(self, layer: int, state: str) -> "Letter":
        if any(l == layer for l, _ in self.anns):
            raise SymbolError(f"duplicate annotation for layer {layer}")
        return Letter(self.base, self.anns | {(layer, state)})

    def token(self) -> str:
        """Canonical text form, e.g. ``a`` or ``a@{2:qF}``."""
        if not self.anns:
            return self.base
        inner = ",".join(f"{l}:{s}" for l, s in sorted(self.anns))
        return f"{self.base}@{{{inner}}}"

    def __repr__(self):
        return f"Letter({self.token()!r})"


BOT = Letter(LMARK)
EOT = Letter(RMARK)

Word = tuple  # tuple[Letter, ...]


def word(symbols: Iterable[str]) -> Word:
    return tuple(Letter(s) for s in symbols)


def parse_word(text: str) -> Word:
    """Turn CLI input into a word: split on spaces, else one symbol per char."""
    if text == "":
        return ()
    toks = text.split() if " " in text else list(text)
    return word(toks)


def word_token(w: Word) -> str:
    return "".join(l.token() for l in w) if all(
        len(l.token()) == 1 for l in w) else " ".join(l.token() for l in w)


@dataclass(frozen=True)
class CallSym:
    """Output letter that invokes a lower layer on the current configuration."""

    target: int

    def token(self) -> str:
        return f"call({self.target})"

    def __repr__(self):
        return f"CallSym({self.target})"


OutItem = object  # str | CallSym


@dataclass(frozen=True)
class Pattern:
    """Input pattern of a transition rule.

    kind EXACT matches one annotation set, CONTAINS requires one (layer,
    state) or any-layer state to be present, ANY matches every annotation
    set over the base.
    """

    base: str
    kind: int
    arg: object = None  # EXACT: frozenset[(layer, state)]; CONTAINS: (layer|None, state)

    def matches(self, letter: Letter) -> bool:
        if letter.base != self.base:
            return False
        if self.kind == ANY:
            return True
        if self.kind == EXACT:
            return letter.anns == self.arg
        layer, state = self.arg
        for l, s in letter.anns:
            if s == state and (layer is None or l == layer):
                return True
        return False

    def token(self) -> str:
        if self.kind == ANY:
            return f"{self.base}@*"
        if self.kind == CONTAINS:
            layer, state = self.arg
            return f"{self.base}@+{state}" if layer is None else f"{self.base}@+{layer}:{state}"
        if not self.arg:
            return self.base
        inner = ",".join(f"{l}:{s}" for l, s in sorted(self.arg))
        return f"{self.base}@{{{inner}}}"


@dataclass(frozen=True)
class Rule:
    state: str
    pattern: Pattern
    target: str
    direction: str
    output: tuple = ()


@dataclass(frozen=True)
class Violation:
    layer: int
    message: str
    state: Optional[str] = None
    letter: Optional[str] = None

    def __str__(self):
        where = f"layer {self.layer}"
        if self.state is not None:
            where += f", state {self.state}"
        if self.letter is not None:
            where += f", letter {self.letter}"
        return f"{where}: {self.message}"


class OnePebbleTransducer:
    """A deterministic two-way transducer with per-transition output.

    ``delta`` is resolved through the rule patterns with precedence
    exact > contains > any; the parser rejects overlapping rules of equal
    precedence, so resolution is deterministic.
    """

    def __init__(self, layer, states, initial, final, rules,
                 input_bases, output_symbols, ann_universe=None):
        self.layer = layer
        self.states = frozenset(states)
        self.initial = initial
        self.final = final
        self.rules = tuple(rules)
        self.input_bases = frozenset(input_bases)
        self.output_symbols = frozenset(output_symbols)
        # layers above this one whose states may annotate input letters
        self.ann_universe = dict(ann_universe or {})
        self._cache = {}
        self._by_state_base = {}
        for r in self.rules:
            self._by_state_base.setdefault((r.state, r.pattern.base), []).append(r)

    def rule_for(self, letter: Letter, state: str):
        key = (letter, state)
        hit = self._cache.get(key)
        if hit is not None:
            return hit if hit is not _MISS else None
        cands = self._by_state_base.get((state, letter.base), ())
        best = None
        for r in cands:
            if r.pattern.matches(letter) and (best is None or r.pattern.kind > best.pattern.kind):
                best = r
        self._cache[key] = best if best is not None else _MISS
        return best

    def delta(self, letter: Letter, state: str):
        """(target, direction, output) or None when no rule applies."""
        r = self.rule_for(letter, state)
        if r is None:
            return None
        return r.target, r.direction, r.output

    def annotation_sets(self):
        """All annotation sets over this layer's universe, at most one per layer."""
        layers = sorted(self.ann_universe)
        choices = [[None] + sorted(self.ann_universe[l]) for l in layers]
        for combo in itertools.product(*choices):
            yield frozenset((l, s) for l, s in zip(layers, combo) if s is not None)

    def expanded_letters(self):
        anns = list(self.annotation_sets())
        for b in sorted(self.input_bases):
            for a in anns:
                yield Letter(b, a)

    def domain_letters(self):
        yield BOT
        yield EOT
        yield from self.expanded_letters()

    def call_letters(self):
        return {item for r in self.rules for item in r.output if isinstance(item, CallSym)}


_MISS = object()


class NestedTransducer:
    """Stack of one-pebble transducers; ``layers[0]`` is the innermost layer."""

    def __init__(self, name, layers, base_input, output_alphabet):
        self.name = name
        self.layers = tuple(layers)  # bottom-up: layers[0] has layer index 1
        self.base_input = frozenset(base_input)
        self.output_alphabet = frozenset(output_alphabet)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def top(self) -> OnePebbleTransducer:
        return self.layers[-1]

    def layer(self, index: int) -> OnePebbleTransducer:
        return self.layers[index - 1]

    def substack(self, depth: int, name=None) -> "NestedTransducer":
        return NestedTransducer(name or f"{self.name}[1..{depth}]",
                                self.layers[:depth], self.base_input,
                                self.output_alphabet)


def validate(nt: NestedTransducer) -> list:
    """Check every structural invariant; an empty report means the machine is sound."""
    out = []
    seen_layers = set()
    for t in nt.layers:
        if t.layer in seen_layers:
            out.append(Violation(t.layer, "duplicate layer index"))
        seen_layers.add(t.layer)
    for t in nt.layers:
        out.extend(_validate_layer(nt, t))
    return out


def _validate_layer(nt, t):
    out = []
    if t.initial not in t.states:
        out.append(Violation(t.layer, "initial state not declared", state=t.initial))
    if t.final not in t.states:
        out.append(Violation(t.layer, "final state not declared", state=t.final))
    for r in t.rules:
        if r.state not in t.states or r.target not in t.states:
            out.append(Violation(t.layer, "rule uses undeclared state",
                                 state=r.state, letter=r.pattern.token()))
        for item in r.output:
            if isinstance(item, CallSym):
                if not (1 <= item.target < t.layer):
                    out.append(Violation(t.layer, f"call({item.target}) out of range",
                                         state=r.state, letter=r.pattern.token()))
            elif item not in nt.output_alphabet:
                out.append(Violation(t.layer, f"output symbol {item!r} not declared",
                                     state=r.state, letter=r.pattern.token()))
        if r.pattern.kind == EXACT and r.pattern.arg:
            layers = [l for l, _ in r.pattern.arg]
            if len(layers) != len(set(layers)):
                out.append(Violation(t.layer, "pattern repeats a layer annotation",
                                     state=r.state, letter=r.pattern.token()))
            if any(l <= t.layer for l in layers):
                out.append(Violation(t.layer, "pattern annotated with own or lower layer",
                                     state=r.state, letter=r.pattern.token()))
    # endmarker discipline and totality over the expanded domain
    for q in sorted(t.states):
        for letter in t.domain_letters():
            got = t.delta(letter, q)
            if got is None:
                out.append(Violation(t.layer, "delta not total",
                                     state=q, letter=letter.token()))
                continue
            target, direction, output = got
            if letter.base == LMARK:
                if direction != RIGHT:
                    out.append(Violation(t.layer, "endmarker direction: must move right on "
                                         + LMARK, state=q, letter=letter.token()))
                if output:
                    out.append(Violation(t.layer, "endmarkers must not output",
                                         state=q, letter=letter.token()))
            elif letter.base == RMARK:
                if direction == RIGHT and target != t.final:
                    out.append(Violation(t.layer, "endmarker direction: only the final halt "
                                         "may move right on " + RMARK,
                                         state=q, letter=letter.token()))
                if output:
                    out.append(Violation(t.layer, "endmarkers must not output",
                                         state=q, letter=letter.token()))
    return out


def build_nested(name, layer_specs, base_input, output_alphabet):
    """Assemble a NestedTransducer from per-layer specs, wiring annotation universes.

    ``layer_specs``: list of dicts with keys layer, states, initial, final,
    rules; sorted here by layer index.
    """
    specs = sorted(layer_specs, key=lambda s: s["layer"])
    universe_above = {}
    for s in reversed(specs):
        universe_above[s["layer"]] = {
            t["layer"]: set(t["states"]) for t in specs if t["layer"] > s["layer"]
        }
    layers = []
    for s in specs:
        layers.append(OnePebbleTransducer(
            layer=s["layer"], states=s["states"], initial=s["initial"],
            final=s["final"], rules=s["rules"], input_bases=base_input,
            output_symbols=output_alphabet, ann_universe=universe_above[s["layer"]]))
    return NestedTransducer(name, layers, base_input, output_alphabet)
