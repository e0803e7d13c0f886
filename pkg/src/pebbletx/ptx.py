"""Line-oriented text format for transducers, labellings and pipelines.

The grammar is token based: identifiers, quoted symbols, braces, ``->``,
``call(i)`` and the keywords seen in :func:`render`.  ``|-`` and ``-|`` are
accepted as ASCII aliases of the endmarkers and normalized on output.
Comments run from an unquoted ``#`` to end of line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import (ANY, CONTAINS, EXACT, LEFT, LMARK, RIGHT, RMARK, CallSym,
                   Letter, NestedTransducer, Pattern, PebbleError, Rule,
                   build_nested, check_symbol)


class ParseError(PebbleError):
    def __init__(self, message, line=None, column=None):
        where = "" if line is None else f" at line {line}" + (
            "" if column is None else f", column {column}")
        super().__init__(message + where)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str  # ident, quoted, punct
    text: str
    line: int
    column: int


_PUNCT = ("->", "{", "}", "(", ")", ",", "*", "@", "+", ":")


def _tokenize(text):
    toks = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        i = 0
        while i < len(raw):
            ch = raw[i]
            if ch.isspace():
                i += 1
                continue
            if ch == "#":
                break
            if ch == "'":
                j = raw.find("'", i + 1)
                if j < 0:
                    raise ParseError("unterminated quoted symbol", ln, i + 1)
                toks.append(Token("quoted", raw[i + 1:j], ln, i + 1))
                i = j + 1
                continue
            for p in _PUNCT:
                if raw.startswith(p, i):
                    toks.append(Token("punct", p, ln, i + 1))
                    i += len(p)
                    break
            else:
                m = re.match(r"[^\s#'(){},:@*+]+", raw[i:])
                if not m:
                    raise ParseError(f"unexpected character {ch!r}", ln, i + 1)
                toks.append(Token("ident", m.group(0), ln, i + 1))
                i += m.end()
    return toks


_ALIASES = {"|-": LMARK, "-|": RMARK}


class _Reader:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self, expect=None):
        tok = self.peek()
        if tok is None:
            raise ParseError(f"unexpected end of document (expected {expect})")
        self.pos += 1
        if expect is not None and tok.text != expect:
            raise ParseError(f"expected {expect!r}, found {tok.text!r}",
                             tok.line, tok.column)
        return tok

    def at(self, text):
        tok = self.peek()
        return tok is not None and tok.text == text

    def symbol(self):
        tok = self.next()
        if tok.kind == "punct":
            raise ParseError(f"expected a symbol, found {tok.text!r}", tok.line, tok.column)
        name = _ALIASES.get(tok.text, tok.text)
        if tok.kind == "ident" and name not in (LMARK, RMARK):
            try:
                check_symbol(name)
            except PebbleError as exc:
                raise ParseError(str(exc), tok.line, tok.column)
        return name

    def ident(self, what="identifier"):
        tok = self.next()
        if tok.kind != "ident":
            raise ParseError(f"expected {what}, found {tok.text!r}", tok.line, tok.column)
        return tok.text


def _parse_symbol_set(r):
    r.next("{")
    out = []
    while not r.at("}"):
        out.append(r.symbol())
    r.next("}")
    return out


def _parse_annotation(r):
    first = r.ident("annotation")
    if r.at(":"):
        r.next(":")
        state = r.ident("state name")
        try:
            layer = int(first)
        except ValueError:
            raise ParseError(f"layer index expected before ':', found {first!r}")
        return layer, state
    return None, first


def _parse_pattern(r, tok_line):
    base = r.symbol()
    if not r.at("@"):
        kind = ANY if base in (LMARK, RMARK) else EXACT
        return Pattern(base, kind, frozenset() if kind == EXACT else None)
    r.next("@")
    if base in (LMARK, RMARK):
        raise ParseError("endmarkers cannot carry annotations", tok_line)
    if r.at("*"):
        r.next("*")
        return Pattern(base, ANY)
    if r.at("+"):
        r.next("+")
        return Pattern(base, CONTAINS, _parse_annotation(r))
    r.next("{")
    anns = set()
    while not r.at("}"):
        layer, state = _parse_annotation(r)
        if layer is None:
            raise ParseError("exact annotation needs layer:state form")
        anns.add((layer, state))
        if r.at(","):
            r.next(",")
    r.next("}")
    return Pattern(base, EXACT, frozenset(anns))


def _parse_out_items(r):
    items = []
    while True:
        tok = r.peek()
        if tok is None or tok.text in ("trans", "}"):
            return tuple(items)
        if tok.text == "call":
            r.next()
            r.next("(")
            n = r.ident("layer index")
            r.next(")")
            try:
                items.append(CallSym(int(n)))
            except ValueError:
                raise ParseError(f"call target must be an integer, found {n!r}",
                                 tok.line, tok.column)
        else:
            items.append(r.symbol())


def _parse_layer(r, input_bases, output_alphabet):
    tok = r.next("layer")
    idx_tok = r.ident("layer index")
    try:
        layer = int(idx_tok)
    except ValueError:
        raise ParseError(f"layer index must be an integer, found {idx_tok!r}",
                         tok.line, tok.column)
    r.next("{")
    states, initial, final, rules = None, None, None, []
    while not r.at("}"):
        head = r.peek()
        kw = r.ident("layer item")
        if kw == "states":
            names = _parse_symbol_set(r)
            if len(names) != len(set(names)):
                dup = next(n for n in names if names.count(n) > 1)
                raise ParseError(f"duplicate state {dup!r}", head.line, head.column)
            states = names
        elif kw == "initial":
            initial = r.ident("state name")
        elif kw == "final":
            final = r.ident("state name")
        elif kw == "trans":
            state = r.ident("state name")
            pattern = _parse_pattern(r, head.line)
            r.next("->")
            target = r.ident("state name")
            d = r.ident("direction")
            if d not in (RIGHT, LEFT):
                raise ParseError(f"direction must be R or L, found {d!r}", head.line)
            output = ()
            if r.at("out"):
                r.next("out")
                output = _parse_out_items(r)
            for item in output:
                if not isinstance(item, CallSym) and item not in output_alphabet:
                    raise ParseError(f"unknown symbol {item!r} in output", head.line)
            rules.append(Rule(state, pattern, target, d, output))
        else:
            raise ParseError(f"unknown layer item {kw!r}", head.line, head.column)
    r.next("}")
    if not states or initial is None or final is None:
        raise ParseError(f"layer {layer} needs states/initial/final", tok.line)
    _check_overlaps(layer, states, rules)
    return {"layer": layer, "states": states, "initial": initial,
            "final": final, "rules": rules}


def _check_overlaps(layer, states, rules):
    """Reject two rules of equal precedence that can match the same letter."""
    by_key = {}
    for r_ in rules:
        by_key.setdefault((r_.state, r_.pattern.base, r_.pattern.kind), []).append(r_)
    for (state, base, kind), group in by_key.items():
        if len(group) < 2:
            continue
        if kind == ANY:
            raise ParseError(f"layer {layer}: duplicate any-pattern for "
                             f"({state}, {base})")
        if kind == EXACT:
            seen = set()
            for r_ in group:
                if r_.pattern.arg in seen:
                    raise ParseError(f"layer {layer}: duplicate rule for "
                                     f"({state}, {r_.pattern.token()})")
                seen.add(r_.pattern.arg)
        else:
            for a, b in ((x, y) for i, x in enumerate(group) for y in group[i + 1:]):
                (la, sa), (lb, sb) = a.pattern.arg, b.pattern.arg
                same_slot = (la is not None and lb is not None and la == lb)
                if not same_slot or (sa == sb):
                    if (la, sa) == (lb, sb):
                        raise ParseError(f"layer {layer}: duplicate rule for "
                                         f"({state}, {a.pattern.token()})")
                    if not same_slot:
                        raise ParseError(
                            f"layer {layer}: ambiguous pattern overlap between "
                            f"{a.pattern.token()} and {b.pattern.token()} for state {state}")


def parse(text: str):
    """Parse a document; returns a NestedTransducer or a labelling Pipeline."""
    doc, _ = _parse_document(_Reader(_tokenize(text)))
    return doc


def _parse_transducer(r):
    r.next("transducer")
    name = r.ident("transducer name")
    r.next("input")
    input_bases = _parse_symbol_set(r)
    r.next("output")
    output_alphabet = _parse_symbol_set(r)
    specs = []
    while r.at("layer"):
        specs.append(_parse_layer(r, input_bases, output_alphabet))
    if not specs:
        raise ParseError("transducer needs at least one layer block")
    layer_ids = [s["layer"] for s in specs]
    if sorted(layer_ids) != list(range(1, len(specs) + 1)):
        raise ParseError(f"layer indices must be 1..k, found {sorted(layer_ids)}")
    return build_nested(name, specs, input_bases, output_alphabet)


def _parse_document(r):
    tok = r.peek()
    if tok is None:
        raise ParseError("empty document")
    if tok.text == "pipeline":
        from . import labelling as lab
        doc = lab.parse_pipeline(r)
    elif tok.text == "transducer":
        doc = _parse_transducer(r)
    else:
        raise ParseError("document must start with 'transducer' or 'pipeline'",
                         tok.line, tok.column)
    extra = r.peek()
    if extra is not None:
        raise ParseError(f"trailing content {extra.text!r}", extra.line, extra.column)
    return doc, r


def _sym(name: str) -> str:
    """Quote a symbol unless it is a plain identifier."""
    if name == LMARK:
        return f"'{LMARK}'"
    if name == RMARK:
        return f"'{RMARK}'"
    if re.fullmatch(r"[A-Za-z0-9_.\-/~%|]+", name) and name not in ("|-", "-|"):
        return name
    return f"'{name}'"


def _pattern_text(p: Pattern) -> str:
    if p.base in (LMARK, RMARK):
        return _sym(p.base)
    if p.kind == ANY:
        return f"{_sym(p.base)}@*"
    if p.kind == CONTAINS:
        layer, state = p.arg
        tail = state if layer is None else f"{layer}:{state}"
        return f"{_sym(p.base)}@+{tail}"
    if not p.arg:
        return _sym(p.base)
    inner = ",".join(f"{l}:{s}" for l, s in sorted(p.arg))
    return f"{_sym(p.base)}@{{{inner}}}"


def _rule_sort_key(r_: Rule):
    return (r_.state, r_.pattern.base, -r_.pattern.kind, _pattern_text(r_.pattern))


def render(nt: NestedTransducer) -> str:
    """Canonical document: layers descending, states and letters sorted."""
    lines = [f"transducer {nt.name}"]
    lines.append("input  { " + " ".join(_sym(s) for s in sorted(nt.base_input)) + " }")
    lines.append("output { " + " ".join(_sym(s) for s in sorted(nt.output_alphabet)) + " }")
    for t in reversed(nt.layers):
        lines.append(f"layer {t.layer} {{")
        lines.append("  states { " + " ".join(sorted(t.states)) + " }")
        lines.append(f"  initial {t.initial}")
        lines.append(f"  final {t.final}")
        for r_ in sorted(t.rules, key=_rule_sort_key):
            out = ""
            if r_.output:
                items = " ".join(i.token() if isinstance(i, CallSym) else _sym(i)
                                 for i in r_.output)
                out = f" out {items}"
            lines.append(f"  trans {r_.state} {_pattern_text(r_.pattern)} -> "
                         f"{r_.target} {r_.direction}{out}")
        lines.append("}")
    return "\n".join(lines) + "\n"


def load(path):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def load_machine(path) -> NestedTransducer:
    doc = load(path)
    if not isinstance(doc, NestedTransducer):
        raise ParseError(f"{path}: expected a transducer document")
    return doc
