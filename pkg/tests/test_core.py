import pytest

from conftest import FIXTURE_NAMES, fixture_path, load_fixture

from pebbletx import ptx
from pebbletx.core import (EXACT, LEFT, RIGHT, Letter, Pattern, Rule,
                           SymbolError, build_nested, check_symbol, validate)
from pebbletx.ptx import ParseError


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_files_are_valid(name):
    nt = load_fixture(name)
    assert validate(nt) == []


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_parse_render_roundtrip(name):
    text = fixture_path(name).read_text(encoding="utf-8")
    nt = ptx.parse(text)
    canon = ptx.render(nt)
    again = ptx.parse(canon)
    assert ptx.render(again) == canon


def test_render_canonicalizes_rule_order():
    base = fixture_path("prefix_unary").read_text(encoding="utf-8")
    lines = base.splitlines()
    head, body = lines[:8], lines[8:-1]
    permuted = "\n".join(head + list(reversed(body)) + ["}"])
    assert ptx.render(ptx.parse(permuted)) == ptx.render(ptx.parse(base))


def test_endmarker_aliases_normalized():
    nt = load_fixture("prefix_unary")
    text = ptx.render(nt)
    assert "'⊢'" in text and "'⊣'" in text
    assert "|-" not in text.replace("'⊢'", "").replace("'⊣'", "")


def test_validate_flags_wrong_endmarker_direction():
    spec = {
        "layer": 1, "states": ["q", "f"], "initial": "q", "final": "f",
        "rules": [
            Rule("q", Pattern("⊢", 0), "q", LEFT, ()),
            Rule("q", Pattern("a", EXACT, frozenset()), "f", RIGHT, ()),
            Rule("q", Pattern("⊣", 0), "f", RIGHT, ()),
            Rule("f", Pattern("⊢", 0), "f", RIGHT, ()),
            Rule("f", Pattern("a", EXACT, frozenset()), "f", RIGHT, ()),
            Rule("f", Pattern("⊣", 0), "f", RIGHT, ()),
        ],
    }
    nt = build_nested("bad", [spec], {"a"}, {"x"})
    messages = [v.message for v in validate(nt)]
    assert any("endmarker direction" in m for m in messages)


def test_validate_flags_missing_annotated_rule():
    # a two-layer machine whose bottom enumerates annotations exactly but
    # misses the combination a@{2:qF}
    text = fixture_path("copy_by_prefix").read_text(encoding="utf-8")
    nt = ptx.parse(text)
    bottom = nt.layers[0]
    rules = [r for r in bottom.rules]
    exacts = []
    for r in rules:
        if r.pattern.base == "a" and r.pattern.kind == 0:  # the a@* rule
            for anns in ([("2", "qI")], [("2", "qF")], []):
                frozen = frozenset((int(l), s) for l, s in anns)
                exacts.append(Rule(r.state, Pattern("a", EXACT, frozen),
                                   r.target, r.direction, r.output))
        else:
            exacts.append(r)
    exacts = [r for r in exacts
              if not (r.pattern.kind == EXACT and r.pattern.base == "a"
                      and r.pattern.arg == frozenset({(2, "qF")}))]
    specs = [
        {"layer": 1, "states": bottom.states, "initial": bottom.initial,
         "final": bottom.final, "rules": exacts},
        {"layer": 2, "states": nt.layers[1].states,
         "initial": nt.layers[1].initial, "final": nt.layers[1].final,
         "rules": nt.layers[1].rules},
    ]
    broken = build_nested("broken", specs, nt.base_input, nt.output_alphabet)
    violations = validate(broken)
    hits = [v for v in violations if v.message == "delta not total"]
    assert hits
    assert any(v.layer == 1 and v.letter == "a@{2:qF}" for v in hits)


def test_pattern_precedence_contains_beats_any():
    text = """
transducer prec
input  { a }
output { x }
layer 2 {
  states { u uf }
  initial u
  final uf
  trans u '|-' -> u R
  trans u a@*  -> u R out call(1)
  trans u '-|' -> uf R
  trans uf '|-' -> uf R
  trans uf a@* -> uf R
  trans uf '-|' -> uf R
}
layer 1 {
  states { p pf }
  initial p
  final pf
  trans p '|-'   -> p R
  trans p a@*    -> p R
  trans p a@+2:u -> p R out x
  trans p '-|'   -> pf R
  trans pf '|-'  -> pf R
  trans pf a@*   -> pf R
  trans pf '-|'  -> pf R
}
"""
    nt = ptx.parse(text)
    bottom = nt.layers[0]
    annotated = Letter("a", {(2, "u")})
    assert bottom.delta(annotated, "p")[2] == ("x",)
    assert bottom.delta(Letter("a"), "p")[2] == ()


def test_same_precedence_overlap_rejected():
    text = """
transducer overlap
input  { a }
output { x }
layer 2 {
  states { u v w uf }
  initial u
  final uf
  trans u '|-' -> u R
  trans u a@*  -> u R
  trans u '-|' -> uf R
  trans v '|-' -> v R
  trans v a@*  -> v R
  trans v '-|' -> uf R
  trans w '|-' -> w R
  trans w a@*  -> w R
  trans w '-|' -> uf R
  trans uf '|-' -> uf R
  trans uf a@* -> uf R
  trans uf '-|' -> uf R
}
layer 1 {
  states { p pf }
  initial p
  final pf
  trans p '|-'   -> p R
  trans p a@+2:u -> p R out x
  trans p a@+2:v -> p R
  trans p a@+v   -> p R
  trans p '-|'   -> pf R
  trans pf '|-'  -> pf R
  trans pf a@*   -> pf R
  trans pf '-|'  -> pf R
}
"""
    with pytest.raises(ParseError, match="overlap"):
        ptx.parse(text)


def test_missing_layer_fields_rejected():
    with pytest.raises(ParseError, match="states/initial/final"):
        ptx.parse("transducer t\ninput { a }\noutput { x }\nlayer 1 { }")


def test_duplicate_state_rejected():
    with pytest.raises(ParseError, match="duplicate state"):
        ptx.parse("transducer t\ninput { a }\noutput { x }\n"
                  "layer 1 { states { q q } initial q final q }")


def test_unknown_output_symbol_rejected():
    with pytest.raises(ParseError, match="unknown symbol"):
        ptx.parse("transducer t\ninput { a }\noutput { x }\n"
                  "layer 1 { states { q } initial q final q\n"
                  "  trans q a -> q R out y }")


def test_reserved_symbol_characters_rejected():
    with pytest.raises(SymbolError):
        check_symbol("a@b")
    with pytest.raises(SymbolError):
        check_symbol("left{")
    check_symbol("a%{1,3}")  # marked letters are the one sanctioned exception


def test_annotation_expansion_size():
    nt = load_fixture("triple_copy")
    bottom = nt.layers[0]
    combos = list(bottom.annotation_sets())
    expected = 1
    for t in nt.layers[1:]:
        expected *= 1 + len(t.states)
    assert len(combos) == expected
    assert len(set(combos)) == len(combos)
    letters = list(bottom.expanded_letters())
    assert len(letters) == len(nt.base_input) * expected


def test_parse_error_reports_position():
    with pytest.raises(ParseError, match="line"):
        ptx.parse("transducer t\ninput { a }\noutput { x }\nlayer 1 {\n  trans ??? }")
