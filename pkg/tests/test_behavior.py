import itertools
import random

import pytest

from conftest import load_fixture, random_machine

from pebbletx.behavior import DIVERGENT, BehaviorMonoid
from pebbletx.core import BOT, EOT, LEFT, RIGHT, Letter, parse_word
from pebbletx.semantics import direct_pass

DIAMOND = "◊"


@pytest.fixture(scope="module")
def pu_monoid():
    nt = load_fixture("prefix_unary")
    return BehaviorMonoid(nt.top, {DIAMOND})


def test_letter_behavior_on_a(pu_monoid):
    elt = pu_monoid.letter(Letter("a"))
    assert elt.entry("qI", RIGHT) == ("qI", RIGHT, 1)
    assert elt.entry("qI", LEFT) == ("qI", RIGHT, 1)  # direction independent
    assert elt.entry("qF", RIGHT) == ("qF", RIGHT, 0)


def test_letter_behavior_on_left_marker(pu_monoid):
    elt = pu_monoid.letter(BOT)
    assert elt.entry("qI", RIGHT) == ("qI", RIGHT, 0)


def test_empty_delta_clears_all_flags():
    nt = load_fixture("prefix_unary")
    monoid = BehaviorMonoid(nt.top, set())
    for letter in (Letter("a"), Letter("b"), BOT, EOT):
        for (_, _), row in monoid.letter(letter).table:
            assert row[2] == 0


def test_word_behavior_accepting_entry(pu_monoid):
    short = pu_monoid.word(parse_word("ab"))
    long = pu_monoid.word(parse_word("aaababa"))
    assert short.entry("qI", RIGHT) == ("qF", RIGHT, 1)
    assert long.entry("qI", RIGHT) == ("qF", RIGHT, 1)
    # entered from the right the two words expose their differing last letters
    assert short.entry("qI", LEFT) == ("qF", RIGHT, 0)
    assert long.entry("qI", LEFT) == ("qI", RIGHT, 1)


def test_empty_word_is_identity(pu_monoid):
    assert pu_monoid.word(()) == pu_monoid.identity


def test_compose_with_identity(pu_monoid):
    for w in ("a", "ab", "ba", "aaababa"):
        e = pu_monoid.word(parse_word(w))
        assert pu_monoid.compose(e, pu_monoid.identity) == e
        assert pu_monoid.compose(pu_monoid.identity, e) == e


def test_word_behavior_of_aba_is_idempotent(pu_monoid):
    e = pu_monoid.word(parse_word("aba"))
    assert pu_monoid.compose(e, e) == e


def test_two_cycle_across_seam_diverges():
    from pebbletx.core import ANY, Pattern, Rule, build_nested
    rules = [
        Rule("u", Pattern("⊢", ANY), "u", RIGHT, ()),
        Rule("u", Pattern("⊣", ANY), "u", LEFT, ()),
        Rule("u", Pattern("c", ANY), "v", RIGHT, ()),
        Rule("v", Pattern("⊢", ANY), "v", RIGHT, ()),
        Rule("v", Pattern("⊣", ANY), "v", LEFT, ()),
        Rule("v", Pattern("c", ANY), "u", LEFT, ()),
    ]
    spec = {"layer": 1, "states": ["u", "v"], "initial": "u", "final": "v",
            "rules": rules}
    nt = build_nested("cyc", [spec], {"c"}, {"x"})
    monoid = BehaviorMonoid(nt.top, {"x"})
    c = monoid.letter(Letter("c"))
    cc = monoid.compose(c, c)
    assert cc.entry("u", RIGHT) == DIVERGENT


def test_morphism_property_random_words(pu_monoid):
    rng = random.Random(3)
    for _ in range(120):
        u = "".join(rng.choice("ab") for _ in range(rng.randint(0, 5)))
        v = "".join(rng.choice("ab") for _ in range(rng.randint(0, 5)))
        left = pu_monoid.word(parse_word(u))
        right = pu_monoid.word(parse_word(v))
        assert pu_monoid.compose(left, right) == pu_monoid.word(parse_word(u + v))


def test_associativity_on_fixture_monoid(pu_monoid):
    interior, left, right = pu_monoid.reachable_sets()
    elems = [w.element for w in interior][:6]
    for x, y, z in itertools.product(elems, repeat=3):
        a = pu_monoid.compose(pu_monoid.compose(x, y), z)
        b = pu_monoid.compose(x, pu_monoid.compose(y, z))
        assert a == b


def test_simulation_agreement_random():
    rng = random.Random(17)
    for _ in range(60):
        nt = random_machine(rng)
        monoid = BehaviorMonoid(nt.top, {DIAMOND})
        for _ in range(6):
            n = rng.randint(1, 6)
            w = tuple(Letter(rng.choice("ab")) for _ in range(n))
            elt = monoid.word(w)
            q = rng.choice(sorted(nt.top.states))
            d = rng.choice([RIGHT, LEFT])
            oracle = direct_pass(nt.top, w, q, d, {DIAMOND})
            row = elt.entry(q, d)
            if oracle is None:
                assert row == DIVERGENT
            else:
                assert row == (oracle[0], oracle[1], int(oracle[2]))


def test_idempotent_power_by_squaring(pu_monoid):
    interior, _, _ = pu_monoid.reachable_sets()
    for w in interior:
        e = pu_monoid.power_idempotent(w.element)
        assert pu_monoid.compose(e, e) == e


def test_reachable_sets_examples(pu_monoid):
    interior, left, right = pu_monoid.reachable_sets()
    aba = pu_monoid.word(parse_word("aba"))
    hits = [w for w in interior if w.element == aba]
    assert hits and len(hits[0].witness) <= 3
    left_target = pu_monoid.word((BOT,) + parse_word("aa"))
    assert any(w.element == left_target for w in left)


def test_single_state_machine_has_one_interior_element():
    from pebbletx.core import ANY, Pattern, Rule, build_nested
    rules = [
        Rule("q", Pattern("⊢", ANY), "q", RIGHT, ()),
        Rule("q", Pattern("⊣", ANY), "q", RIGHT, ()),
        Rule("q", Pattern("a", ANY), "q", RIGHT, ()),
    ]
    spec = {"layer": 1, "states": ["q"], "initial": "q", "final": "q",
            "rules": rules}
    nt = build_nested("one", [spec], {"a"}, {"x"})
    monoid = BehaviorMonoid(nt.top, {"x"})
    interior, _, _ = monoid.reachable_sets()
    assert len(interior) == 1
    assert all(row[2] == 0 for _, row in interior[0].element.table)


try:
    from hypothesis import given, settings
    from hypothesis import strategies as st

    @given(st.text(alphabet="ab", max_size=6), st.text(alphabet="ab", max_size=6))
    @settings(max_examples=60, deadline=None)
    def test_morphism_property_hypothesis(u, v):
        nt = load_fixture("prefix_unary")
        monoid = BehaviorMonoid(nt.top, {DIAMOND})
        lhs = monoid.compose(monoid.word(parse_word(u)),
                             monoid.word(parse_word(v)))
        assert lhs == monoid.word(parse_word(u + v))
except ImportError:  # pragma: no cover
    pass
