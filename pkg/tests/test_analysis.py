import itertools
import random

import pytest

from conftest import load_fixture, random_machine, words_up_to

from pebbletx import analysis
from pebbletx.analysis import (SATURATED, bounded_in, count_in,
                               find_factorization, is_producing,
                               iter_factorizations, producing_triples,
                               pump_family, ramsey_bound)
from pebbletx.behavior import BehaviorMonoid
from pebbletx.core import BOT, EOT, Letter, parse_word
from pebbletx.semantics import run1

DIAMOND = "◊"


@pytest.fixture(scope="module")
def pu():
    nt = load_fixture("prefix_unary")
    return nt.top, BehaviorMonoid(nt.top, {DIAMOND})


def test_producing_triples_contain_the_single_letter_loop(pu):
    top, monoid = pu
    triples = producing_triples(top, {DIAMOND}, monoid=monoid)
    assert triples
    x = monoid.word((BOT,) + parse_word("aa"))
    e = monoid.word(parse_word("a"))
    y = monoid.word(parse_word("ba") + (EOT,))
    assert any(t.x.element == x and t.e.element == e and t.y.element == y
               for t in triples)


def test_exampled_middle_loop_is_rejected_and_its_family_is_flat(pu):
    # the aba loop flips to the silent state after its first letter: the
    # crossing sequence only ever meets it in qF, so it cannot produce, and
    # measuring the pumped family confirms the count stays flat
    top, monoid = pu
    x = monoid.word((BOT,) + parse_word("aa"))
    e = monoid.word(parse_word("aba"))
    y = monoid.word(parse_word("ba") + (EOT,))
    assert monoid.is_idempotent(e)
    assert is_producing(monoid, x, e, y) is None
    counts = []
    for n in range(1, 7):
        w = parse_word("aa") + parse_word("aba") * n + parse_word("ba")
        counts.append(count_in(run1(top, w).output, {DIAMOND}))
    assert len(set(counts)) == 1


def test_both_final_interior_readings_agree_on_fixtures(fixtures):
    for name, nt in fixtures.items():
        if name == "copy_by_prefix_post":
            continue  # difftest harness fixture, large alphabet
        for t in nt.layers:
            delta = nt.output_alphabet | t.call_letters()
            loose = {(a.x.element, a.e.element, a.y.element)
                     for a in producing_triples(t, delta)}
            strict = {(a.x.element, a.e.element, a.y.element)
                      for a in producing_triples(t, delta,
                                                 forbid_final_interior=True)}
            assert loose == strict, name


def test_silent_machine_has_no_producing_triples():
    nt = load_fixture("const_out")
    assert producing_triples(nt.top, {DIAMOND}) == []


def test_erase_states_is_productive():
    nt = load_fixture("erase_states")
    assert producing_triples(nt.top, {"a", "b"})


def test_bounded_in_family_counts_strictly_increase(pu):
    top, monoid = pu
    verdict = bounded_in(top, {DIAMOND})
    assert not verdict.bounded
    counts = []
    for n in range(1, 9):
        r = run1(top, verdict.pumped(n))
        assert r.accepted
        counts.append(count_in(r.output, {DIAMOND}))
    assert all(b > a for a, b in zip(counts, counts[1:]))


def test_bounded_with_empty_delta(pu):
    top, _ = pu
    assert bounded_in(top, set()).bounded


def test_one_shot_output_is_bounded():
    nt = load_fixture("const_out")
    assert bounded_in(nt.top, {DIAMOND}).bounded
    best = 0
    for w in words_up_to(("a", "b"), 8):
        r = run1(nt.top, w)
        if r.accepted:
            best = max(best, count_in(r.output, {DIAMOND}))
    assert best == 1


def test_find_factorization_on_a4b(pu):
    _, monoid = pu
    f = find_factorization(parse_word("aaaab"), monoid, 1, 3)
    assert f is not None
    w0, x1, w1 = f.parts
    assert "".join(l.base for l in x1) == "aaa"
    assert len(f.blocks[0]) == 3
    assert all("".join(l.base for l in b) == "a" for b in f.blocks[0])
    assert monoid.is_idempotent(f.images[1])


def test_factorization_needs_room(pu):
    _, monoid = pu
    assert find_factorization(parse_word("ab"), monoid, 1, 3) is None
    assert find_factorization((), monoid, 1, 1) is None


def test_factorization_according_to_exampled_triple(pu):
    _, monoid = pu
    x = monoid.word((BOT,) + parse_word("aa"))
    e = monoid.word(parse_word("aba"))
    y = monoid.word(parse_word("ba") + (EOT,))
    w = (BOT,) + parse_word("aa" + "aba" * 3 + "ba") + (EOT,)
    f = find_factorization(w, monoid, 1, 3, according=(x, e, y))
    assert f is not None
    assert f.images == (x, e, y)
    assert all(len(b) == 3 for b in [f.blocks[0]])


def test_find_factorization_agrees_with_brute_force(pu):
    # independent oracle: enumerate every split point and block cut directly
    _, monoid = pu
    rng = random.Random(5)
    for _ in range(60):
        n = rng.randint(0, 8)
        w = tuple(Letter(rng.choice("ab")) for _ in range(n))
        mine = find_factorization(w, monoid, 1, 2) is not None
        exists = False
        for a in range(1, n):
            for b in range(a + 2, n):
                img = monoid.word(w[a:b])
                if monoid.compose(img, img) != img:
                    continue
                for mid in range(a + 1, b):
                    if monoid.word(w[a:mid]) == img and monoid.word(w[mid:b]) == img:
                        exists = True
        assert mine == exists, "".join(l.base for l in w)


def test_ramsey_bounds():
    assert ramsey_bound(1, 7) == 7
    assert ramsey_bound(2, 3) == 6
    assert ramsey_bound(3, 3) == 17
    assert ramsey_bound(2, 2) == 2
    assert ramsey_bound(20, 8, cap=10) is SATURATED


def test_ramsey_two_color_triangle_exhaustive():
    # every 2-coloring of the complete graph on 6 vertices has a single-color
    # triangle, and some coloring of 5 vertices has none
    edges = list(itertools.combinations(range(6), 2))

    def has_mono_triangle(coloring, nodes):
        col = dict(zip(edges, coloring))
        for tri in itertools.combinations(nodes, 3):
            c = {col[e] for e in itertools.combinations(tri, 2) if e in col}
            if len(c) == 1:
                return True
        return False

    for coloring in itertools.product((0, 1), repeat=len(edges)):
        assert has_mono_triangle(coloring, range(6))
    five = list(itertools.combinations(range(5), 2))
    pent = {e: 0 for e in five}
    for i in range(5):
        pent[tuple(sorted((i, (i + 1) % 5)))] = 1
    col = dict(pent)
    found = False
    for tri in itertools.combinations(range(5), 3):
        c = {col[e] for e in itertools.combinations(tri, 2)}
        if len(c) == 1:
            found = True
    assert not found


def test_ramsey_guarantee_on_random_words(pu):
    _, monoid = pu
    interior, _, _ = monoid.reachable_sets()
    size = len(interior) + 1
    bound = ramsey_bound(size, 3)
    rng = random.Random(23)
    for _ in range(25):
        w = tuple(Letter(rng.choice("ab")) for _ in range(bound))
        assert analysis.quick_factorization(w, monoid, 1, 2) is not None


def test_pump_family_shapes():
    w0, x1, w1 = parse_word("aa"), parse_word("aba"), parse_word("ba")
    assert pump_family((w0, x1, w1), 0) == w0 + w1
    assert pump_family((w0, x1, w1), 3) == w0 + x1 * 3 + w1


def test_claim_style_idempotent_substitution():
    rng = random.Random(41)
    checked = 0
    while checked < 60:
        nt = random_machine(rng)
        monoid = BehaviorMonoid(nt.top, {DIAMOND})
        interior, _, _ = monoid.reachable_sets()
        idems = [w for w in interior if monoid.is_idempotent(w.element)]
        if not idems:
            continue
        e_w = rng.choice(idems)
        f_w = rng.choice(idems)
        u, v = e_w.witness, f_w.witness
        e, f = e_w.element, f_w.element
        rand = lambda: tuple(Letter(rng.choice("ab"))
                             for _ in range(rng.randint(0, 3)))
        w1 = rand() + v
        w2 = v + rand() + u
        w3 = u + rand()
        assert monoid.compose(monoid.word(w1 + w2), e) == monoid.word(w1 + w2)
        assert monoid.compose(monoid.word(w1), f) == monoid.word(w1)
        # substituting any idempotent-image word preserves the flank images
        assert monoid.word(w1 + v + w2) == monoid.word(w1 + w2)
        assert monoid.word(w2 + u + w3) == monoid.word(w2 + w3)
        checked += 1


def test_producing_triples_are_sound_on_fixtures(fixtures):
    for name, nt in fixtures.items():
        if name == "copy_by_prefix_post":
            continue
        for t in nt.layers:
            delta = nt.output_alphabet | t.call_letters()
            for triple in producing_triples(t, delta):
                parts = triple.family_parts()
                counts = []
                for n in range(1, 9):
                    r = run1(t, pump_family(parts, n))
                    assert r.accepted, (name, t.layer)
                    counts.append(count_in(r.output, delta))
                assert all(b > a for a, b in zip(counts, counts[1:])), name


def test_bounded_verdicts_saturate_early_on_corpus(fixtures):
    # completeness at desk scale: when the analysis says bounded, the best
    # count over words up to length 10 is already attained by length 6
    for name, nt in fixtures.items():
        if name == "copy_by_prefix_post":
            continue
        for t in nt.layers:
            delta = nt.output_alphabet | t.call_letters()
            if not bounded_in(t, delta).bounded:
                continue
            best = {}
            for n in range(0, 11):
                for combo in itertools.product("ab", repeat=n):
                    r = run1(t, parse_word("".join(combo)))
                    if r.accepted:
                        c = count_in(r.output, delta)
                        best[n] = max(best.get(n, 0), c)
            overall = max(best.values(), default=0)
            by_six = max((v for n, v in best.items() if n <= 6), default=0)
            assert overall == by_six, (name, t.layer, best)
