import itertools
import random
from pathlib import Path

import pytest

from pebbletx import ptx
from pebbletx.core import (ANY, EXACT, LEFT, RIGHT, Letter, Pattern, Rule,
                           build_nested)

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

FIXTURE_NAMES = [
    "prefix_unary", "erase_states", "copy_by_prefix", "inner_constant",
    "identity", "const_out", "reverse", "triple_copy", "pingpong", "identity3",
    "copy_by_prefix_post",
]


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.ptx"


def load_fixture(name: str):
    return ptx.load(fixture_path(name))


@pytest.fixture(scope="session")
def fixtures():
    return {name: load_fixture(name) for name in FIXTURE_NAMES}


def words_up_to(bases, max_len):
    for n in range(max_len + 1):
        for combo in itertools.product(bases, repeat=n):
            yield tuple(Letter(b) for b in combo)


def random_transducer(rng: random.Random, max_states=3, letters=("a", "b"),
                      out_letters=("◊",), callee=False, layer=1,
                      caller_states=()):
    """A random valid single layer; ``callee`` variants read any annotations
    and may be called from a layer above with the given states."""
    n = rng.randint(1, max_states)
    qs = [f"q{i}" for i in range(n)]
    final = rng.choice(qs)
    rules = []
    for q in qs:
        rules.append(Rule(q, Pattern("⊢", ANY), rng.choice(qs), RIGHT, ()))
        if rng.random() < 0.6:
            rules.append(Rule(q, Pattern("⊣", ANY), final, RIGHT, ()))
        else:
            rules.append(Rule(q, Pattern("⊣", ANY), rng.choice(qs), LEFT, ()))
        for c in letters:
            out = tuple(rng.choice(out_letters)
                        for _ in range(rng.randint(0, 2)))
            kind = ANY if callee else EXACT
            arg = None if callee else frozenset()
            rules.append(Rule(q, Pattern(c, kind, arg), rng.choice(qs),
                              rng.choice([RIGHT, RIGHT, LEFT]), out))
    spec = {"layer": layer, "states": qs, "initial": qs[0], "final": final,
            "rules": rules}
    return spec


def random_machine(rng: random.Random, max_states=3, letters=("a", "b"),
                   out_letters=("◊",)):
    spec = random_transducer(rng, max_states, letters, out_letters)
    return build_nested(f"rand{rng.randint(0, 10**6)}", [spec],
                        letters, out_letters)


def random_nested2(rng: random.Random, letters=("a", "b"),
                   out_letters=("x",)):
    """A random two-layer machine whose top sometimes calls layer 1."""
    from pebbletx.core import CallSym
    bottom = random_transducer(rng, 2, letters, out_letters, callee=True,
                               layer=1)
    n = rng.randint(1, 2)
    qs = [f"t{i}" for i in range(n)]
    final = rng.choice(qs)
    rules = []
    for q in qs:
        rules.append(Rule(q, Pattern("⊢", ANY), rng.choice(qs), RIGHT, ()))
        rules.append(Rule(q, Pattern("⊣", ANY), final, RIGHT, ()))
        for c in letters:
            out = []
            for _ in range(rng.randint(0, 2)):
                out.append(CallSym(1) if rng.random() < 0.5
                           else rng.choice(out_letters))
            rules.append(Rule(q, Pattern(c, ANY), rng.choice(qs),
                              rng.choice([RIGHT, RIGHT, LEFT]), tuple(out)))
    top = {"layer": 2, "states": qs, "initial": qs[0], "final": final,
           "rules": rules}
    return build_nested(f"nest{rng.randint(0, 10**6)}", [bottom, top],
                        letters, out_letters)
