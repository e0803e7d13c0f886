"""Small NFA/DFA toolkit used by the factorization recognizers and bimachines."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .core import PebbleError


class StateCapExceeded(PebbleError):
    def __init__(self, cap, context=""):
        super().__init__(f"determinization exceeded the state cap {cap}"
                         + (f" while {context}" if context else ""))
        self.cap = cap


@dataclass
class NFA:
    """Nondeterministic automaton with epsilon moves; letters are hashable."""

    inits: set = field(default_factory=set)
    finals: set = field(default_factory=set)
    trans: dict = field(default_factory=dict)   # (state, letter) -> set(states)
    eps: dict = field(default_factory=dict)     # state -> set(states)

    def add(self, src, letter, dst):
        self.trans.setdefault((src, letter), set()).add(dst)

    def add_eps(self, src, dst):
        self.eps.setdefault(src, set()).add(dst)

    def closure(self, states):
        out = set(states)
        stack = list(states)
        while stack:
            s = stack.pop()
            for t in self.eps.get(s, ()):
                if t not in out:
                    out.add(t)
                    stack.append(t)
        return frozenset(out)

    def step(self, states, letter):
        nxt = set()
        for s in states:
            nxt |= self.trans.get((s, letter), set())
        return self.closure(nxt)

    def accepts(self, word) -> bool:
        cur = self.closure(self.inits)
        for letter in word:
            cur = self.step(cur, letter)
            if not cur:
                return False
        return bool(cur & self.finals)

    def reversed(self) -> "NFA":
        rev = NFA(inits=set(self.finals), finals=set(self.inits))
        for (s, letter), dsts in self.trans.items():
            for d in dsts:
                rev.add(d, letter, s)
        for s, dsts in self.eps.items():
            for d in dsts:
                rev.add_eps(d, s)
        return rev

    def letters(self):
        return {letter for (_, letter) in self.trans}


@dataclass
class DFA:
    """Deterministic automaton, total over its alphabet (missing = dead)."""

    init: object
    finals: set
    trans: dict            # (state, letter) -> state
    states: set
    alphabet: tuple

    def step(self, state, letter):
        return self.trans.get((state, letter))

    def run(self, word):
        cur = self.init
        for letter in word:
            if cur is None:
                return None
            cur = self.step(cur, letter)
        return cur

    def accepts(self, word) -> bool:
        return self.run(word) in self.finals

    def is_empty(self) -> bool:
        seen = {self.init}
        queue = deque(seen)
        while queue:
            s = queue.popleft()
            if s in self.finals:
                return False
            for letter in self.alphabet:
                t = self.step(s, letter)
                if t is not None and t not in seen:
                    seen.add(t)
                    queue.append(t)
        return True


def determinize(nfa: NFA, alphabet, cap: int = 10 ** 6, context="") -> DFA:
    """Subset construction over an explicit alphabet, reachable states only."""
    init = nfa.closure(nfa.inits)
    trans = {}
    states = {init}
    queue = deque([init])
    alphabet = tuple(alphabet)
    while queue:
        cur = queue.popleft()
        for letter in alphabet:
            nxt = nfa.step(cur, letter)
            trans[(cur, letter)] = nxt
            if nxt not in states:
                states.add(nxt)
                if len(states) > cap:
                    raise StateCapExceeded(cap, context)
                queue.append(nxt)
    finals = {s for s in states if s & nfa.finals}
    return DFA(init, finals, trans, states, alphabet)


def complement(dfa: DFA) -> DFA:
    finals = {s for s in dfa.states if s not in dfa.finals}
    return DFA(dfa.init, finals, dfa.trans, dfa.states, dfa.alphabet)
