"""Dolev-Yao derivability.

The depth bound limits how many constructor layers the adversary may add on
top of terms it already holds; analysis (projection, signature-body
extraction, decryption) is unbounded.

Two independent routes decide derivability: ``can_derive`` works top-down
from the decomposition closure, and ``derive_closure`` saturates bottom-up
over a finite universe of subterms.  The executor uses the former; tests
compare the two.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable

from .terms import TAGS, Atom, Cat, Enc, Hash, Sig, Term, inv, subterms

DEFAULT_DEPTH = 8


@dataclass(frozen=True)
class Knowledge:
    known: frozenset
    compromised_keys: frozenset = frozenset()
    depth_bound: int = DEFAULT_DEPTH
    tags: tuple = field(default=TAGS, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "known", frozenset(self.known))
        object.__setattr__(self, "compromised_keys", frozenset(self.compromised_keys))
        if self.depth_bound < 0:
            raise ValueError("depth_bound must be non-negative")

    @property
    def base(self) -> frozenset:
        return self.known | self.compromised_keys

    @cached_property
    def analyzed(self) -> frozenset:
        return _analyze_cached(self.base, self.depth_bound)

    def with_terms(self, terms: Iterable[Term]) -> "Knowledge":
        new = frozenset(terms) - self.known
        if not new:
            return self
        return Knowledge(self.known | new, self.compromised_keys, self.depth_bound, self.tags)

    def can_derive(self, target: Term) -> bool:
        return synth(target, self.analyzed, self.depth_bound)


def decryption_key(k: Term) -> Term:
    """Asymmetric keys pair with their inverse; anything else is symmetric."""
    return inv(k) if isinstance(k, Atom) and k.sort in ("asym_key", "sig_key") else k


def _sig_key_ok(k: Term) -> bool:
    return isinstance(k, Atom) and k.sort == "sig_key" and not k.inverse


def synth(t: Term, analyzed: frozenset, bound: int) -> bool:
    """Is ``t`` buildable from ``analyzed`` with at most ``bound`` layers of
    composition?"""
    if t in analyzed:
        return True
    if isinstance(t, Atom) or bound <= 0:
        return False
    b = bound - 1
    if isinstance(t, Sig):
        return _sig_key_ok(t.key) and t.key in analyzed and synth(t.body, analyzed, b)
    return all(synth(c, analyzed, b) for c in children_of(t))


def children_of(t: Term) -> tuple:
    if isinstance(t, Cat):
        return (t.left, t.right)
    if isinstance(t, Enc):
        return (t.plain, t.key) + (() if t.rand is None else (t.rand,))
    if isinstance(t, Sig):
        return (t.body, t.key)
    if isinstance(t, Hash):
        return (t.body,)
    return ()


def analyze(base: Iterable[Term], bound: int = DEFAULT_DEPTH) -> frozenset:
    """Close ``base`` under projection, signature-body extraction and
    decryption (keys may be synthesized)."""
    known = set(base)
    todo = list(known)
    locked = []
    while True:
        while todo:
            t = todo.pop()
            parts = ()
            if isinstance(t, Cat):
                parts = (t.left, t.right)
            elif isinstance(t, Sig):
                parts = (t.body,)
            elif isinstance(t, Enc):
                locked.append(t)
            for p in parts:
                if p not in known:
                    known.add(p)
                    todo.append(p)
        frozen = frozenset(known)
        still = []
        for e in locked:
            if synth(decryption_key(e.key), frozen, bound):
                for p in (e.plain,) if e.rand is None else (e.plain, e.rand):
                    if p not in known:
                        known.add(p)
                        todo.append(p)
            else:
                still.append(e)
        locked = still
        if not todo:
            return frozenset(known)


@lru_cache(maxsize=1 << 14)
def _analyze_cached(base: frozenset, bound: int) -> frozenset:
    return analyze(base, bound)


def can_derive(k: Knowledge, target: Term) -> bool:
    return k.can_derive(target)


def derive_closure(k: Knowledge, targets: Iterable[Term] = ()) -> frozenset:
    """Every term of the universe (subterms of the knowledge and of
    ``targets``, plus decryption keys) that the adversary can derive.

    Bottom-up: saturates the least composition height of each universe term,
    where held and extracted terms have height 0."""
    bound = k.depth_bound
    universe = set()
    for t in list(k.base) + list(targets):
        universe.update(subterms(t))
    for e in [u for u in universe if isinstance(u, Enc)]:
        universe.update(subterms(decryption_key(e.key)))
    h = {u: bound + 1 for u in universe}
    for t in k.base:
        h[t] = 0
    changed = True
    while changed:
        changed = False
        for u in universe:
            new = []
            if h[u] == 0:
                if isinstance(u, Cat):
                    new += [(u.left, 0), (u.right, 0)]
                elif isinstance(u, Sig):
                    new.append((u.body, 0))
                elif isinstance(u, Enc) and h[decryption_key(u.key)] <= bound:
                    new.append((u.plain, 0))
                    if u.rand is not None:
                        new.append((u.rand, 0))
            if not isinstance(u, Atom):
                if isinstance(u, Sig):
                    parts = (u.body,) if _sig_key_ok(u.key) and h[u.key] == 0 else None
                else:
                    parts = children_of(u)
                if parts:
                    top = max(h[x] for x in parts)
                    if top < bound:
                        new.append((u, top + 1))
            for x, v in new:
                if v < h[x]:
                    h[x] = v
                    changed = True
    return frozenset(u for u, v in h.items() if v <= bound)
