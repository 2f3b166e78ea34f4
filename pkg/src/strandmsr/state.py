"""Multiset rewriting over ground facts: states, labeled rules, transitions
and computations."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .terms import (IDENTITY, Atom, Substitution, Term, atoms, indets, is_ground, match,
                    render, substitute, term_key)


class NotEnabled(Exception):
    def __init__(self, msg: str = "rule not enabled", index: Optional[int] = None):
        super().__init__(msg if index is None else f"step {index}: {msg}")
        self.index = index


class NonGround(ValueError):
    pass


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class Fact:
    predicate: str
    args: tuple
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "_hash", hash((self.predicate, self.args)))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Fact):
            return NotImplemented
        return (self._hash == other._hash and self.predicate == other.predicate
                and self.args == other.args)

    @property
    def principal(self) -> Term:
        return self.args[0]

    def is_ground(self) -> bool:
        return all(is_ground(a) for a in self.args)

    def indets(self) -> set:
        out = set()
        for a in self.args:
            out |= indets(a)
        return out

    def subst(self, s: Substitution) -> "Fact":
        return Fact(self.predicate, tuple(substitute(a, s) for a in self.args))

    def __str__(self):
        return f"{self.predicate}({', '.join(render(a) for a in self.args)})"


def fact(pred: str, *args: Term) -> Fact:
    return Fact(pred, args)


def fact_key(f: Fact) -> tuple:
    return (f.predicate, tuple(term_key(a) for a in f.args))


def match_fact(pattern: Fact, f: Fact, params=frozenset(), binding: Substitution = IDENTITY
               ) -> Optional[Substitution]:
    if pattern.predicate != f.predicate or len(pattern.args) != len(f.args):
        return None
    b = binding
    for p, t in zip(pattern.args, f.args):
        b = match(p, t, params, b)
        if b is None:
            return None
    return b


class MState:
    """Immutable multiset of ground facts."""

    __slots__ = ("_c", "_hash")

    def __init__(self, facts: Iterable = ()):
        if isinstance(facts, dict):
            c = Counter({f: n for f, n in facts.items() if n > 0})
        else:
            c = Counter(facts)
        for f in c:
            if not f.is_ground():
                raise NonGround(f"state fact {f} is not ground")
        self._c = c
        self._hash = None

    def multiplicity(self, f: Fact) -> int:
        return self._c.get(f, 0)

    def items(self):
        return sorted(self._c.items(), key=lambda kv: fact_key(kv[0]))

    def facts(self) -> Iterator[Fact]:
        return iter(self._c)

    def contains(self, facts: Sequence[Fact]) -> bool:
        need = Counter(facts)
        return all(self._c.get(f, 0) >= n for f, n in need.items())

    def minus(self, facts: Sequence[Fact]) -> "MState":
        need = Counter(facts)
        if not all(self._c.get(f, 0) >= n for f, n in need.items()):
            raise NotEnabled("left-hand side not contained in state")
        c = self._c.copy()
        c.subtract(need)
        return MState({f: n for f, n in c.items() if n > 0})

    def plus(self, facts: Sequence[Fact]) -> "MState":
        c = self._c.copy()
        c.update(facts)
        return MState(dict(c))

    def __len__(self):
        return sum(self._c.values())

    def __eq__(self, other):
        if self is other:
            return True
        return isinstance(other, MState) and hash(self) == hash(other) and self._c == other._c

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._c.items()))
        return self._hash

    def __repr__(self):
        return "MState{" + ", ".join(f"{f}:{n}" for f, n in self.items()) + "}"

    def dump(self) -> str:
        """One fact per line, ``pred(args) x n``, canonical order."""
        return "".join(f"{f} x {n}\n" for f, n in self.items())


def multiplicity(state: MState, f: Fact) -> int:
    return state.multiplicity(f)


@dataclass(frozen=True)
class Rule:
    name: str
    lhs: tuple
    label: Fact
    rhs: tuple

    def __post_init__(self):
        object.__setattr__(self, "lhs", tuple(self.lhs))
        object.__setattr__(self, "rhs", tuple(self.rhs))
        lv = self.label.indets()
        for f in self.lhs + self.rhs:
            extra = f.indets() - lv
            if extra:
                names = ", ".join(sorted(render(x) for x in extra))
                raise RuleError(f"rule {self.name}: {names} not free in label")

    def instance(self, sigma: Substitution) -> tuple:
        lv = self.label.indets()
        extra = set(sigma.indet_map) - lv
        if extra or sigma.atom_map:
            raise RuleError(f"rule {self.name}: substitution binds more than the label's variables")
        lab = self.label.subst(sigma)
        if not lab.is_ground():
            raise NonGround(f"rule {self.name}: label {lab} is not ground")
        return (tuple(f.subst(sigma) for f in self.lhs), lab,
                tuple(f.subst(sigma) for f in self.rhs))

    def sigma_for(self, label: Fact) -> Optional[Substitution]:
        """The unique substitution carrying this rule's label to ``label``."""
        return match_fact(self.label, label)

    def __str__(self):
        l = ", ".join(map(str, self.lhs)) or "·"
        r = ", ".join(map(str, self.rhs)) or "·"
        return f"{self.name}: {l} --[{self.label}]--> {r}"


def apply_rule(state: MState, rule: Rule, sigma: Substitution) -> MState:
    lhs, _, rhs = rule.instance(sigma)
    return state.minus(lhs).plus(rhs)


def enabled(state: MState, rule: Rule, sigma: Substitution) -> bool:
    lhs, _, _ = rule.instance(sigma)
    return state.contains(lhs)


def principal_of(rule: Rule, sigma: Substitution) -> Term:
    return substitute(rule.label.args[0], sigma)


def check_commute(state: MState, first: tuple, second: tuple) -> bool:
    """Does running ``second`` then ``first`` reach the same state as the
    given order?  Raises NotEnabled if the given order cannot run."""
    (r1, s1), (r2, s2) = first, second
    target = apply_rule(apply_rule(state, r1, s1), r2, s2)
    try:
        other = apply_rule(apply_rule(state, r2, s2), r1, s1)
    except NotEnabled:
        return False
    return other == target


@dataclass(frozen=True)
class Computation:
    states: tuple
    steps: tuple = ()

    @property
    def first(self) -> MState:
        return self.states[0]

    @property
    def last(self) -> MState:
        return self.states[-1]

    @property
    def labels(self) -> tuple:
        return tuple(r.instance(s)[1] for r, s in self.steps)

    def __len__(self):
        return len(self.steps)

    def extend(self, rule: Rule, sigma: Substitution) -> "Computation":
        nxt = apply_rule(self.last, rule, sigma)
        return Computation(self.states + (nxt,), self.steps + ((rule, sigma),))


def run_computation(initial: MState, steps: Sequence[tuple]) -> Computation:
    states = [initial]
    for i, (rule, sigma) in enumerate(steps):
        try:
            states.append(apply_rule(states[-1], rule, sigma))
        except NotEnabled as exc:
            raise NotEnabled(str(exc), index=i) from None
    return Computation(tuple(states), tuple(steps))


def is_valid_computation(c: Computation) -> bool:
    if len(c.states) != len(c.steps) + 1:
        return False
    for i, (rule, sigma) in enumerate(c.steps):
        try:
            if apply_rule(c.states[i], rule, sigma) != c.states[i + 1]:
                return False
        except (NotEnabled, NonGround, RuleError):
            return False
    return True


def firings(state: MState, rule: Rule, label: Fact, params=frozenset(),
            binding: Substitution = IDENTITY) -> Iterator[tuple]:
    """Ground ways to fire ``rule`` from ``state`` whose label matches the
    (possibly open) pattern ``label`` under ``binding``.

    Yields ``(sigma, ground_label, new_binding)``.  Open label variables must
    be determined by the left-hand side facts found in ``state``."""
    if rule.label.predicate != label.predicate or len(rule.label.args) != len(label.args):
        return
    pat = label.subst(binding)
    if pat.is_ground() and not _open_params(label, params, binding):
        sigma = rule.sigma_for(pat)
        if sigma is not None and enabled(state, rule, sigma):
            yield sigma, pat, binding
        return
    seen = set()
    for sigma in _lhs_matches(state, rule.lhs, 0, IDENTITY):
        lab = rule.label.subst(sigma)
        if not lab.is_ground():
            continue
        nb = match_fact(label, lab, params, binding)
        if nb is None or lab in seen:
            continue
        seen.add(lab)
        sigma = rule.sigma_for(lab)
        if enabled(state, rule, sigma):
            yield sigma, lab, nb


def _open_params(label: Fact, params, binding: Substitution) -> bool:
    bound = binding.atom_map
    for a in label.args:
        for at in atoms(a):
            base = Atom(at.sort, at.id)
            owner = Atom("name", at.id)
            if base in params and base not in bound:
                return True
            if at.sort in ("sig_key", "asym_key") and owner in params and owner not in bound:
                return True
    return False


def _lhs_matches(state: MState, lhs: tuple, i: int, sigma: Substitution):
    if i == len(lhs):
        yield sigma
        return
    for f in state.facts():
        s = match_fact(lhs[i], f, frozenset(), sigma)
        if s is not None:
            yield from _lhs_matches(state, lhs, i + 1, s)
