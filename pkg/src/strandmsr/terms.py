"""Free message algebra: atoms, indeterminates, tagged pairing, randomized
encryption, signatures and hashes.

Terms are immutable and hashable.  Paths descend with ``"L"``/``"R"``
steps; the randomizer of an encryption is reachable by no path, and the
body of a hash is treated as lying behind a key edge.
"""

from __future__ import annotations

import re
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence, Union

SORTS = ("name", "nonce", "text", "sym_key", "asym_key", "sig_key")

TAGS = ("nil", "keytag", "eootag", "eortag", "ab_rq", "rc_rq", "cf_rq", "ab_cf")


class SortError(ValueError):
    """An atom was mapped or built across sorts."""


class ParseError(ValueError):
    pass


def _h(obj, *parts):
    return hash((type(obj).__name__,) + parts)


@dataclass(frozen=True)
class Atom:
    sort: str
    id: str
    inverse: bool = False
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.sort not in SORTS:
            raise SortError(f"unknown sort {self.sort!r}")
        if self.inverse and self.sort not in ("asym_key", "sig_key"):
            raise SortError(f"sort {self.sort} has no inverse form")
        object.__setattr__(self, "_hash", _h(self, self.sort, self.id, self.inverse))

    def __hash__(self):
        return self._hash

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Indet:
    name: str
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", _h(self, self.name))

    def __hash__(self):
        return self._hash

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Cat:
    tag: str
    left: "Term"
    right: "Term"
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")
        object.__setattr__(self, "_hash", _h(self, self.tag, self.left, self.right))

    def __hash__(self):
        return self._hash

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Enc:
    plain: "Term"
    key: "Term"
    rand: Optional["Term"] = None
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", _h(self, self.plain, self.key, self.rand))

    def __hash__(self):
        return self._hash

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Sig:
    body: "Term"
    key: "Term"
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", _h(self, self.body, self.key))

    def __hash__(self):
        return self._hash

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Hash:
    body: "Term"
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", _h(self, self.body))

    def __hash__(self):
        return self._hash

    def __str__(self):
        return render(self)


Term = Union[Atom, Indet, Cat, Enc, Sig, Hash]


# --- atom helpers -----------------------------------------------------------

def name(x: str) -> Atom:
    return Atom("name", x)


def nonce(x: str) -> Atom:
    return Atom("nonce", x)


def text(x: str) -> Atom:
    return Atom("text", x)


def symkey(x: str) -> Atom:
    return Atom("sym_key", x)


def sk(a: Atom) -> Atom:
    """Private signature key of the name ``a``."""
    if a.sort != "name":
        raise SortError("sk() is defined on names only")
    return Atom("sig_key", a.id)


def pk(a: Atom) -> Atom:
    """Public encryption key of the name ``a``."""
    if a.sort != "name":
        raise SortError("pk() is defined on names only")
    return Atom("asym_key", a.id)


def inv(k: Atom) -> Atom:
    if not isinstance(k, Atom):
        raise SortError("inv() takes an atomic key")
    if k.sort == "sym_key":
        return k
    if k.sort in ("asym_key", "sig_key"):
        return Atom(k.sort, k.id, not k.inverse)
    raise SortError(f"inv() undefined on sort {k.sort}")


def cat(*parts: Term, tag: str = "nil") -> Term:
    """Right-nested concatenation; only the outermost pair carries ``tag``."""
    if len(parts) < 2:
        raise ValueError("cat() needs at least two parts")
    acc = parts[-1]
    for p in reversed(parts[1:-1]):
        acc = Cat("nil", p, acc)
    return Cat(tag, parts[0], acc)


# --- structure ---------------------------------------------------------------

def children(t: Term) -> tuple:
    if isinstance(t, Cat):
        return (t.left, t.right)
    if isinstance(t, Enc):
        return (t.plain, t.key) if t.rand is None else (t.plain, t.key, t.rand)
    if isinstance(t, Sig):
        return (t.body, t.key)
    if isinstance(t, Hash):
        return (t.body,)
    return ()


def depth(t: Term) -> int:
    ch = children(t)
    return 0 if not ch else 1 + max(depth(c) for c in ch)


@lru_cache(maxsize=1 << 16)
def is_ground(t: Term) -> bool:
    if isinstance(t, Indet):
        return False
    return all(is_ground(c) for c in children(t))


def indets(t: Term) -> set:
    if isinstance(t, Indet):
        return {t}
    out = set()
    for c in children(t):
        out |= indets(c)
    return out


def atoms(t: Term) -> set:
    if isinstance(t, Atom):
        return {t}
    out = set()
    for c in children(t):
        out |= atoms(c)
    return out


def subterms(t: Term) -> Iterator[Term]:
    """Every subterm, including the randomizer of encryptions."""
    yield t
    for c in children(t):
        yield from subterms(c)


def term_key(t: Term) -> tuple:
    """Canonical total order: constructor rank, then children."""
    if isinstance(t, Atom):
        return (0, t.sort, t.id, t.inverse)
    if isinstance(t, Indet):
        return (1, t.name)
    if isinstance(t, Cat):
        return (2, t.tag, term_key(t.left), term_key(t.right))
    if isinstance(t, Enc):
        return (3, term_key(t.plain), term_key(t.key),
                () if t.rand is None else term_key(t.rand))
    if isinstance(t, Sig):
        return (4, term_key(t.body), term_key(t.key))
    return (5, term_key(t.body))


# --- paths ----------------------------------------------------------------------

Path = Sequence[str]


def step(t: Term, s: str) -> Optional[Term]:
    if isinstance(t, (Cat, Enc, Sig)):
        if s == "L":
            return t.left if isinstance(t, Cat) else (t.plain if isinstance(t, Enc) else t.body)
        if s == "R":
            return t.right if isinstance(t, Cat) else t.key
        raise ValueError(f"bad path step {s!r}")
    if isinstance(t, Hash):
        return t.body if s == "L" else None
    return None


def path_apply(t: Term, p: Path) -> Optional[Term]:
    for s in p:
        t = step(t, s)
        if t is None:
            return None
    return t


def _is_key_edge(t: Term, s: str) -> bool:
    return isinstance(t, Hash) or (isinstance(t, (Enc, Sig)) and s == "R")


def paths(t: Term, through_keys: bool = True) -> Iterator[tuple]:
    """All defined paths of ``t`` (optionally only those avoiding key edges)."""
    yield ()
    for s in ("L", "R"):
        sub = step(t, s)
        if sub is None:
            continue
        if not through_keys and _is_key_edge(t, s):
            continue
        for rest in paths(sub, through_keys):
            yield (s,) + rest


def is_ingredient(t0: Term, t: Term) -> bool:
    """``t0`` is reachable from ``t`` without crossing a key edge."""
    if t0 == t:
        return True
    if isinstance(t, Cat):
        return is_ingredient(t0, t.left) or is_ingredient(t0, t.right)
    if isinstance(t, Enc):
        return is_ingredient(t0, t.plain)
    if isinstance(t, Sig):
        return is_ingredient(t0, t.body)
    return False


def appears_in(t0: Term, t: Term) -> bool:
    if t0 == t:
        return True
    if isinstance(t, (Cat, Enc, Sig)):
        a, b = (t.left, t.right) if isinstance(t, Cat) else (
            (t.plain, t.key) if isinstance(t, Enc) else (t.body, t.key))
        return appears_in(t0, a) or appears_in(t0, b)
    if isinstance(t, Hash):
        return appears_in(t0, t.body)
    return False


# --- substitutions ------------------------------------------------------------

class Substitution:
    """A pair of an atom map (sort preserving) and an indeterminate map.

    Signature keys, and asymmetric keys named after a principal, follow the
    image of their owner's name unless mapped explicitly; ``inv`` commutes.
    """

    __slots__ = ("atom_map", "indet_map")

    def __init__(self, atom_map: Mapping[Atom, Atom] = (), indet_map: Mapping[Indet, Term] = ()):
        am = dict(atom_map)
        for a, b in am.items():
            if not isinstance(a, Atom) or not isinstance(b, Atom):
                raise SortError("atom_map must map atoms to atoms")
            if a.sort != b.sort or a.inverse != b.inverse:
                raise SortError(f"{render(a)} and {render(b)} differ in sort")
        self.atom_map = am
        self.indet_map = dict(indet_map)

    def map_atom(self, a: Atom) -> Atom:
        am = self.atom_map
        if a in am:
            return am[a]
        if a.inverse:
            base = Atom(a.sort, a.id)
            if base in am:
                return inv(am[base])
        if a.sort in ("sig_key", "asym_key"):
            owner = Atom("name", a.id)
            if owner in am:
                return Atom(a.sort, am[owner].id, a.inverse)
        return a

    def __call__(self, t: Term) -> Term:
        return substitute(t, self)

    def compose(self, first: "Substitution") -> "Substitution":
        """``self ∘ first``: apply ``first``, then ``self``."""
        am = {a: self.map_atom(b) for a, b in first.atom_map.items()}
        for a, b in self.atom_map.items():
            am.setdefault(a, b)
        im = {x: substitute(t, self) for x, t in first.indet_map.items()}
        for x, t in self.indet_map.items():
            im.setdefault(x, t)
        return Substitution(am, im)

    def extend(self, atom_map=(), indet_map=()) -> "Substitution":
        am = dict(self.atom_map)
        am.update(atom_map)
        im = dict(self.indet_map)
        im.update(indet_map)
        return Substitution(am, im)

    def is_identity(self) -> bool:
        return all(a == b for a, b in self.atom_map.items()) and all(
            x == t for x, t in self.indet_map.items())

    def __eq__(self, other):
        return (isinstance(other, Substitution) and self.atom_map == other.atom_map
                and self.indet_map == other.indet_map)

    def __hash__(self):
        return hash((frozenset(self.atom_map.items()), frozenset(self.indet_map.items())))

    def __repr__(self):
        items = [f"{render(a)}↦{render(b)}" for a, b in self.atom_map.items()]
        items += [f"{render(x)}↦{render(t)}" for x, t in self.indet_map.items()]
        return "{" + ", ".join(items) + "}"


IDENTITY = Substitution()


def substitute(t: Term, s: Substitution) -> Term:
    if isinstance(t, Atom):
        return s.map_atom(t)
    if isinstance(t, Indet):
        return s.indet_map.get(t, t)
    if isinstance(t, Cat):
        return Cat(t.tag, substitute(t.left, s), substitute(t.right, s))
    if isinstance(t, Enc):
        return Enc(substitute(t.plain, s), substitute(t.key, s),
                   None if t.rand is None else substitute(t.rand, s))
    if isinstance(t, Sig):
        return Sig(substitute(t.body, s), substitute(t.key, s))
    return Hash(substitute(t.body, s))


# --- matching -----------------------------------------------------------------

def _bind_atom(p: Atom, t: Term, params: frozenset, b: Substitution) -> Optional[Substitution]:
    if not isinstance(t, Atom) or t.sort != p.sort or t.inverse != p.inverse:
        return None
    base = Atom(p.sort, p.id)
    if p in params or base in params:
        key, val = base, Atom(t.sort, t.id)
    elif p.sort in ("sig_key", "asym_key") and Atom("name", p.id) in params:
        key, val = Atom("name", p.id), Atom("name", t.id)
    else:
        return b if p == t else None
    cur = b.atom_map.get(key)
    if cur is None:
        return b.extend(atom_map={key: val})
    return b if cur == val else None


def match(pattern: Term, t: Term, params=frozenset(), binding: Substitution = IDENTITY
          ) -> Optional[Substitution]:
    """Extend ``binding`` so that ``pattern`` instantiates to the ground ``t``.

    Indeterminates are always variables; atoms are variables only when in
    ``params`` (keys named after a parameter name follow it)."""
    if isinstance(pattern, Indet):
        cur = binding.indet_map.get(pattern)
        if cur is None:
            return binding.extend(indet_map={pattern: t})
        return binding if cur == t else None
    if isinstance(pattern, Atom):
        return _bind_atom(pattern, t, params, binding)
    if type(pattern) is not type(t):
        return None
    if isinstance(pattern, Cat):
        if pattern.tag != t.tag:
            return None
        b = match(pattern.left, t.left, params, binding)
        return None if b is None else match(pattern.right, t.right, params, b)
    if isinstance(pattern, Enc):
        if (pattern.rand is None) != (t.rand is None):
            return None
        b = match(pattern.plain, t.plain, params, binding)
        if b is not None:
            b = match(pattern.key, t.key, params, b)
        if b is not None and pattern.rand is not None:
            b = match(pattern.rand, t.rand, params, b)
        return b
    if isinstance(pattern, Sig):
        b = match(pattern.body, t.body, params, binding)
        return None if b is None else match(pattern.key, t.key, params, b)
    return match(pattern.body, t.body, params, binding)


# --- rendering / parsing ----------------------------------------------------------

_ATOM_PREFIX = {"name": "name", "nonce": "nonce", "text": "text",
                "sym_key": "key", "asym_key": "akey"}
_PREFIX_SORT = {v: k for k, v in _ATOM_PREFIX.items()}


def render(t: Term) -> str:
    if isinstance(t, Atom):
        if t.sort == "sig_key":
            s = f"sk({t.id})"
        else:
            s = f"{_ATOM_PREFIX[t.sort]}:{t.id}"
        return f"inv({s})" if t.inverse else s
    if isinstance(t, Indet):
        return f"?{t.name}"
    if isinstance(t, Cat):
        return f"cat({t.tag}, {render(t.left)}, {render(t.right)})"
    if isinstance(t, Enc):
        if t.rand is None:
            return f"enc({render(t.plain)}, {render(t.key)})"
        return f"enc({render(t.plain)}, {render(t.key)}, {render(t.rand)})"
    if isinstance(t, Sig):
        return f"sig({render(t.body)}, {render(t.key)})"
    return f"hash({render(t.body)})"


_TOKEN = re.compile(r"\s*(?:(?P<punct>[(),])|(?P<word>[A-Za-z_][\w.\-']*)(?P<colon>:)?|"
                    r"(?P<indet>\?[\w.\-']+))")


class _Lexer:
    def __init__(self, s: str):
        self.s = s
        self.pos = 0

    def peek(self):
        m = _TOKEN.match(self.s, self.pos)
        return m

    def next(self):
        m = _TOKEN.match(self.s, self.pos)
        if m is None or m.end() == m.start():
            raise ParseError(f"unexpected input at {self.pos}: {self.s[self.pos:self.pos + 20]!r}")
        self.pos = m.end()
        return m

    def expect(self, ch: str):
        m = self.next()
        if m.group("punct") != ch:
            raise ParseError(f"expected {ch!r} at {m.start()}")

    def at_end(self):
        return self.s[self.pos:].strip() == ""


def _ident(lx: _Lexer) -> str:
    m = lx.next()
    if not m.group("word") or m.group("colon"):
        raise ParseError(f"expected identifier at {m.start()}")
    return m.group("word")


def _parse(lx: _Lexer) -> Term:
    m = lx.next()
    if m.group("indet"):
        return Indet(m.group("indet")[1:])
    w = m.group("word")
    if not w:
        raise ParseError(f"unexpected {m.group(0)!r} at {m.start()}")
    if m.group("colon"):
        if w not in _PREFIX_SORT:
            raise ParseError(f"unknown atom prefix {w!r}")
        return Atom(_PREFIX_SORT[w], _ident(lx))
    lx.expect("(")
    if w == "sk":
        out = Atom("sig_key", _ident(lx))
    elif w == "inv":
        k = _parse(lx)
        if not isinstance(k, Atom):
            raise ParseError("inv() of a compound term")
        out = inv(k)
    elif w == "cat":
        tag = _ident(lx)
        lx.expect(",")
        a = _parse(lx)
        lx.expect(",")
        out = Cat(tag, a, _parse(lx))
    elif w == "enc":
        a = _parse(lx)
        lx.expect(",")
        k = _parse(lx)
        r = None
        if lx.peek() and lx.peek().group("punct") == ",":
            lx.next()
            r = _parse(lx)
        out = Enc(a, k, r)
    elif w == "sig":
        a = _parse(lx)
        lx.expect(",")
        out = Sig(a, _parse(lx))
    elif w == "hash":
        out = Hash(_parse(lx))
    else:
        raise ParseError(f"unknown constructor {w!r}")
    lx.expect(")")
    return out


def parse_term(s: str) -> Term:
    lx = _Lexer(s)
    t = _parse(lx)
    if not lx.at_end():
        raise ParseError(f"trailing input: {s[lx.pos:]!r}")
    return t


def parse_term_prefix(lx: _Lexer) -> Term:
    return _parse(lx)
