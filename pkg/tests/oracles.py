"""Independent reference implementations used by the tests.

Nothing here calls the library's structural helpers; each oracle is
written directly from the defining clauses, by explicit path enumeration
or bottom-up saturation.
"""

from collections import Counter
from itertools import product

from strandmsr.terms import Atom, Cat, Enc, Hash, Sig, name, nonce, symkey, text

A, M, K, R = name("A"), text("M"), symkey("K"), nonce("R")
ALPHABET = (A, M, K, R)


def terms_up_to(depth, alphabet=ALPHABET, rands=(None, R)):
    """Every ground term of constructor depth <= ``depth``.  Encryption
    randomizers range over ``rands`` and concatenations carry the nil tag."""
    levels = [list(alphabet)]
    allt = list(alphabet)
    for _ in range(depth):
        new = []
        for a, b in product(allt, repeat=2):
            new.append(Cat("nil", a, b))
            new.append(Sig(a, b))
            for r in rands:
                new.append(Enc(a, b, r))
        new += [Hash(a) for a in allt]
        fresh = [t for t in dict.fromkeys(new) if t not in set(allt)]
        levels.append(fresh)
        allt = allt + fresh
    return allt


def _step(t, s):
    if type(t) is Cat:
        return t.left if s == "L" else t.right
    if type(t) is Enc:
        return t.plain if s == "L" else t.key
    if type(t) is Sig:
        return t.body if s == "L" else t.key
    if type(t) is Hash:
        return t.body if s == "L" else None
    return None


def _key_edge(t, s):
    return type(t) is Hash or (type(t) in (Enc, Sig) and s == "R")


def all_paths(t, max_len):
    """Every L/R word of length <= ``max_len`` that is defined on ``t``,
    with the subterm it reaches and whether it crosses a key edge."""
    out = []
    for n in range(max_len + 1):
        for word in product("LR", repeat=n):
            u, keyed = t, False
            for s in word:
                nxt = _step(u, s)
                if nxt is None:
                    u = None
                    break
                keyed = keyed or _key_edge(u, s)
                u = nxt
            if u is not None:
                out.append((word, u, keyed))
    return out


def _height(t):
    kids = [x for x in (_step(t, "L"), _step(t, "R")) if x is not None]
    return 0 if not kids else 1 + max(_height(k) for k in kids)


def ingredients(t):
    return {u for _, u, keyed in all_paths(t, _height(t)) if not keyed}


def occurrences(t):
    return {u for _, u, _ in all_paths(t, _height(t))}


def originates(t0, events, j):
    """``events`` is a list of (sign, term); does ``t0`` originate at ``j``?"""
    sign, msg = events[j]
    if sign != "+" or t0 not in ingredients(msg):
        return False
    return all(t0 not in ingredients(m) for _, m in events[:j])


def _inverse(k):
    if isinstance(k, Atom) and k.sort in ("asym_key", "sig_key"):
        return Atom(k.sort, k.id, not k.inverse)
    return k


def closure(known, universe, bound):
    """Terms of ``universe`` the adversary derives: iterate analysis and
    synthesis to a fixpoint, tracking how many layers were composed."""
    height = {t: 0 for t in known}

    def h(t):
        return height.get(t, bound + 1)

    changed = True
    while changed:
        changed = False
        cand = []
        for t in list(height):
            if height[t] != 0:
                continue
            if type(t) is Cat:
                cand += [(t.left, 0), (t.right, 0)]
            elif type(t) is Sig:
                cand.append((t.body, 0))
            elif type(t) is Enc and h(_inverse(t.key)) <= bound:
                cand.append((t.plain, 0))
                if t.rand is not None:
                    cand.append((t.rand, 0))
        for t in universe:
            if type(t) in (Cat, Enc):
                parts = [t.left, t.right] if type(t) is Cat else [t.plain, t.key] + (
                    [] if t.rand is None else [t.rand])
            elif type(t) is Hash:
                parts = [t.body]
            elif type(t) is Sig:
                ok = (isinstance(t.key, Atom) and t.key.sort == "sig_key" and not t.key.inverse
                      and h(t.key) == 0)
                parts = [t.body] if ok else None
            else:
                parts = None
            if parts:
                top = max(h(p) for p in parts)
                if top < bound:
                    cand.append((t, top + 1))
        for t, v in cand:
            if v < h(t):
                height[t] = v
                changed = True
    return {t for t, v in height.items() if v <= bound}


def oracle_apply(state, rule, sigma):
    """Multiset arithmetic on Counters, independent of MState.  None when
    the instantiated left-hand side is not contained in ``state``."""
    lhs, _, rhs = rule.instance(sigma)
    c = Counter(dict(state.items()))
    need = Counter(lhs)
    if any(c[f] < n for f, n in need.items()):
        return None
    c.subtract(need)
    c.update(rhs)
    return +c


def lhs_covered(state, f1, f2):
    """Both instantiated left-hand sides fit in ``state`` together."""
    need = Counter(f1[0].instance(f1[1])[0]) + Counter(f2[0].instance(f2[1])[0])
    have = Counter(dict(state.items()))
    return all(have[f] >= n for f, n in need.items())
