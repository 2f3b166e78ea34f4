"""Strands, roles, protocols and bundles.

Roles are written as branching trees and compiled to their root-to-leaf
linear strands.  A strand in a bundle is a ground prefix of one or more of
those branches; it keeps the set of branches it is still consistent with.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .state import Fact, match_fact
from .terms import (IDENTITY, Atom, Cat, Enc, Indet, Sig, Substitution, Term, indets, is_ingredient,
                    match, render, substitute)

SEND, RECV, SYNC = "+", "-", "~"

NodeRef = Tuple[int, int]


class CyclicBundle(ValueError):
    pass


class RoleError(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    kind: str
    payload: object

    @property
    def msg(self) -> Optional[Term]:
        return self.payload if self.kind != SYNC else None

    def __str__(self):
        body = str(self.payload) if self.kind == SYNC else render(self.payload)
        return f"{self.kind} {body}"


def Send(t: Term) -> Event:
    return Event(SEND, t)


def Recv(t: Term) -> Event:
    return Event(RECV, t)


def Sync(f: Fact) -> Event:
    return Event(SYNC, f)


@dataclass(frozen=True)
class NodeTemplate:
    """A parametric node.  ``checks`` apply to receptions: each pair
    ``(x, pattern)`` requires the value bound to ``x`` to match ``pattern``.
    ``peer`` names the parameter of the principal at the other end and
    ``label`` is a short name for the message or event."""
    kind: str
    payload: object
    checks: tuple = ()
    peer: Optional[Atom] = None
    label: str = ""

    def instantiate(self, b: Substitution) -> Event:
        if self.kind == SYNC:
            return Event(SYNC, self.payload.subst(b))
        return Event(self.kind, substitute(self.payload, b))

    def match(self, ev: Event, params: frozenset, b: Substitution) -> Optional[Substitution]:
        if ev.kind != self.kind:
            return None
        if self.kind == SYNC:
            return match_fact(self.payload, ev.payload, params, b)
        b = match(self.payload, ev.payload, params, b)
        for x, pat in self.checks:
            if b is None:
                return None
            b = match(pat, substitute(x, b), params, b)
        return b


@dataclass
class Tree:
    nodes: list
    branches: dict = field(default_factory=dict)


def compile_tree(tree: Tree, prefix: str = "") -> Dict[str, tuple]:
    if not tree.branches:
        return {prefix or "main": tuple(tree.nodes)}
    out = {}
    for key, sub in tree.branches.items():
        for name, seq in compile_tree(sub, f"{prefix}/{key}" if prefix else key).items():
            out[name] = tuple(tree.nodes) + seq
    return out


def received_indets(t: Term) -> set:
    """Indeterminates a recipient learns from ``t``: those reachable through
    pairs, signature bodies and the plaintext or randomizer of an
    encryption.  Hash bodies and keys are not learned."""
    out, todo = set(), [t]
    while todo:
        u = todo.pop()
        if isinstance(u, Indet):
            out.add(u)
        elif isinstance(u, Cat):
            todo += [u.left, u.right]
        elif isinstance(u, Sig):
            todo.append(u.body)
        elif isinstance(u, Enc):
            todo.append(u.plain)
            if u.rand is not None:
                todo.append(u.rand)
    return out


def is_carried(t0: Term, t: Term) -> bool:
    """``t0`` is an ingredient of ``t`` or sits in the randomizer position of
    an encryption reachable along ingredient paths.  A recipient who can
    decrypt learns such values without their being ingredients."""
    todo = [t]
    while todo:
        u = todo.pop()
        if u == t0:
            return True
        if isinstance(u, Cat):
            todo += [u.left, u.right]
        elif isinstance(u, Sig):
            todo.append(u.body)
        elif isinstance(u, Enc):
            todo.append(u.plain)
            if u.rand is not None:
                todo.append(u.rand)
    return False


@dataclass(frozen=True)
class Role:
    name: str
    branches: Dict[str, tuple]
    params: frozenset
    principal_param: Optional[Atom]

    def __post_init__(self):
        object.__setattr__(self, "params", frozenset(self.params))
        self.validate()

    def __hash__(self):
        return hash(self.name)

    @classmethod
    def from_tree(cls, name, tree: Tree, params, principal_param):
        return cls(name, compile_tree(tree), params, principal_param)

    def validate(self):
        for bname, seq in self.branches.items():
            seen = set()
            for i, nt in enumerate(seq):
                if nt.kind == SYNC:
                    if self.principal_param is None or nt.payload.args[0] != self.principal_param:
                        raise RoleError(f"{self.name}/{bname}#{i}: sync event not at the strand's principal")
                    seen |= nt.payload.indets()
                    continue
                here = indets(nt.payload)
                if nt.kind == RECV:
                    got = received_indets(nt.payload)
                    for x, pat in nt.checks:
                        got |= received_indets(pat)
                    missing = (here - got - seen)
                    seen |= got
                else:
                    missing = here - seen
                if missing:
                    names = ", ".join(sorted(render(x) for x in missing))
                    raise RoleError(f"{self.name}/{bname}#{i}: {names} used before being received")

    def first_nodes(self) -> set:
        return {seq[0] for seq in self.branches.values()}

    def height(self, branch: str) -> int:
        return len(self.branches[branch])


@dataclass(frozen=True)
class Protocol:
    roles: Dict[str, Role]
    guaranteed: frozenset

    def __post_init__(self):
        object.__setattr__(self, "guaranteed", frozenset(self.guaranteed))
        for rname, bname, i in self.guaranteed:
            seq = self.roles[rname].branches[bname]
            if seq[i].kind != SEND:
                raise RoleError(f"guaranteed delivery position {rname}/{bname}#{i} is not a transmission")

    def is_guaranteed(self, role: str, branch: str, index: int) -> bool:
        return (role, branch, index) in self.guaranteed


# --- bundles --------------------------------------------------------------------

@dataclass(frozen=True)
class StrandRec:
    id: int
    role: str
    nodes: tuple
    regular: bool = True
    principal: Optional[Atom] = None
    branches: tuple = ()
    binding: Substitution = field(default=IDENTITY, compare=False)
    gflags: tuple = ()

    def __len__(self):
        return len(self.nodes)

    @property
    def branch(self) -> str:
        return self.branches[0] if self.branches else ""

    def node(self, i: int) -> Event:
        return self.nodes[i]


@dataclass(frozen=True)
class Bundle:
    strands: tuple = ()
    edges: tuple = ()

    def strand(self, sid: int) -> StrandRec:
        return self.strands[sid]

    def event(self, n: NodeRef) -> Event:
        return self.strands[n[0]].nodes[n[1]]

    def node_refs(self) -> List[NodeRef]:
        return [(s.id, i) for s in self.strands for i in range(len(s.nodes))]

    def incoming(self, n: NodeRef) -> List[NodeRef]:
        return [a for a, b in self.edges if b == n]

    def outgoing(self, n: NodeRef) -> List[NodeRef]:
        return [b for a, b in self.edges if a == n]

    def dump(self) -> str:
        lines = []
        for s in self.strands:
            tag = f"{s.role}/{s.branch}" if s.regular else f"adv:{s.role}"
            for i, ev in enumerate(s.nodes):
                lines.append(f"{s.id}#{i} [{tag}] {ev}")
        for a, b in self.edges:
            lines.append(f"edge {a[0]}#{a[1]} -> {b[0]}#{b[1]}")
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class Violation:
    condition: str
    nodes: tuple
    detail: str = ""

    def __str__(self):
        ns = ", ".join(f"{a}#{b}" for a, b in self.nodes)
        return f"[{self.condition}] {ns} {self.detail}".rstrip()


def check_bundle(b: Bundle) -> List[Violation]:
    out = []
    refs = set(b.node_refs())
    for a, c in b.edges:
        if a not in refs or c not in refs:
            out.append(Violation("3", (a, c), "edge endpoint outside bundle"))
            continue
        ea, ec = b.event(a), b.event(c)
        if ea.kind != SEND or ec.kind != RECV or ea.payload != ec.payload:
            out.append(Violation("1", (a, c), "edge must join equal send and receive"))
    for n in sorted(refs):
        if b.event(n).kind == RECV:
            k = len(b.incoming(n))
            if k != 1:
                out.append(Violation("2", (n,), f"{k} incoming communication edges"))
    for i, s in enumerate(b.strands):
        if s.id != i:
            out.append(Violation("3", ((s.id, 0),), "strand ids must be positional"))
    try:
        causal_order(b)
    except CyclicBundle as exc:
        out.append(Violation("4", (), str(exc)))
    return out


class CausalOrder:
    """Reflexive-transitive closure of strand and communication edges."""

    def __init__(self, b: Bundle):
        self.bundle = b
        preds: Dict[NodeRef, set] = {n: set() for n in b.node_refs()}
        for s in b.strands:
            for i in range(1, len(s.nodes)):
                preds[(s.id, i)].add((s.id, i - 1))
        for a, c in b.edges:
            if c in preds and a in preds:
                preds[c].add(a)
        self.preds = preds
        self.below: Dict[NodeRef, frozenset] = {}
        state: Dict[NodeRef, int] = {}
        for n in preds:
            self._close(n, state)

    def _close(self, root: NodeRef, state):
        stack = [(root, iter(sorted(self.preds[root])))]
        if root in state:
            return
        state[root] = 1
        while stack:
            n, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                acc = {n}
                for p in self.preds[n]:
                    acc |= self.below[p]
                self.below[n] = frozenset(acc)
                state[n] = 2
                stack.pop()
                continue
            st = state.get(nxt)
            if st == 1:
                raise CyclicBundle(f"cycle through {nxt[0]}#{nxt[1]}")
            if st is None:
                state[nxt] = 1
                stack.append((nxt, iter(sorted(self.preds[nxt]))))

    def leq(self, m: NodeRef, n: NodeRef) -> bool:
        return m in self.below[n]

    def minimal_members(self, nodes: Iterable[NodeRef]) -> set:
        s = set(nodes)
        return {n for n in s if not any(m != n and m in s and self.leq(m, n) for m in s)}


def causal_order(b: Bundle) -> CausalOrder:
    return CausalOrder(b)


def originates_at(t0: Term, n: NodeRef, b: Bundle) -> bool:
    ev = b.event(n)
    if ev.kind != SEND or not is_ingredient(t0, ev.payload):
        return False
    s = b.strand(n[0])
    for i in range(n[1]):
        m = s.nodes[i].msg
        if m is not None and is_ingredient(t0, m):
            return False
    return True


def origination_points(t0: Term, b: Bundle) -> List[NodeRef]:
    return [n for n in b.node_refs() if originates_at(t0, n, b)]


def check_unique_origination(t0: Term, b: Bundle) -> bool:
    return len(origination_points(t0, b)) == 1


def similar(n: NodeRef, m: NodeRef, b: Bundle) -> bool:
    if n[1] != m[1]:
        return False
    sn, sm = b.strand(n[0]), b.strand(m[0])
    if not (sn.regular and sm.regular):
        return False
    return sn.nodes[:n[1] + 1] == sm.nodes[:m[1] + 1]


def role_continues(s: StrandRec, index: int, protocol: Protocol) -> bool:
    if index < len(s.nodes) - 1:
        return True
    role = protocol.roles.get(s.role)
    if role is None:
        return False
    return any(len(role.branches[br]) > len(s.nodes) for br in s.branches)


def unresolved_nodes(b: Bundle, protocol: Protocol) -> List[NodeRef]:
    tails = [(s.id, len(s.nodes) - 1) for s in b.strands if s.regular and s.nodes]
    out = []
    for s in b.strands:
        if not s.regular:
            continue
        for i in range(len(s.nodes)):
            if not role_continues(s, i, protocol):
                continue
            if any(similar((s.id, i), t, b) and role_continues(b.strand(t[0]), t[1], protocol)
                   for t in tails if t[1] == i):
                out.append((s.id, i))
    return out


def bundle_height(s: StrandRec) -> int:
    return len(s.nodes)


def is_full_length(s: StrandRec, protocol: Protocol) -> bool:
    role = protocol.roles[s.role]
    return any(len(role.branches[br]) == len(s.nodes) for br in s.branches)
