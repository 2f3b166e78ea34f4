"""Executions: a bundle, a computation and the map from synchronization
nodes to transition indices, built one step at a time.

Guaranteed-delivery transmissions are tracked as pending until some regular
reception consumes them.  The adversary observes every message sent on a
readable link or to or from a non-compliant principal, and may deliver any
message it can derive through an adversary strand.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .adversary import Knowledge
from .scenario import Scenario
from .state import Computation, Fact, MState, Rule, firings, is_valid_computation
from .strands import (RECV, SEND, SYNC, Bundle, Event, NodeRef, Protocol,
                      StrandRec, Violation, causal_order, check_bundle, is_carried, is_ingredient,
                      role_continues)
from .terms import IDENTITY, Atom, Substitution, Term, pk, inv, render, sk
from .wang import (NIL, TTP_ROLES, gw_initial_state, gw_rules,
                   make_roles, messages)

DEFAULT_BUDGET = 10_000
LISTENER = "listener"
ADVERSARY = "adversary"


class IncompatibleStep(Exception):
    pass


class NonTerminating(RuntimeError):
    pass


def role_kind(role: str) -> str:
    return "ttp" if role in TTP_ROLES else role


# --- world: everything fixed for a run ----------------------------------------------

@dataclass(frozen=True, eq=False)
class World:
    scenario: Scenario
    protocol: Protocol
    rules: Dict[str, Rule]
    sessions: tuple
    shapes: tuple
    unique: frozenset
    initial_state: MState
    initial_knowledge: Knowledge
    cache: dict = field(default_factory=dict, repr=False)

    def designated(self, kind: str) -> Optional[Atom]:
        sc = self.scenario
        return {"initiator": sc.initiator, "responder": sc.responder, "ttp": sc.ttp}.get(kind)

    def guaranteed(self, role: str, branch: str, index: int, sender, peer) -> bool:
        sc = self.scenario
        if sender is not None and peer is not None:
            ch = sc.channel(sender, peer)
            if ch.droppable:
                return False
            if ch.resilient:
                return True
        return self.protocol.is_guaranteed(role, branch, index)

    def readable(self, sender, peer) -> bool:
        sc = self.scenario
        if not (sc.is_compliant(sender) and sc.is_compliant(peer)):
            return True
        return not sc.channel(sender, peer).confidential


def make_world(sc: Scenario) -> World:
    protocol = make_roles(sc.variant)
    sessions = sc.session_params()
    shapes = []
    for p in sessions:
        w = messages(p)
        shapes += [w.MSG1, w.EOR, w.KR, w.ABRQ, w.AT, w.AR, w.RTOK, w.RR, w.CF, w.CFT]
    unique = set()
    for p in sessions:
        if sc.is_compliant(p.A):
            unique |= {p.K, p.R}
    base = {NIL}
    for x in sc.principals:
        base |= {x, pk(x)}
        if not sc.is_compliant(x):
            base |= {sk(x), inv(pk(x))}
    for p in sessions:
        if not sc.is_compliant(p.A):
            base |= {p.M, p.K, p.R}
    base |= set(sc.knowledge)
    labels = [messages(p).L for p in sessions]
    return World(sc, protocol, gw_rules(), sessions, tuple(dict.fromkeys(shapes)),
                 frozenset(unique), gw_initial_state(labels, sc.ttp),
                 Knowledge(frozenset(base), depth_bound=sc.depth))


# --- executions -----------------------------------------------------------------------

@dataclass(frozen=True)
class Execution:
    bundle: Bundle
    computation: Computation
    phi: tuple = ()
    knowledge: Optional[Knowledge] = None
    pending: tuple = ()
    observed: tuple = ()
    trace: tuple = ()
    rng_seed: Optional[int] = None
    world: Optional[World] = field(default=None, compare=False, repr=False)

    @property
    def phi_map(self) -> Dict[NodeRef, int]:
        return dict(self.phi)

    def strands(self):
        return self.bundle.strands

    def regular(self):
        return [s for s in self.bundle.strands if s.regular]

    def replace(self, **kw) -> "Execution":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return Execution(**d)

    @property
    def trace_lines(self) -> List[str]:
        return [r.line(i) for i, r in enumerate(self.trace)]

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace_lines)

    def state_text(self) -> str:
        return self.computation.last.dump()


def initial_execution(world: World, seed: Optional[int] = None) -> Execution:
    return Execution(Bundle(), Computation((world.initial_state,)), (), world.initial_knowledge,
                     (), (), (), seed, world)


def empty_execution() -> Execution:
    return Execution(Bundle(), Computation((MState(),)))


def check_compatibility(e: Execution) -> List[Violation]:
    out = list(check_bundle(e.bundle))
    if not is_valid_computation(e.computation):
        out.append(Violation("computation", (), "transitions do not replay"))
    phi = e.phi_map
    if len(phi) != len(e.phi):
        out.append(Violation("phi", (), "node mapped twice"))
    if len(set(phi.values())) != len(phi):
        out.append(Violation("phi", (), "not injective"))
    labels = e.computation.labels
    sync_nodes = [n for n in e.bundle.node_refs() if e.bundle.event(n).kind == SYNC]
    for n in sync_nodes:
        if n not in phi:
            out.append(Violation("phi", (n,), "sync node without transition"))
        elif not 0 <= phi[n] < len(labels) or labels[phi[n]] != e.bundle.event(n).payload:
            out.append(Violation("phi", (n,), "label differs from sync event"))
    if any(c.condition == "4" for c in out):
        return out
    order = causal_order(e.bundle)
    for a in sync_nodes:
        for b in sync_nodes:
            if a != b and a in phi and b in phi and order.leq(a, b) and not phi[a] < phi[b]:
                out.append(Violation("order", (a, b), "transition order contradicts causal order"))
    return out


# --- next templates ---------------------------------------------------------------------

def next_templates(world: World, s: StrandRec) -> List[Tuple[str, object]]:
    if not s.regular:
        return []
    role = world.protocol.roles[s.role]
    i = len(s.nodes)
    return [(br, role.branches[br][i]) for br in s.branches if len(role.branches[br]) > i]


def _params(world: World, s: StrandRec) -> frozenset:
    return world.protocol.roles[s.role].params


def _peer(tmpl, b: Substitution):
    return None if tmpl.peer is None else b.map_atom(tmpl.peer)


# --- choices ------------------------------------------------------------------------------

@dataclass(frozen=True)
class StartStrand:
    session: int


@dataclass(frozen=True)
class Extend:
    sid: int
    event: Event


@dataclass(frozen=True)
class Deliver:
    msg: Term
    target: Union[int, str]
    source: Optional[NodeRef] = None


Choice = Union[StartStrand, Extend, Deliver]


@dataclass(frozen=True)
class TraceRecord:
    """One step: ``seq kind principal strand#index payload [extra]``."""
    kind: str
    principal: Optional[Atom]
    node: NodeRef
    payload: object
    extra: str = ""

    def line(self, seq: int) -> str:
        who = self.principal.id if isinstance(self.principal, Atom) else "-"
        body = str(self.payload) if self.kind == "sync" else render(self.payload)
        return f"{seq} {self.kind} {who} {self.node[0]}#{self.node[1]} {body}{self.extra}"


def _record(e: Execution, kind: str, principal, n: NodeRef, payload, extra: str = "") -> tuple:
    return e.trace + (TraceRecord(kind, principal, n, payload, extra),)


def _add_node(b: Bundle, s: StrandRec, ev: Event, branches, binding, gflag) -> Tuple[Bundle, StrandRec]:
    ns = StrandRec(s.id, s.role, s.nodes + (ev,), s.regular, s.principal, tuple(branches),
                   binding, s.gflags + (gflag,))
    strands = b.strands[:s.id] + (ns,) + b.strands[s.id + 1:]
    return Bundle(strands, b.edges), ns


def _new_strand(b: Bundle, role: str, regular: bool, principal, binding) -> Tuple[Bundle, StrandRec]:
    s = StrandRec(len(b.strands), role, (), regular, principal, (), binding, ())
    return Bundle(b.strands + (s,), b.edges), s


def _observe(e: Execution, msg: Term, n: NodeRef, sender, peer) -> Execution:
    w = e.world
    if not w.readable(sender, peer):
        return e
    obs = e.observed if any(m == msg for m, _ in e.observed) else e.observed + ((msg, n),)
    return e.replace(knowledge=e.knowledge.with_terms([msg]), observed=obs)


def _check_origination(e: Execution, n: NodeRef, msg: Term):
    """Uniquely originating values may be freshly introduced by only one
    regular transmission.  Adversary transmissions are derivations from
    received messages and are not checked."""
    for v in e.world.unique:
        if not is_ingredient(v, msg) or _received_before(e.bundle.strand(n[0]), n[1], v):
            continue
        for t in e.bundle.strands:
            if not t.regular:
                continue
            for j, ev in enumerate(t.nodes):
                if ((t.id, j) != n and ev.kind == SEND and is_ingredient(v, ev.payload)
                        and not _received_before(t, j, v)):
                    raise IncompatibleStep(f"unique-origination violation for {render(v)}")


def _received_before(s: StrandRec, j: int, v: Term) -> bool:
    """Did ``v`` reach the strand before node ``j``, by reception or by
    reading it out of a state fact?"""
    for ev in s.nodes[:j]:
        if ev.kind == SYNC:
            if any(is_carried(v, x) for x in ev.payload.args):
                return True
        elif is_carried(v, ev.msg):
            return True
    return False


def step(e: Execution, choice: Choice) -> Execution:
    if isinstance(choice, StartStrand):
        return _start(e, choice.session)
    if isinstance(choice, Extend):
        if choice.event.kind == SEND:
            return _send(e, choice.sid, choice.event.payload)
        if choice.event.kind == SYNC:
            return _fire(e, choice.sid, choice.event.payload)
        raise IncompatibleStep("receptions are added by delivery")
    if isinstance(choice, Deliver):
        return _deliver(e, choice.msg, choice.target, choice.source)
    raise TypeError(f"unknown choice {choice!r}")


def _start(e: Execution, session: int) -> Execution:
    w = e.world
    p = w.sessions[session]
    role = w.protocol.roles["initiator"]
    b = Substitution({role.principal_param: p.A, Atom("name", "B"): p.B, Atom("name", "T"): p.T,
                      Atom("text", "M"): p.M, Atom("sym_key", "K"): p.K, Atom("nonce", "R"): p.R})
    bundle, s = _new_strand(e.bundle, "initiator", True, p.A, b)
    s = StrandRec(s.id, s.role, (), True, p.A, tuple(role.branches), b, ())
    bundle = Bundle(bundle.strands[:-1] + (s,), bundle.edges)
    e = e.replace(bundle=bundle)
    first = {t.instantiate(b).payload for t in role.first_nodes()}
    if len(first) != 1:
        raise IncompatibleStep("initiator must open with one transmission")
    return _send(e, s.id, first.pop())


def _send(e: Execution, sid: int, msg: Term) -> Execution:
    w = e.world
    s = e.bundle.strand(sid)
    opts = [(br, t) for br, t in next_templates(w, s)
            if t.kind == SEND and t.instantiate(s.binding).payload == msg]
    if not opts:
        raise IncompatibleStep(f"strand {sid} cannot transmit {render(msg)} next")
    i = len(s.nodes)
    peer = _peer(opts[0][1], s.binding)
    g = any(w.guaranteed(s.role, br, i, s.principal, peer) for br, _ in opts)
    bundle, s = _add_node(e.bundle, s, Event(SEND, msg), [br for br, _ in opts], s.binding, g)
    e = e.replace(bundle=bundle)
    _check_origination(e, (sid, i), msg)
    e = e.replace(trace=_record(e, "send", s.principal, (sid, i), msg,
                                f" to {peer.id}" if peer is not None else ""))
    if g:
        e = e.replace(pending=tuple(sorted(e.pending + ((sid, i),))))
    return _observe(e, msg, (sid, i), s.principal, peer)


def sync_options(e: Execution, sid: int) -> List[Tuple[Rule, Substitution, Fact, Substitution, str]]:
    """Enabled firings for strand ``sid``'s next synchronization node."""
    w = e.world
    s = e.bundle.strand(sid)
    last = e.computation.last
    key = ("sync", last, s.role, s.nodes, s.branches)
    if key not in w.cache:
        w.cache[key] = _sync_options(w, s, last)
    return w.cache[key]


def _sync_options(w: World, s: StrandRec, last: MState):
    out, seen = [], set()
    for br, t in next_templates(w, s):
        if t.kind != SYNC:
            continue
        for rule in w.rules.values():
            for sigma, lab, nb in firings(last, rule, t.payload, _params(w, s), s.binding):
                key = (rule.name, lab)
                if key not in seen:
                    seen.add(key)
                    out.append((rule, sigma, lab, nb, br))
    return out


def _fire(e: Execution, sid: int, label: Fact) -> Execution:
    s = e.bundle.strand(sid)
    opts = [o for o in sync_options(e, sid) if o[2] == label]
    if not opts:
        raise IncompatibleStep(f"strand {sid}: no enabled rule with label {label}")
    rule, sigma, lab, nb, _ = opts[0]
    w = e.world
    i = len(s.nodes)
    branches = [br for br, t in next_templates(w, s) if t.kind == SYNC
                and t.match(Event(SYNC, lab), _params(w, s), s.binding) is not None]
    bundle, s = _add_node(e.bundle, s, Event(SYNC, lab), branches, nb, False)
    comp = e.computation.extend(rule, sigma)
    k = len(comp.steps) - 1
    e = e.replace(bundle=bundle, computation=comp, phi=e.phi + (((sid, i), k),))
    return e.replace(trace=_record(e, "sync", s.principal, (sid, i), lab, f" phi={k}"))


def reception_matches(e: Execution, s: StrandRec, msg: Term) -> Tuple[List[str], Optional[Substitution]]:
    key = ("recv", s.role, s.nodes, s.branches, msg)
    c = e.world.cache
    if key not in c:
        c[key] = _reception_matches(e, s, msg)
    return c[key]


def _reception_matches(e: Execution, s: StrandRec, msg: Term):
    w = e.world
    params = _params(w, s)
    branches, binding = [], None
    for br, t in next_templates(w, s):
        if t.kind != RECV:
            continue
        nb = t.match(Event(RECV, msg), params, s.binding)
        if nb is not None and (binding is None or nb == binding):
            branches.append(br)
            binding = nb
    return branches, binding


def role_first_match(world: World, role_name: str, msg: Term):
    """``(branches, binding, principal)`` for a new strand of ``role_name``
    opening with reception of ``msg``, or None."""
    key = ("first", role_name, msg)
    if key not in world.cache:
        world.cache[key] = _role_first_match(world, role_name, msg)
    return world.cache[key]


def _role_first_match(world: World, role_name: str, msg: Term):
    role = world.protocol.roles[role_name]
    branches, binding = [], None
    for br, seq in role.branches.items():
        t = seq[0]
        if t.kind != RECV:
            continue
        nb = t.match(Event(RECV, msg), role.params, IDENTITY)
        if nb is not None and (binding is None or nb == binding):
            branches.append(br)
            binding = nb
    if not branches:
        return None
    if any(p not in binding.atom_map for p in role.params):
        return None
    principal = None if role.principal_param is None else binding.map_atom(role.principal_param)
    return branches, binding, principal


def support(e: Execution, msg: Term) -> List[Tuple[Term, NodeRef]]:
    """A small set of observed transmissions from which ``msg`` is derivable."""
    k0 = e.world.initial_knowledge
    chosen = list(e.observed)
    for item in list(chosen):
        trial = [x for x in chosen if x is not item]
        if k0.with_terms(m for m, _ in trial).can_derive(msg):
            chosen = trial
    return chosen


def _deliver(e: Execution, msg: Term, target, source: Optional[NodeRef]) -> Execution:
    w = e.world
    pending = e.pending
    if source is not None:
        ev = e.bundle.event(source)
        src = e.bundle.strand(source[0])
        if ev.kind != SEND or ev.payload != msg or not src.regular:
            raise IncompatibleStep("source is not a transmission of this message")
        if src.gflags[source[1]] and source not in pending:
            raise IncompatibleStep("guaranteed transmission already delivered")
    elif not e.knowledge.can_derive(msg):
        raise IncompatibleStep(f"underivable message {render(msg)}")
    # resolve the recipient before touching the bundle
    if isinstance(target, int):
        s = e.bundle.strand(target)
        if not s.regular:
            raise IncompatibleStep("target must be a regular strand")
        branches, binding = reception_matches(e, s, msg)
        if not branches:
            raise IncompatibleStep(f"strand {target} cannot receive {render(msg)} next")
        new = None
    else:
        m = role_first_match(w, target, msg)
        if m is None:
            raise IncompatibleStep(f"role {target} cannot open by receiving {render(msg)}")
        branches, binding, principal = m
        new = (target, principal)
    bundle = e.bundle
    if source is None:
        sup = support(e, msg)
        bundle, adv = _new_strand(bundle, ADVERSARY, False, None, IDENTITY)
        edges = []
        for j, (m_, src_node) in enumerate(sup):
            bundle, adv = _add_node(bundle, adv, Event(RECV, m_), (), IDENTITY, False)
            edges.append((src_node, (adv.id, j)))
        bundle, adv = _add_node(bundle, adv, Event(SEND, msg), (), IDENTITY, False)
        source = (adv.id, len(adv.nodes) - 1)
        bundle = Bundle(bundle.strands, bundle.edges + tuple(edges))
        e = e.replace(bundle=bundle)
        e = e.replace(trace=_record(e, "adv", None, source, msg))
    if new is not None:
        bundle, s = _new_strand(bundle, new[0], True, new[1], binding)
        s = StrandRec(s.id, s.role, (), True, new[1], (), binding, ())
        bundle = Bundle(bundle.strands[:-1] + (s,), bundle.edges)
    i = len(s.nodes)
    bundle, s = _add_node(bundle, s, Event(RECV, msg), branches, binding, False)
    bundle = Bundle(bundle.strands, bundle.edges + ((source, (s.id, i)),))
    if source in pending:
        pending = tuple(p for p in pending if p != source)
    e = e.replace(bundle=bundle, pending=pending)
    e = e.replace(trace=_record(e, "recv", s.principal, (s.id, i), msg,
                                f" from {source[0]}#{source[1]}"))
    if s.principal is not None and not w.scenario.is_compliant(s.principal):
        e = e.replace(knowledge=e.knowledge.with_terms([msg]))
    return e


# --- progress ---------------------------------------------------------------------------

def _tails(e: Execution) -> List[StrandRec]:
    p = e.world.protocol
    return [s for s in e.bundle.strands
            if s.regular and s.nodes and role_continues(s, len(s.nodes) - 1, p)]


def openers(world: World, msg: Term) -> List[tuple]:
    """``(role, match)`` for every role that can open by receiving ``msg``."""
    key = ("open", msg)
    if key not in world.cache:
        world.cache[key] = [(r, m) for r in world.protocol.roles
                            if (m := role_first_match(world, r, msg)) is not None]
    return world.cache[key]


def _first_node_receivers(world: World, msg: Term) -> List[str]:
    return [r for r, _ in openers(world, msg)]


def waiting_receivers(e: Execution, msg: Term) -> List[int]:
    return [s.id for s in _tails(e) if reception_matches(e, s, msg)[0]]


def enabled_transmission_edges(e: Execution) -> set:
    w = e.world
    out = set()
    for s in _tails(e):
        i = len(s.nodes)
        for br, t in next_templates(w, s):
            if t.kind != SEND:
                continue
            ev = t.instantiate(s.binding)
            if not w.guaranteed(s.role, br, i, s.principal, _peer(t, s.binding)):
                continue
            if _first_node_receivers(w, ev.payload) or waiting_receivers(e, ev.payload):
                out.add(((s.id, i - 1), ev))
    return out


def enabled_state_edges(e: Execution) -> set:
    out = set()
    for s in _tails(e):
        for rule, sigma, lab, _, _ in sync_options(e, s.id):
            out.add(((s.id, len(s.nodes) - 1), rule.name, lab))
    return out


def guaranteed_delivery_holds(e: Execution) -> bool:
    b = e.bundle
    regular = {s.id for s in b.strands if s.regular}
    for s in b.strands:
        for i, g in enumerate(s.gflags):
            if g:
                succ = b.outgoing((s.id, i))
                reg = [m for m in succ if m[0] in regular]
                if len(reg) != 1:
                    return False
    return True


def is_stable(e: Execution) -> bool:
    return (not e.pending and guaranteed_delivery_holds(e)
            and not enabled_state_edges(e) and not enabled_transmission_edges(e))


@dataclass(frozen=True)
class Policy:
    """Stabilization order: state edges, then pending guaranteed
    deliveries, then guaranteed transmissions; lowest strand id first unless
    ``seed`` is given, in which case ties within a class are broken at random."""
    seed: Optional[int] = None
    budget: int = DEFAULT_BUDGET


def guaranteed_targets(e: Execution, msg: Term, bounded: bool = False) -> Tuple[list, bool]:
    """Regular recipients a pending guaranteed message may go to, in
    preference order, and whether a protocol role was excluded by a bound."""
    w = e.world
    waiting = [s for s in waiting_receivers(e, msg)
               if e.bundle.strand(s).role != LISTENER]
    fresh, blocked = [], False
    for r, m in openers(w, msg):
        if r == LISTENER or m[2] != w.designated(role_kind(r)):
            continue
        if bounded and count_role(e, role_kind(r)) >= w.scenario.bound(role_kind(r)):
            blocked = True
            continue
        fresh.append(r)
    targets = waiting + fresh
    if not targets and not blocked:
        targets = [LISTENER]
    return targets, blocked


def count_role(e: Execution, kind: str) -> int:
    return sum(1 for s in e.bundle.strands if s.regular and role_kind(s.role) == kind)


def stabilize(e: Execution, policy: Policy = Policy()) -> Execution:
    rng = random.Random(policy.seed) if policy.seed is not None else None

    def pick(items):
        items = sorted(items, key=lambda x: x[0])
        if rng is None:
            return items[0]
        return items[rng.randrange(len(items))]

    for _ in range(policy.budget):
        states = sorted(enabled_state_edges(e), key=lambda x: (x[0], x[1], str(x[2])))
        if states:
            n, _, lab = pick(states)
            e = step(e, Extend(n[0], Event(SYNC, lab)))
            continue
        if e.pending:
            src = pick([(p,) for p in e.pending])[0]
            msg = e.bundle.event(src).payload
            targets, _ = guaranteed_targets(e, msg)
            e = step(e, Deliver(msg, targets[0], src))
            continue
        trans = sorted(enabled_transmission_edges(e), key=lambda x: (x[0], render(x[1].payload)))
        if trans:
            n, ev = pick(trans)
            e = step(e, Extend(n[0], ev))
            continue
        if not guaranteed_delivery_holds(e):
            raise NonTerminating("guaranteed delivery cannot be restored")
        return e
    raise NonTerminating(f"no stable extension within {policy.budget} steps")


# --- choice generation ------------------------------------------------------------------

@dataclass
class ChoiceStats:
    bound_hits: int = 0


def candidate_pool(e: Execution) -> List[Term]:
    w = e.world
    pool = dict.fromkeys(w.shapes)
    for s in e.bundle.strands:
        for ev in s.nodes:
            if ev.kind == SEND:
                pool.setdefault(ev.payload)
    key = ("pool", e.knowledge.known)
    if key not in w.cache:
        w.cache[key] = sorted(e.knowledge.analyzed, key=render)
    for t in w.cache[key]:
        pool.setdefault(t)
    return list(pool)


def _direct_source(e: Execution, msg: Term, recipient) -> Optional[NodeRef]:
    """A non-guaranteed regular transmission of ``msg`` addressed to
    ``recipient``."""
    w = e.world
    for s in e.bundle.strands:
        if not s.regular:
            continue
        role = w.protocol.roles[s.role]
        for i, ev in enumerate(s.nodes):
            if ev.kind != SEND or ev.payload != msg or s.gflags[i]:
                continue
            t = role.branches[s.branches[0]][i]
            if _peer(t, s.binding) == recipient:
                return (s.id, i)
    return None


def choices(e: Execution, stats: Optional[ChoiceStats] = None) -> List[Choice]:
    """All steps available to the scheduler and adversary, within bounds."""
    w = e.world
    sc = w.scenario
    stats = stats if stats is not None else ChoiceStats()
    out: List[Choice] = []
    started = {s.binding.map_atom(Atom("sym_key", "K")) for s in e.bundle.strands if s.role == "initiator"}
    for i, p in enumerate(w.sessions):
        if p.K in started:
            continue
        if count_role(e, "initiator") >= sc.bound("initiator"):
            stats.bound_hits += 1
            continue
        out.append(StartStrand(i))
    for s in _tails(e):
        if s.role == LISTENER:
            continue
        seen = set()
        for br, t in next_templates(w, s):
            if t.kind == SEND:
                ev = t.instantiate(s.binding)
                if ev not in seen:
                    seen.add(ev)
                    out.append(Extend(s.id, ev))
        for rule, sigma, lab, _, _ in sync_options(e, s.id):
            ev = Event(SYNC, lab)
            if ev not in seen:
                seen.add(ev)
                out.append(Extend(s.id, ev))
    # resilient deliveries
    for src in e.pending:
        msg = e.bundle.event(src).payload
        targets, blocked = guaranteed_targets(e, msg, bounded=True)
        if blocked:
            stats.bound_hits += 1
        for t in targets:
            out.append(Deliver(msg, t, src))
    # adversary and ordinary network deliveries
    pool = candidate_pool(e)
    derivable = {}

    def can(m):
        if m not in derivable:
            derivable[m] = e.knowledge.can_derive(m)
        return derivable[m]

    for s in _tails(e):
        if s.role == LISTENER or not any(t.kind == RECV for _, t in next_templates(w, s)):
            continue
        for m in pool:
            if not reception_matches(e, s, m)[0]:
                continue
            src = _direct_source(e, m, s.principal)
            if src is not None:
                out.append(Deliver(m, s.id, src))
            elif can(m):
                out.append(Deliver(m, s.id, None))
    for m in pool:
        for r, fm in openers(w, m):
            kind = role_kind(r)
            if r == LISTENER or fm[2] != w.designated(kind):
                continue
            if count_role(e, kind) >= sc.bound(kind):
                stats.bound_hits += 1
                continue
            src = _direct_source(e, m, fm[2])
            if src is not None:
                out.append(Deliver(m, r, src))
            elif can(m):
                out.append(Deliver(m, r, None))
    return out


# --- simulation -------------------------------------------------------------------------

def _label_of_send(w: World, s: StrandRec, i: int) -> str:
    return w.protocol.roles[s.role].branches[s.branches[0]][i].label


def run_network(world: World, seed: int = 0) -> Execution:
    """Run every session over a passive network that loses only the message
    kinds listed in the scenario's ``drop``, until nothing more moves.
    Principals prefer the optimistic branch; interleaving is drawn from
    ``seed``.  The result need not be stable."""
    rng = random.Random(seed)
    e = initial_execution(world, seed)
    delivered = set()
    while True:
        acts = []
        for i, p in enumerate(world.sessions):
            if not any(s.role == "initiator" and s.binding.map_atom(Atom("sym_key", "K")) == p.K
                       for s in e.bundle.strands):
                acts.append(StartStrand(i))
        for s in _tails(e):
            nxt = next_templates(world, s)
            syncs = sync_options(e, s.id)
            if syncs:
                acts.append(Extend(s.id, Event(SYNC, syncs[0][2])))
                continue
            if any(t.kind == RECV for _, t in nxt):
                continue
            for br, t in nxt:
                if t.kind == SEND and not world.guaranteed(s.role, br, len(s.nodes), s.principal,
                                                            _peer(t, s.binding)):
                    acts.append(Extend(s.id, t.instantiate(s.binding)))
                    break
        for s in e.bundle.strands:
            if not s.regular:
                continue
            for i, ev in enumerate(s.nodes):
                if ev.kind != SEND or s.gflags[i] or (s.id, i) in delivered:
                    continue
                if _label_of_send(world, s, i) in world.scenario.drop:
                    continue
                t = world.protocol.roles[s.role].branches[s.branches[0]][i]
                peer = _peer(t, s.binding)
                tgt = [x for x in waiting_receivers(e, ev.payload)
                       if e.bundle.strand(x).principal == peer]
                if not tgt:
                    tgt = [r for r in world.protocol.roles if r != LISTENER
                           and (fm := role_first_match(world, r, ev.payload)) is not None
                           and fm[2] == peer and count_role(e, role_kind(r)) < world.scenario.bound(role_kind(r))]
                if tgt:
                    acts.append(Deliver(ev.payload, tgt[0], (s.id, i)))
        for src in e.pending:
            msg = e.bundle.event(src).payload
            acts.append(Deliver(msg, guaranteed_targets(e, msg)[0][0], src))
        if not acts:
            break
        act = acts[rng.randrange(len(acts))]
        if isinstance(act, Deliver) and act.source is not None:
            delivered.add(act.source)
        e = step(e, act)
    return e


def simulate(world: World, seed: int = 0, policy: Optional[Policy] = None) -> Execution:
    """``run_network`` followed by stabilization."""
    return stabilize(run_network(world, seed), policy or Policy())
