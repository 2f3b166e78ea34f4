"""Verdicts over executions: balance of deposited evidence, authentication
of deposits, invariants of TTP computations, progress, and the bounded
search for the abort-token reuse attack."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional

from .executor import (LISTENER, ChoiceStats, Execution, IncompatibleStep, choices,
                       initial_execution, is_stable, make_world, step)
from .scenario import Scenario
from .state import Computation, Fact, is_valid_computation
from .strands import SEND, SYNC, is_full_length
from .terms import Atom, Sig, Term, cat, sk
from .wang import TTP_RULE_NAMES, abort_request, label_parts, messages


class PreconditionUnmet(ValueError):
    pass


class NotGWComputation(ValueError):
    pass


class BoundExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Verdict:
    property: str
    holds: bool
    witness: Optional[Execution] = field(default=None, compare=False, repr=False)
    nodes: tuple = ()
    detail: str = ""

    def line(self) -> str:
        flag = "holds" if self.holds else "fails"
        ns = " ".join(f"{a}#{b}" for a, b in self.nodes)
        parts = [self.property, flag] + ([ns] if ns else []) + ([self.detail] if self.detail else [])
        return " ".join(parts)


# --- balance --------------------------------------------------------------------------

def _deposits(state, pred: str, who: Atom) -> List[Fact]:
    return [f for f in state.facts() if f.predicate == pred and f.args[0] == who]


def check_balance(e: Execution, sc: Scenario) -> Verdict:
    if not is_stable(e):
        raise PreconditionUnmet("balance is only claimed for stable executions")
    first, last = e.computation.first, e.computation.last
    A, B = sc.initiator, sc.responder
    for f in _deposits(last, "eoo", B):
        if first.multiplicity(f) == 0 and sc.is_compliant(A):
            if not any(g.args[1] == f.args[1] for g in _deposits(last, "eor", A)):
                return Verdict("balance", False, e, detail=f"clause 1: {f.predicate}(B) without eor(A)")
    for f in _deposits(last, "eor", A):
        if first.multiplicity(f) == 0 and sc.is_compliant(B):
            l = f.args[1]
            ok = any(g.args[1] == l for g in _deposits(last, "eoo", B))
            at = _abort_token(l, A)
            ok = ok or any(g.args[1] == l and g.args[2] == at for g in _deposits(last, "aborted", B))
            if not ok:
                return Verdict("balance", False, e, detail="clause 2: eor(A) without eoo(B) or aborted(B, AT)")
    return Verdict("balance", True, e)


def _abort_token(L: Term, A: Atom) -> Term:
    parts = label_parts(L)
    T = parts[2] if parts else A
    return Sig(abort_request(L, A), sk(T))


# --- authentication -----------------------------------------------------------------------

def _sync_nodes(e: Execution, pred: str, who: Atom):
    for s in e.bundle.strands:
        if not s.regular or s.principal != who:
            continue
        for i, ev in enumerate(s.nodes):
            if ev.kind == SYNC and ev.payload.predicate == pred:
                yield (s.id, i), ev.payload


def _sends(e: Execution, role_pred: Callable, msg_pred: Callable):
    for s in e.bundle.strands:
        if s.regular and role_pred(s):
            for i, ev in enumerate(s.nodes):
                if ev.kind == SEND and msg_pred(ev.payload):
                    yield s, i


def check_authentication(e: Execution, sc: Scenario) -> List[Verdict]:
    """Bounded verification of the authentication properties of deposits.
    Each verdict is vacuous when its compliance hypotheses fail."""
    A, B, T = sc.initiator, sc.responder, sc.ttp
    out = []
    # Hypotheses are on uncompromised signature keys; deposits are only
    # made on regular strands, so the depositing principal is compliant.
    a_ok, b_ok = sc.is_compliant(A), sc.is_compliant(B)
    at_ok = a_ok and sc.is_compliant(T)

    # L1.1: A's depEOR implies B sent the matching EOR from a responder strand of height >= 2
    bad = []
    if b_ok:
        for n, f in _sync_nodes(e, "depEOR", A):
            eor_ = f.args[2]
            if not any(True for _ in _sends(e, lambda s: s.role == "responder" and s.principal == B
                                             and len(s.nodes) >= 2, lambda m: m == eor_)):
                bad.append(n)
    out.append(Verdict("L1.1", not bad, e, tuple(bad)))

    # L1.2: B's deposits imply A's first node with the matching label
    bad = []
    if a_ok:
        for pred in ("depEOO", "depAT"):
            for n, f in _sync_nodes(e, pred, B):
                L = f.args[1]
                if not any(s.role == "initiator" and s.principal == A and s.nodes
                           and s.nodes[0].payload.left == L for s in e.bundle.strands if s.regular):
                    bad.append(n)
    out.append(Verdict("L1.2", not bad, e, tuple(bad)))

    # L2.1: A's depAT implies T completed a strand transmitting that AT
    bad = []
    if at_ok:
        for n, f in _sync_nodes(e, "depAT", A):
            at = f.args[2]
            if not any(True for _ in _sends(e, lambda s: s.principal == T and s.role.startswith("ttp"),
                                            lambda m: m == at)):
                bad.append(n)
    out.append(Verdict("L2.1", not bad, e, tuple(bad)))

    # L2.2a: B's depAT implies A transmitted its abort request
    # L2.2b: ... and T's state reflects the abort: some TTP strand for the
    # label recorded abrt or fabrt and transmitted the abort reply
    bad_a, bad_b = [], []
    if at_ok:
        for n, f in _sync_nodes(e, "depAT", B):
            L = f.args[1]
            w = _abort_request_for(L)
            if not any(True for _ in _sends(
                    e, lambda s: s.role == "initiator" and s.principal == A,
                    lambda m: getattr(m, "right", None) == w)):
                bad_a.append(n)
            if not _ttp_aborted(e, T, L):
                bad_b.append(n)
    out.append(Verdict("L2.2a", not bad_a, e, tuple(bad_a)))
    out.append(Verdict("L2.2b", not bad_b, e, tuple(bad_b)))

    # L2 final: B's depEOO implies A or T transmitted K ^ R
    bad = []
    if at_ok:
        for n, f in _sync_nodes(e, "depEOO", B):
            kr = _kr(f)
            if not any(True for _ in _sends(e, lambda s: s.principal in (A, T) and
                                            (s.role == "initiator" or s.role.startswith("ttp")),
                                            lambda m: m == kr)):
                bad.append(n)
    out.append(Verdict("L2.final", not bad, e, tuple(bad)))
    return out


def _abort_request_for(L: Term) -> Term:
    parts = label_parts(L)
    return abort_request(L, parts[0])


def _kr(f: Fact) -> Term:
    return cat(f.args[4], f.args[5])


def _ttp_aborted(e: Execution, T: Atom, L: Term) -> bool:
    for s in e.bundle.strands:
        if not (s.regular and s.principal == T and s.role.startswith("ttp")):
            continue
        fired = any(ev.kind == SYNC and ev.payload.predicate in ("abrt", "fabrt")
                    and ev.payload.args[1] == L for ev in s.nodes)
        if fired and s.nodes[-1].kind == SEND:
            return True
    return False


# --- TTP computation invariants ---------------------------------------------------------------

def check_gw_lemma5(c: Computation) -> List[Verdict]:
    if not is_valid_computation(c):
        raise NotGWComputation("transitions do not replay")
    for r, _ in c.steps:
        if r.name not in TTP_RULE_NAMES + ("depEOR", "depEOO", "depAT"):
            raise NotGWComputation(f"rule {r.name} is not a GW rule")
    first = c.first
    for f, n in first.items():
        if f.predicate in ("recovered", "aborted") or (f.predicate == "unseen" and n > 1):
            raise NotGWComputation("first state is not a GW initial state")
    ttps = {f.args[0] for f, _ in first.items() if f.predicate == "unseen"}
    ttps |= {r.instance(s)[1].args[0] for r, s in c.steps if r.name in TTP_RULE_NAMES}
    labels = c.labels
    bad = {k: [] for k in range(1, 8)}

    def keyset(state):
        return {(f.args[0], f.args[1]) for f in state.facts()
                if f.args[0] in ttps and f.predicate in ("unseen", "recovered", "aborted")}

    pairs = set()
    for st in c.states:
        pairs |= keyset(st)
    for p, l in pairs:
        for j, st in enumerate(c.states):
            tot = sum(n for f, n in st.items() if f.args[0] == p and len(f.args) > 1
                      and f.args[1] == l and f.predicate in ("unseen", "recovered", "aborted"))
            if tot > 1:
                bad[1].append(j)
            prior = [x for x in labels[:j] if x.args[0] == p and x.args[1] == l]
            rc = any(x.predicate == "rcvr" for x in prior)
            ab = any(x.predicate == "abrt" for x in prior)
            has_rec = any(f.predicate == "recovered" and f.args[0] == p and f.args[1] == l
                          for f in st.facts())
            has_ab = any(f.predicate == "aborted" and f.args[0] == p and f.args[1] == l
                         for f in st.facts())
            if has_rec != rc:
                bad[2].append(j)
            if has_ab != ab:
                bad[3].append(j)
            if rc and ab:
                bad[4].append(j)
            unseen = first.multiplicity(Fact("unseen", (p, l))) > 0
            if unseen and not (has_rec or has_ab or any(
                    f.predicate == "unseen" and f.args[0] == p and f.args[1] == l for f in st.facts())):
                bad[7].append(j)
    for j, x in enumerate(labels):
        if x.predicate not in ("frcvr", "fabrt"):
            continue
        need = "rcvr" if x.predicate == "frcvr" else "abrt"
        if not any(y.predicate == need and y.args[:2] == x.args[:2] for y in labels[:j]):
            bad[5 if need == "rcvr" else 6].append(j)
    names = {1: "conservation", 2: "recovered-iff-rcvr", 3: "aborted-iff-abrt",
             4: "rcvr-abrt-exclusive", 5: "frcvr-after-rcvr", 6: "fabrt-after-abrt",
             7: "ttp-enabled"}
    return [Verdict(f"lemma5.{k}:{names[k]}", not bad[k],
                    detail="" if not bad[k] else f"at transitions {sorted(set(bad[k]))}")
            for k in range(1, 8)]


# --- enumeration ---------------------------------------------------------------------------

def config_key(e: Execution):
    pend = set(e.pending)
    strands = Counter()
    for s in e.bundle.strands:
        if s.regular:
            pf = tuple(i for i in range(len(s.nodes)) if (s.id, i) in pend)
            strands[(s.role, s.principal, s.nodes, s.branches, pf)] += 1
    return (frozenset(strands.items()), e.computation.last, e.knowledge.known)


@dataclass
class Exploration:
    stable: list = field(default_factory=list)
    visited: int = 0
    bound_hits: int = 0

    def summary(self) -> str:
        return (f"visited {self.visited} configurations, {len(self.stable)} stable, "
                f"{self.bound_hits} choices cut by bounds")


def explore(sc: Scenario, on_visit: Optional[Callable[[Execution], None]] = None,
            result: Optional[Exploration] = None) -> Iterator[Execution]:
    """Depth-first search over all choices within the scenario's bounds.
    Configurations that agree on strands, pending deliveries, state and
    adversary knowledge are explored once; stable ones are yielded."""
    res = result if result is not None else Exploration()
    stats = ChoiceStats()
    w = make_world(sc)
    e0 = initial_execution(w)
    stack = [e0]
    seen = {config_key(e0)}
    while stack:
        e = stack.pop()
        res.visited += 1
        if on_visit is not None:
            on_visit(e)
        if is_stable(e):
            res.stable.append(e)
            yield e
        succ = []
        for c in choices(e, stats):
            try:
                e2 = step(e, c)
            except IncompatibleStep:
                continue
            k = config_key(e2)
            if k not in seen:
                seen.add(k)
                succ.append(e2)
        stack.extend(reversed(succ))
        res.bound_hits = stats.bound_hits


def enumerate_stable(sc: Scenario) -> Iterator[Execution]:
    return explore(sc)


# --- progress ------------------------------------------------------------------------------

def check_progress(e: Execution, sc: Scenario, before: Optional[Execution] = None) -> Verdict:
    """Compliant initiator and TTP strands of height at least 1 and
    compliant responder strands of height at least 2 are full length; with
    ``before``, strands new since ``before`` belong to T or are listeners."""
    proto = e.world.protocol
    bad = []
    for s in e.bundle.strands:
        if not s.regular or s.role == LISTENER or not sc.is_compliant(s.principal):
            continue
        need = 2 if s.role == "responder" else 1
        if len(s.nodes) >= need and not is_full_length(s, proto):
            bad.append((s.id, len(s.nodes) - 1))
    if before is not None:
        old = len(before.bundle.strands)
        for s in e.bundle.strands[old:]:
            if s.regular and s.role != LISTENER and s.principal != sc.ttp:
                bad.append((s.id, 0))
    return Verdict("progress", not bad, e, tuple(bad))


# --- attack search ------------------------------------------------------------------------

def attack_predicate(e: Execution, sc: Scenario) -> bool:
    """The responder side can both prove delivery and repudiate: the
    adversary derives the variant's abort evidence and the key release,
    while A has deposited its evidence of receipt."""
    for p in e.world.sessions:
        w = messages(p)
        if not any(f.predicate == "eor" and f.args[0] == p.A and f.args[1] == w.L
                   for f in e.computation.last.facts()):
            continue
        k = e.knowledge
        if k.can_derive(w.abort_evidence(sc.variant)) and k.can_derive(w.KR):
            return True
    return False


def check_attack(sc: Scenario) -> Verdict:
    """Search stable executions for the attack; ``holds`` means an attack
    was found.  The witness is the one with the shortest trace."""
    best = None
    res = Exploration()
    for e in explore(sc, result=res):
        if attack_predicate(e, sc):
            if best is None or (len(e.trace), e.trace_lines) < (len(best.trace), best.trace_lines):
                best = e
    if best is None:
        return Verdict("attack", False, None, detail=f"no attack within bounds; {res.summary()}")
    return Verdict("attack", True, best, detail=res.summary())
