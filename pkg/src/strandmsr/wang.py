"""Wang's optimistic fair exchange: messages, roles, state rules and initial
states, in the corrected form (countersigned abort token to the responder)
and the original form (bare abort request)."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from .state import Computation, MState, Rule, enabled, fact
from .strands import RECV, SEND, SYNC, NodeTemplate, Protocol, Role, Tree
from .terms import (Atom, Cat, Enc, Hash, Indet, Sig, Term, cat, name, nonce, pk, sk,
                    symkey, text)

CORRECTED, ORIGINAL = "corrected", "original"
VARIANTS = (CORRECTED, ORIGINAL)

# filler for single-part tagged messages such as ab_rq ^ h(L)
NIL = text("nil")


class DuplicateLabel(ValueError):
    pass


@dataclass(frozen=True)
class SessionParams:
    A: Atom
    B: Atom
    T: Atom
    M: Atom
    K: Atom
    R: Atom

    def __post_init__(self):
        sorts = [(self.A, "name"), (self.B, "name"), (self.T, "name"),
                 (self.M, "text"), (self.K, "sym_key"), (self.R, "nonce")]
        for a, s in sorts:
            if a.sort != s:
                raise ValueError(f"session parameter {a} should have sort {s}")

    @classmethod
    def default(cls, suffix: str = "") -> "SessionParams":
        return cls(name("A"), name("B"), name("T"), text("M" + suffix),
                   symkey("K" + suffix), nonce("R" + suffix))


# --- message constructors ---------------------------------------------------------

def label_of(A, B, T, hm, hk) -> Term:
    return cat(A, B, T, hm, hk)


def abort_request(L: Term, A: Term) -> Term:
    return Sig(Cat("ab_rq", Hash(L), NIL), sk(A))


def eoo(L: Term, EK: Term, A: Atom) -> Term:
    return Sig(Cat("eootag", Hash(L), EK), sk(A))


def eor(L: Term, EK: Term, B: Atom) -> Term:
    return Sig(Cat("eortag", Hash(L), EK), sk(B))


def enc_key(L: Term, K: Term, T: Atom, R: Term) -> Term:
    return Enc(Cat("keytag", Hash(L), K), pk(T), R)


def recovery_request(L, EK, EOO, EOR, B: Atom) -> Term:
    return Sig(cat(L, EK, EOO, EOR, tag="rc_rq"), sk(B))


def confirm_request(L, EOR, A: Atom) -> Term:
    return Sig(cat(L, EOR, tag="cf_rq"), sk(A))


@dataclass(frozen=True)
class WangMessages:
    L: Term
    EM: Term
    EK: Term
    EOO: Term
    EOR: Term
    AR: Term
    AT: Term
    RR: Term
    CF: Term
    CFT: Term
    KR: Term
    MSG1: Term
    ABRQ: Term
    RTOK: Term

    def abort_evidence(self, variant: str) -> Term:
        return self.AT if variant == CORRECTED else self.AR


def messages(p: SessionParams) -> WangMessages:
    EM = Enc(p.M, p.K)
    L = label_of(p.A, p.B, p.T, Hash(EM), Hash(p.K))
    EK = enc_key(L, p.K, p.T, p.R)
    EOO = eoo(L, EK, p.A)
    EOR = eor(L, EK, p.B)
    AR = abort_request(L, p.A)
    AT = Sig(AR, sk(p.T))
    RR = recovery_request(L, EK, EOO, EOR, p.B)
    CF = confirm_request(L, EOR, p.A)
    return WangMessages(L=L, EM=EM, EK=EK, EOO=EOO, EOR=EOR, AR=AR, AT=AT, RR=RR, CF=CF,
                        CFT=Sig(CF, sk(p.T)), KR=cat(p.K, p.R), MSG1=cat(L, EM, EK, EOO),
                        ABRQ=cat(L, AR), RTOK=cat(L, EOR))


# --- state rules ------------------------------------------------------------------

_p, _l, _e, _a = Indet("p"), Indet("l"), Indet("e"), Indet("a")
_m, _k, _r = Indet("m"), Indet("k"), Indet("r")

TTP_RULE_NAMES = ("rcvr", "rcvr_again", "abrt", "abrt_again", "frcvr", "fabrt")
DEPOSIT_RULE_NAMES = ("depEOR", "depEOO", "depAT")


def gw_rules() -> Dict[str, Rule]:
    rec = fact("recovered", _p, _l, _e)
    abt = fact("aborted", _p, _l, _a)
    uns = fact("unseen", _p, _l)
    rules = [
        Rule("rcvr", [uns], fact("rcvr", _p, _l, _e), [rec]),
        Rule("rcvr_again", [rec], fact("rcvr", _p, _l, _e), [rec]),
        Rule("abrt", [uns], fact("abrt", _p, _l, _a), [abt]),
        Rule("abrt_again", [abt], fact("abrt", _p, _l, _a), [abt]),
        Rule("frcvr", [rec], fact("frcvr", _p, _l, _e), [rec]),
        Rule("fabrt", [abt], fact("fabrt", _p, _l, _a), [abt]),
        Rule("depEOR", [], fact("depEOR", _p, _l, _e, _m, _k, _r),
             [fact("eor", _p, _l, _e, _m, _k, _r)]),
        Rule("depEOO", [], fact("depEOO", _p, _l, _e, _m, _k, _r),
             [fact("eoo", _p, _l, _e, _m, _k, _r)]),
        Rule("depAT", [], fact("depAT", _p, _l, _a), [abt]),
    ]
    return {r.name: r for r in rules}


def ttp_rules() -> Dict[str, Rule]:
    rs = gw_rules()
    return {n: rs[n] for n in TTP_RULE_NAMES}


def gw_initial_state(labels: Iterable[Term], ttp: Atom = name("T")) -> MState:
    labels = list(labels)
    if len(set(labels)) != len(labels):
        raise DuplicateLabel("session labels must be pairwise distinct")
    return MState([fact("unseen", ttp, l) for l in labels])


def is_gw_initial(state: MState) -> bool:
    for f, n in state.items():
        if f.predicate in ("recovered", "aborted"):
            return False
        if f.predicate == "unseen" and n > 1:
            return False
    return True


# --- roles ------------------------------------------------------------------------

_A, _B, _T = name("A"), name("B"), name("T")
_M, _K, _R = text("M"), symkey("K"), nonce("R")
PARAMS = SessionParams(_A, _B, _T, _M, _K, _R)


def _send(t, peer, label):
    return NodeTemplate(SEND, t, peer=peer, label=label)


def _recv(t, peer, label, checks=()):
    return NodeTemplate(RECV, t, checks=tuple(checks), peer=peer, label=label)


def _sync(f):
    return NodeTemplate(SYNC, f, label=f.predicate)


def initiator_role() -> Role:
    w = messages(PARAMS)
    dep_eor = _sync(fact("depEOR", _A, w.L, w.EOR, _M, _K, _R))
    dep_at = _sync(fact("depAT", _A, w.L, w.AT))
    outcome = {"at": Tree([_recv(w.AT, _T, "at"), dep_at]),
               "tok": Tree([_recv(w.RTOK, _T, "rtok"), dep_eor])}
    tree = Tree([_send(w.MSG1, _B, "msg1")], {
        "eor": Tree([_recv(w.EOR, _B, "eor")], {
            "happy": Tree([_send(w.KR, _B, "keys"), dep_eor]),
            "abort": Tree([_send(w.ABRQ, _T, "abort_req")], outcome),
        }),
        "early": Tree([_send(w.ABRQ, _T, "abort_req")], outcome),
    })
    return Role.from_tree("initiator", tree, {_A, _B, _T, _M, _K, _R}, _A)


def responder_role(variant: str) -> Role:
    hm, hk, em, ek = Indet("hm"), Indet("hk"), Indet("em"), Indet("ek")
    m, k, r = Indet("m"), Indet("k"), Indet("r")
    L = label_of(_A, _B, _T, hm, hk)
    EOO = eoo(L, ek, _A)
    EOR = eor(L, ek, _B)
    AR = abort_request(L, _A)
    abort_msg = Sig(AR, sk(_T)) if variant == CORRECTED else AR
    checks = ((hk, Hash(k)), (em, Enc(m, k)), (ek, enc_key(L, k, _T, r)))
    dep_eoo = _sync(fact("depEOO", _B, L, EOO, m, k, r))
    tree = Tree([_recv(cat(L, em, ek, EOO), _A, "msg1"), _send(EOR, _A, "eor")], {
        "happy": Tree([_recv(cat(k, r), _A, "keys", checks), dep_eoo]),
        "recover": Tree([_send(recovery_request(L, ek, EOO, EOR, _B), _T, "recover_req")], {
            "keys": Tree([_recv(cat(k, r), _T, "keys", checks), dep_eoo]),
            "abort": Tree([_recv(abort_msg, _T, "abort_token"),
                           _sync(fact("depAT", _B, L, abort_msg))]),
        }),
    })
    return Role.from_tree("responder", tree, {_A, _B, _T}, _B)


def ttp_abort_role() -> Role:
    hm, hk, e = Indet("hm"), Indet("hk"), Indet("e")
    L = label_of(_A, _B, _T, hm, hk)
    AR = abort_request(L, _A)
    AT = Sig(AR, sk(_T))
    tree = Tree([_recv(cat(L, AR), _A, "abort_req")], {
        "abrt": Tree([_sync(fact("abrt", _T, L, AT)), _send(AT, _A, "at")]),
        "frcvr": Tree([_sync(fact("frcvr", _T, L, e)), _send(cat(L, e), _A, "rtok")]),
    })
    return Role.from_tree("ttp_abort", tree, {_A, _B, _T}, _T)


def ttp_recover_role(variant: str) -> Role:
    hm, k, r = Indet("hm"), Indet("k"), Indet("r")
    L = label_of(_A, _B, _T, hm, Hash(k))
    EK = enc_key(L, k, _T, r)
    EOO, EOR = eoo(L, EK, _A), eor(L, EK, _B)
    AR = abort_request(L, _A)
    AT = Sig(AR, sk(_T))
    tree = Tree([_recv(recovery_request(L, EK, EOO, EOR, _B), _B, "recover_req")], {
        "rcvr": Tree([_sync(fact("rcvr", _T, L, EOR)), _send(cat(k, r), _B, "keys")]),
        "fabrt": Tree([_sync(fact("fabrt", _T, L, AT)),
                       _send(AT if variant == CORRECTED else AR, _B, "abort_token")]),
    })
    return Role.from_tree("ttp_recover", tree, {_A, _B, _T}, _T)


def ttp_confirm_role(variant: str) -> Role:
    hm, hk, ek = Indet("hm"), Indet("hk"), Indet("ek")
    L = label_of(_A, _B, _T, hm, hk)
    EOR = eor(L, ek, _B)
    CF = confirm_request(L, EOR, _A)
    AR = abort_request(L, _A)
    AT = Sig(AR, sk(_T))
    tree = Tree([_recv(CF, _A, "confirm_req")], {
        "rcvr": Tree([_sync(fact("rcvr", _T, L, EOR)), _send(Sig(CF, sk(_T)), _A, "confirmed")]),
        "fabrt": Tree([_sync(fact("fabrt", _T, L, AT)),
                       _send(AT if variant == CORRECTED else AR, _A, "abort_token")]),
    })
    return Role.from_tree("ttp_confirm", tree, {_A, _B, _T}, _T)


def listener_role() -> Role:
    return Role.from_tree("listener", Tree([_recv(Indet("y"), None, "heard")]), set(), None)


TTP_ROLES = ("ttp_abort", "ttp_recover", "ttp_confirm")


def make_roles(variant: str = CORRECTED) -> Protocol:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    roles = [initiator_role(), responder_role(variant), ttp_abort_role(),
             ttp_recover_role(variant), ttp_confirm_role(variant), listener_role()]
    g = {("initiator", "eor/abort/at", 2), ("initiator", "eor/abort/tok", 2),
         ("initiator", "early/at", 1), ("initiator", "early/tok", 1),
         ("responder", "recover/keys", 2), ("responder", "recover/abort", 2)}
    for r in roles:
        if r.name in TTP_ROLES:
            for br in r.branches:
                g.add((r.name, br, 2))
    return Protocol({r.name: r for r in roles}, g)


def session_label(p: SessionParams) -> Term:
    return messages(p).L


def label_parts(L: Term):
    """``(A, B, T)`` of a session label, or None."""
    try:
        a, rest = L.left, L.right
        b, rest = rest.left, rest.right
        t = rest.left
    except AttributeError:
        return None
    if all(isinstance(x, Atom) and x.sort == "name" for x in (a, b, t)):
        return a, b, t
    return None


# --- random GW computations ------------------------------------------------------

def gw_firings(state: MState, sessions: Sequence[SessionParams]) -> List[Tuple[Rule, object]]:
    """Enabled ground firings of the GW rule set over the sessions' labels
    and evidence terms, in a fixed order."""
    rs = gw_rules()
    out = []
    for p in sessions:
        w = messages(p)
        labels = [fact(n, p.T, w.L, w.EOR) for n in ("rcvr", "frcvr")]
        labels += [fact(n, p.T, w.L, w.AT) for n in ("abrt", "fabrt")]
        for who in (p.A, p.B):
            labels.append(fact("depEOR", who, w.L, w.EOR, p.M, p.K, p.R))
            labels.append(fact("depEOO", who, w.L, w.EOO, p.M, p.K, p.R))
            labels += [fact("depAT", who, w.L, a) for a in (w.AT, w.AR)]
        for lab in labels:
            for rule in rs.values():
                if rule.label.predicate != lab.predicate:
                    continue
                sigma = rule.sigma_for(lab)
                if sigma is not None and enabled(state, rule, sigma):
                    out.append((rule, sigma))
    return out


def random_gw_computation(rng: random.Random, sessions: Sequence[SessionParams],
                          max_len: int = 30) -> Computation:
    """Fire uniformly chosen enabled GW rules from the initial state of
    ``sessions`` for up to ``max_len`` steps."""
    labels = [messages(p).L for p in sessions]
    if len(set(labels)) != len(labels):
        raise DuplicateLabel("session labels must be pairwise distinct")
    c = Computation((MState([fact("unseen", p.T, l) for p, l in zip(sessions, labels)]),))
    for _ in range(rng.randint(0, max_len)):
        opts = gw_firings(c.last, sessions)
        if not opts:
            break
        c = c.extend(*opts[rng.randrange(len(opts))])
    return c
