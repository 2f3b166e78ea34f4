import random

import pytest
from hypothesis import given, settings, strategies as st

from strandmsr.checker import check_balance, check_progress
from strandmsr.executor import (Deliver, Extend, IncompatibleStep, NonTerminating, Policy,
                                StartStrand, check_compatibility, choices, empty_execution,
                                enabled_state_edges, enabled_transmission_edges, initial_execution,
                                is_stable, make_world, run_network, simulate, stabilize, step)
from strandmsr.scenario import Scenario
from strandmsr.state import fact, run_computation
from strandmsr.strands import SEND, SYNC, Event
from strandmsr.terms import name
from strandmsr.wang import messages

A, B, T = name("A"), name("B"), name("T")
WORLD = make_world(Scenario())
W = messages(WORLD.sessions[0])


def started():
    return step(initial_execution(WORLD), StartStrand(0))


def deposits(e):
    return sorted((f.predicate, f.args[0].id) for f in e.computation.last.facts()
                  if f.predicate in ("eor", "eoo", "aborted") and f.args[0] != T)


def outcome(e):
    return tuple(deposits(e)), tuple(sorted(f.predicate for f in e.computation.last.facts()
                                           if f.args[0] == T))


# --- compatibility -----------------------------------------------------------------------

def test_empty_execution_is_compatible():
    assert check_compatibility(empty_execution()) == []


def test_happy_path_is_compatible_and_stable():
    e = simulate(WORLD, seed=7)
    assert check_compatibility(e) == []
    assert is_stable(e)
    assert deposits(e) == [("eoo", "B"), ("eor", "A")]
    assert enabled_transmission_edges(e) == set() and enabled_state_edges(e) == set()


def test_deposit_order_is_free_across_principals():
    # The two deposits are causally unordered, so either computation order fits.
    e = simulate(WORLD, seed=7)
    c = e.computation
    rev = run_computation(c.first, tuple(reversed(c.steps)))
    phi = {n: len(c.steps) - 1 - i for n, i in e.phi}
    e2 = e.replace(computation=rev, phi=tuple(sorted(phi.items())))
    assert check_compatibility(e2) == []


def test_reordering_causally_ordered_transitions_is_reported():
    e = simulate(make_world(Scenario(drop=("keys",))), seed=0)
    c = e.computation
    names = [r.name for r, _ in c.steps]
    i, j = names.index("rcvr"), names.index("depEOO")
    steps = list(c.steps)
    steps[i], steps[j] = steps[j], steps[i]
    phi = {n: {i: j, j: i}.get(k, k) for n, k in e.phi}
    e2 = e.replace(computation=run_computation(c.first, steps), phi=tuple(phi.items()))
    assert "order" in [v.condition for v in check_compatibility(e2)]


def test_phi_label_mismatch_is_reported():
    e = simulate(WORLD, seed=7)
    (a, ia), (b, ib) = e.phi
    e2 = e.replace(phi=((a, ib), (b, ia)))
    assert {v.condition for v in check_compatibility(e2)} == {"phi"}


# --- steps ---------------------------------------------------------------------------------

def test_deliver_first_message_to_fresh_responder():
    e = started()
    e = step(e, Deliver(W.MSG1, "responder", (0, 0)))
    resp = e.bundle.strand(1)
    assert resp.role == "responder" and len(resp.nodes) == 1
    assert check_compatibility(e) == []


def test_deposit_extends_computation_and_phi():
    e = started()
    e = step(e, Deliver(W.MSG1, "responder", (0, 0)))
    e = step(e, Extend(1, Event(SEND, W.EOR)))
    e = step(e, Deliver(W.EOR, 0, (1, 1)))
    e = step(e, Extend(0, Event(SEND, W.KR)))
    p = WORLD.sessions[0]
    lab = fact("depEOR", A, W.L, W.EOR, p.M, p.K, p.R)
    before = len(e.computation)
    e = step(e, Extend(0, Event(SYNC, lab)))
    assert len(e.computation) == before + 1
    assert e.phi_map[(0, 3)] == before
    assert check_compatibility(e) == []


def test_forged_signature_is_rejected():
    e = started()
    with pytest.raises(IncompatibleStep):
        step(e, Deliver(W.EOR, 0, None))


def test_out_of_role_transmission_is_rejected():
    with pytest.raises(IncompatibleStep):
        step(started(), Extend(0, Event(SEND, W.KR)))


def test_unenabled_sync_is_rejected():
    e = started()
    e = step(e, Extend(0, Event(SEND, W.ABRQ)))
    e = step(e, Deliver(W.ABRQ, "ttp_abort", (0, 1)))
    with pytest.raises(IncompatibleStep):
        step(e, Extend(1, Event(SYNC, fact("frcvr", T, W.L, W.EOR))))


# --- edges and stability --------------------------------------------------------------------

def test_initiator_at_height_one_has_abort_edge():
    e = started()
    assert not is_stable(e)
    edges = enabled_transmission_edges(e)
    assert ((0, 0), Event(SEND, W.ABRQ)) in edges


def test_undelivered_abort_request_blocks_stability():
    e = step(started(), Extend(0, Event(SEND, W.ABRQ)))
    assert e.pending == ((0, 1),)
    assert not is_stable(e)


def test_ttp_state_edges():
    e = step(started(), Extend(0, Event(SEND, W.ABRQ)))
    e = step(e, Deliver(W.ABRQ, "ttp_abort", (0, 1)))
    assert {r for _, r, _ in enabled_state_edges(e)} == {"abrt"}
    # After a recovery, the same request can only take the forced branch.
    w = make_world(Scenario(compliant=frozenset({A, T})))
    e = step(initial_execution(w), StartStrand(0))
    e = step(e, Deliver(W.RR, "ttp_recover", None))
    # The forged request is produced by an adversary strand, so T's strand is 2.
    assert e.bundle.strand(2).role == "ttp_recover"
    e = step(e, Extend(2, Event(SYNC, fact("rcvr", T, W.L, W.EOR))))
    e = step(e, Extend(0, Event(SEND, W.ABRQ)))
    e = step(e, Deliver(W.ABRQ, "ttp_abort", (0, 1)))
    sid = e.bundle.strands[-1].id
    assert {r for n, r, _ in enabled_state_edges(e) if n[0] == sid} == {"frcvr"}


def test_awaiting_reception_has_no_state_edge():
    e = step(started(), Deliver(W.MSG1, "responder", (0, 0)))
    assert not any(n[0] == 0 for n, _, _ in enabled_state_edges(e))


# --- stabilization ----------------------------------------------------------------------

def test_stabilize_lone_initiator_aborts():
    e0 = started()
    e = stabilize(e0)
    assert is_stable(e) and check_compatibility(e) == []
    assert [s.role for s in e.bundle.strands] == ["initiator", "ttp_abort"]
    assert e.bundle.strand(0).branch.startswith("early")
    assert deposits(e) == [("aborted", "A")]
    assert check_progress(e, WORLD.scenario, e0).holds


def test_stabilize_lost_receipt_recovers_or_aborts():
    e = started()
    e = step(e, Deliver(W.MSG1, "responder", (0, 0)))
    e0 = step(e, Extend(1, Event(SEND, W.EOR)))
    seen = set()
    for seed in range(20):
        e = stabilize(e0, Policy(seed=seed))
        assert is_stable(e)
        assert check_balance(e, WORLD.scenario).holds
        assert check_progress(e, WORLD.scenario, e0).holds
        seen.add(tuple(deposits(e)))
    assert ((("eoo", "B"), ("eor", "A"))) in seen
    assert seen <= {(("eoo", "B"), ("eor", "A")), (("aborted", "A"), ("aborted", "B"))}


def test_stabilize_is_a_fixpoint_on_stable_executions():
    e = simulate(WORLD, seed=1)
    assert stabilize(e) is e


def test_stabilize_budget():
    with pytest.raises(NonTerminating):
        stabilize(started(), Policy(budget=2))


@pytest.mark.parametrize("drop, n_outcomes", [((), 1), (("eor",), 2), (("keys",), 1),
                                               (("msg1",), 1)])
def test_stabilization_order_keeps_balance(drop, n_outcomes):
    # With the receipt lost, A's abort and B's recovery race at the TTP.
    w = make_world(Scenario(drop=drop))
    base = run_network(w, seed=0)
    outs = set()
    for s in range(20):
        e = stabilize(base, Policy(seed=s))
        assert check_balance(e, w.scenario).holds
        outs.add(outcome(e))
    assert len(outs) == n_outcomes


@pytest.mark.parametrize("drop, expected", [
    ((), [("eoo", "B"), ("eor", "A")]),
    (("eor",), [("aborted", "A"), ("aborted", "B")]),
    (("keys",), [("eoo", "B"), ("eor", "A")]),
    (("msg1",), [("aborted", "A")]),
])
def test_simulated_paths(drop, expected):
    e = simulate(make_world(Scenario(drop=drop)), seed=0)
    assert is_stable(e) and check_compatibility(e) == []
    assert deposits(e) == expected


# --- properties ---------------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12))
def test_random_walks_stay_compatible(seed, n):
    rng = random.Random(seed)
    w = make_world(Scenario(compliant=frozenset({A, T})))
    e = initial_execution(w)
    for _ in range(n):
        opts = choices(e)
        if not opts:
            break
        try:
            nxt = step(e, opts[rng.randrange(len(opts))])
        except IncompatibleStep:
            continue
        assert nxt.computation.states[:len(e.computation.states)] == e.computation.states
        for a, b in zip(e.bundle.strands, nxt.bundle.strands):
            assert b.nodes[:len(a.nodes)] == a.nodes
        e = nxt
        assert check_compatibility(e) == []
    s = stabilize(e)
    assert is_stable(s) and check_compatibility(s) == []


def test_trace_determinism():
    w = make_world(Scenario(drop=("eor",)))
    assert simulate(w, seed=5).trace_text() == simulate(make_world(Scenario(drop=("eor",))),
                                                          seed=5).trace_text()
