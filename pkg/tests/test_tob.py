import itertools
import random
from collections import defaultdict

import pytest

from sleepytob import trace as T
from sleepytob.core import GENESIS_LOG, Log, Message, MsgKind, SafetyViolation, proposal_block_id, vrf
from sleepytob.ga import NOT_PARTICIPATING
from sleepytob.scenario import Scenario
from sleepytob.sim import run
from sleepytob.tob_double import TobDoubleNode
from sleepytob.tob_single import ProposalBook, TobSingleNode, ViewClock, good_leader, select_vote
from sleepytob.verify import verify_trace
from sleepytob.workload import random_tob_scenario

from conftest import chain

SEED = 5


def proposal(sender, view, log, seed=SEED):
    return Message(MsgKind.PROPOSAL, sender, view, log, vrf=vrf(seed, sender, view))


def test_view_clock():
    c = ViewClock(delta=3, period=4)
    assert c.view_start(2) == 24
    assert c.locate(24) == (2, 0) and c.locate(27) == (2, 1) and c.locate(33) == (2, 3)
    assert c.locate(25) is None


# -- proposals and votes --------------------------------------------------------------------


def test_select_vote_prefers_highest_vrf():
    book = ProposalBook(SEED)
    lock = chain(1)
    senders = sorted(range(4), key=lambda s: vrf(SEED, s, 3))
    low, high = senders[0], senders[-1]
    book.add(proposal(low, 3, chain(1, 50)))
    book.add(proposal(high, 3, chain(1, 60)))
    assert select_vote(book, 3, lock) == chain(1, 60)


def test_select_vote_falls_back_to_lock():
    book = ProposalBook(SEED)
    book.add(proposal(0, 3, chain(2, 50)))
    assert select_vote(book, 3, chain(1)) == chain(1)


def test_equivocating_proposer_is_discarded():
    book = ProposalBook(SEED)
    top = max(range(4), key=lambda s: vrf(SEED, s, 3))
    other = min(range(4), key=lambda s: vrf(SEED, s, 3))
    assert book.add(proposal(top, 3, chain(1, 50)))
    assert book.add(proposal(top, 3, chain(1, 51)))
    assert not book.add(proposal(top, 3, chain(1, 52)))  # at most two forwarded
    book.add(proposal(other, 3, chain(1, 70)))
    assert select_vote(book, 3, chain(1)) == chain(1, 70)


def test_bad_vrf_is_dropped():
    book = ProposalBook(SEED)
    m = Message(MsgKind.PROPOSAL, 1, 0, chain(5), vrf=vrf(SEED, 1, 0) + 1)
    assert not book.add(m)


# -- node actions ---------------------------------------------------------------------------


def node(cls=TobSingleNode, n=4):
    return cls(0, n, 1, SEED, T.Trace())


def test_propose_extends_candidate():
    nd = node()
    msgs = nd.propose(2, 8, chain(9))
    assert msgs[0].log == chain(9, proposal_block_id(4, 2, 0))
    assert msgs[0].vrf == vrf(SEED, 0, 2)
    assert nd.propose(2, 8, NOT_PARTICIPATING) == []


def test_view_zero_proposal_extends_genesis():
    nd = node()
    msgs = nd.on_tick(0)
    assert msgs and msgs[0].log.prefix(0) == GENESIS_LOG and msgs[0].log.height == 1


def test_decide_highest_and_genesis():
    nd = node()
    nd.decide(1, 6, chain(1))
    assert nd.decided == chain(1)
    nd.decide(2, 10, None)  # nothing above genesis: vacuous decision
    assert nd.decided == chain(1)
    nd.decide(3, 14, NOT_PARTICIPATING)
    assert len(nd.decisions) == 2
    with pytest.raises(SafetyViolation):
        nd.decide(4, 18, chain(2))


def test_tob2_instance_layout():
    nd = node(TobDoubleNode)
    assert nd.instance_start((3, 1)) == 16 and nd.instance_start((3, 2)) == 18
    assert nd.instance_end((3, 2)) == 21
    assert list(nd.active_tags(0)) == [(0, 1), (0, 2)]
    assert nd.valid_round(1) and nd.valid_round(2) and not nd.valid_round(0)


# -- good leaders ----------------------------------------------------------------------------


def test_good_leader_all_honest_is_argmax():
    vals = range(7)
    top = max(vals, key=lambda v: vrf(SEED, v, 4))
    assert good_leader(SEED, 4, vals, []) == top


def test_good_leader_corrupted_top_is_none():
    vals = range(7)
    top = max(vals, key=lambda v: vrf(SEED, v, 4))
    assert good_leader(SEED, 4, [v for v in vals if v != top], [top]) is None


def test_good_leader_rank_enumeration():
    """Over every VRF ranking of h honest and f adversarial validators the top is
    honest in exactly h/(h+f) of them."""
    h, f = 3, 2
    perms = list(itertools.permutations(["H"] * h + ["B"] * f))
    assert sum(p[0] == "H" for p in perms) / len(perms) == pytest.approx(h / (h + f))
    rng = random.Random(0)
    hits = sum(good_leader(rng.getrandbits(32), 0, range(h), range(h, h + f)) is not None
               for _ in range(4000))
    assert hits / 4000 == pytest.approx(h / (h + f), abs=0.03)


# -- whole runs -------------------------------------------------------------------------------


def decisions_by_view(trace):
    out = defaultdict(dict)
    for e in trace.of_kind(T.DECIDED):
        out[e.payload["view"]][e.validator] = (e.tick, Log.from_json(e.payload["log"]))
    return out


@pytest.mark.parametrize("protocol,period,latency", [("TOB1", 4, 6), ("TOB2", 5, 4)])
def test_good_leader_latency(protocol, period, latency):
    d = 2
    sc = Scenario(n=5, delta=d, protocol=protocol, horizon=10 * period * d)
    tr = run(sc)
    assert verify_trace(tr) == []
    props = {e.payload["view"]: (e.tick, Log.from_json(e.payload["log"]))
             for e in tr.of_kind(T.PROPOSAL_SENT) if e.validator == good_leader(0, e.payload["view"], range(5), [])}
    dec = decisions_by_view(tr)
    t0, log = props[2]
    first = min(t for v in dec for t, lg in dec[v].values() if log.is_prefix_of(lg))
    assert first - t0 == latency * d


def test_one_vote_per_view_tob1_two_for_tob2():
    for protocol, per in (("TOB1", 1), ("TOB2", 2)):
        tr = run(Scenario(n=4, delta=1, protocol=protocol, horizon=60))
        counts = defaultdict(int)
        for e in tr.of_kind(T.VOTE_CAST):
            counts[(e.validator, e.payload["view"])] += 1
        assert set(counts.values()) == {per}


def test_sleeper_catches_up():
    sc = Scenario(n=5, delta=1, protocol="TOB1", horizon=80, sleep=((4, 10, 30),))
    tr = run(sc)
    assert verify_trace(tr) == []
    late = [Log.from_json(e.payload["log"]) for e in tr.of_kind(T.DECIDED) if e.validator == 4 and e.tick > 40]
    others = [Log.from_json(e.payload["log"]) for e in tr.of_kind(T.DECIDED) if e.validator == 0 and e.tick > 40]
    assert late and late[-1] == others[-1]


def _grade_outputs(trace):
    out = defaultdict(dict)  # (instance, grade) -> validator -> log
    for e in trace.of_kind(T.GA_OUTPUT):
        lg = e.payload["log"]
        out[(tuple(e.payload["instance"]), e.payload["grade"])][e.validator] = (
            None if lg is None else Log.from_json(lg))
    return out


def test_decide_lock_candidate_and_lock_induction():
    """On random compliant runs: a decision is extended by every lock and
    candidate of the same instance, and a lock shared by all grade-1
    participants is extended by every later lock."""
    rng = random.Random(11)
    for _ in range(40):
        sc = random_tob_scenario(rng, "TOB1", views=8)
        tr = run(sc)
        outs = _grade_outputs(tr)
        views = sorted({inst[0] for inst, _ in outs})
        for w in views:
            inst = (w, 0)
            decided = [lg for lg in outs.get((inst, 2), {}).values() if lg is not None]
            locks = outs.get((inst, 1), {})
            cands = outs.get((inst, 0), {})
            for d in decided:
                assert all(lk is not None and d.is_prefix_of(lk) for lk in locks.values())
            for lk in (x for x in locks.values() if x is not None):
                assert all(c is not None and lk.is_prefix_of(c) for c in cands.values())
            common = set(locks.values())
            if len(common) == 1 and None not in common and locks:
                lam = common.pop()
                for later in views:
                    if later > w:
                        for lk in outs.get(((later, 0), 1), {}).values():
                            assert lk is not None and lam.is_prefix_of(lk)
