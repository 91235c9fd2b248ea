import math
import random

import pytest

from sleepytob import trace as T
from sleepytob.ga import HandleResult
from sleepytob.lmd import AsynchronyWindow, LmdInstance, VoteBook, support_lmd
from sleepytob.scenario import Scenario
from sleepytob.sim import run
from sleepytob.verify import verify_trace
from sleepytob.workload import random_tob_scenario

from conftest import chain


def test_votes_in_different_views_are_not_equivocation():
    book = VoteBook(eta=2)
    assert book.handle_vote(1, 3, chain(1), 0) is HandleResult.RECORDED
    assert book.handle_vote(1, 4, chain(2), 1) is HandleResult.RECORDED
    assert not book.equivocating(1, 4)


def test_same_view_conflict_is_equivocation():
    book = VoteBook(eta=2)
    book.handle_vote(1, 4, chain(1), 0)
    assert book.handle_vote(1, 4, chain(2), 1) is HandleResult.EQUIVOCATION_RECORDED
    assert book.handle_vote(1, 4, chain(3), 1) is HandleResult.IGNORED
    assert book.latest_unexpired(1, 5) is None


def test_latest_unexpired_examples():
    book = VoteBook(eta=2)
    book.handle_vote(1, 1, chain(1), 0)
    book.handle_vote(1, 3, chain(1, 3), 0)
    assert book.latest_unexpired(1, 4) == (chain(1, 3), 3)
    only_old = VoteBook(eta=2)
    only_old.handle_vote(1, 1, chain(1), 0)
    assert only_old.latest_unexpired(1, 4) is None
    eq = VoteBook(eta=2)
    eq.handle_vote(1, 4, chain(1, 4), 0)
    eq.handle_vote(1, 3, chain(5), 0)
    eq.handle_vote(1, 3, chain(6), 0)
    assert eq.latest_unexpired(1, 4) is None


def test_expired_vote_stays_in_book_but_not_in_tally():
    book = VoteBook(eta=1)
    book.handle_vote(1, 1, chain(1), 0)
    assert 1 in book.votes[1]
    assert support_lmd(book, chain(1), None, 3) == 0
    assert support_lmd(book, chain(1), None, 2) == 1


def test_evidence_ages_out_with_the_window():
    book = VoteBook(eta=1)
    book.handle_vote(1, 2, chain(1), 0)
    book.handle_vote(1, 2, chain(2), 0)
    book.handle_vote(1, 4, chain(3), 0)
    assert book.latest_unexpired(1, 3) is None
    assert book.latest_unexpired(1, 4) == (chain(3), 4)


def test_superseded_vote_leaves_the_snapshot_tally():
    book = VoteBook(eta=3)
    inst = LmdInstance((5, 0), book, started_at=21, delta=1)
    book.handle_vote(1, 4, chain(1), 20)  # received before the 2Δ snapshot
    inst.take_snapshot(22)
    inst.take_snapshot(23)
    assert inst.entries(2) == {1: chain(1)}
    book.handle_vote(1, 5, chain(1, 5), 24)  # later-view vote after the snapshot
    assert inst.entries(2) == {}
    assert inst.entries(None) == {1: chain(1, 5)}


def test_late_equivocator_is_excluded():
    book = VoteBook(eta=2)
    inst = LmdInstance((5, 0), book, started_at=0, delta=1)
    book.handle_vote(1, 5, chain(1), 0)
    book.handle_vote(2, 5, chain(1), 0)
    inst.take_snapshot(1)
    assert inst.highest_output(2) == chain(1)
    book.handle_vote(1, 5, chain(2), 3)
    assert inst.entries(1) == {2: chain(1)}
    assert inst.sender_count() == 2  # the equivocator still counts in S


def test_expire_reports_dropped_latest_votes():
    book = VoteBook(eta=1)
    book.handle_vote(1, 1, chain(1), 0)
    book.handle_vote(2, 1, chain(1), 0)
    book.handle_vote(2, 2, chain(1, 2), 0)
    assert book.expire(2) == [(1, 1)]
    assert 1 not in book.votes[2]


def test_eta_zero_matches_plain_support():
    book = VoteBook(eta=0)
    book.handle_vote(1, 3, chain(1), 0)
    book.handle_vote(2, 2, chain(1), 0)
    assert support_lmd(book, chain(1), None, 3) == 1


def test_window():
    w = AsynchronyWindow(5, 2)
    assert w.protected_views(5) and w.protected_views(9)
    assert not w.protected_views(6) and not w.protected_views(8)
    with pytest.raises(ValueError):
        AsynchronyWindow(-1, 2)
    with pytest.raises(ValueError):
        VoteBook(eta=-1)


def _events_after_header(trace):
    return [e.to_json() for e in list(trace)[1:]]


def test_eta_zero_trace_equals_tob1():
    rng = random.Random(3)
    for _ in range(15):
        base = random_tob_scenario(rng, "TOB1", views=8)
        lmd = Scenario(**{**base.to_dict(), "protocol": "TOB1_LMD", "eta": 0, "asynchrony": None})
        a, b = run(base), run(lmd)
        assert _events_after_header(a) == _events_after_header(b)


@pytest.mark.parametrize("eta", [1, 3, math.inf])
def test_lmd_synchronous_runs_are_clean(eta):
    rng = random.Random(eta if eta != math.inf else 99)
    for _ in range(20):
        sc = random_tob_scenario(rng, "TOB1_LMD", views=8, eta=eta)
        assert verify_trace(run(sc)) == []


def test_expiry_events_only_with_positive_eta():
    sc = Scenario(n=5, delta=1, protocol="TOB1_LMD", horizon=60, eta=2, sleep=((4, 10, 40),))
    tr = run(sc)
    assert tr.of_kind(T.VOTE_EXPIRED) and tr.of_kind(T.VOTE_SUPERSEDED)
    tr0 = run(Scenario(n=5, delta=1, protocol="TOB1_LMD", horizon=60, eta=0, sleep=((4, 10, 40),)))
    assert not tr0.of_kind(T.VOTE_EXPIRED, T.VOTE_SUPERSEDED)
