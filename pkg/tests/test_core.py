import pytest
from hypothesis import given
from hypothesis import strategies as st

from sleepytob.core import (
    GENESIS_LOG,
    IncompatibleSet,
    Log,
    Message,
    MsgKind,
    common_prefix,
    compatible,
    derive_seed,
    highest,
    is_chain,
    is_prefix,
    proposal_block_id,
    vrf,
    vrf_leader,
)

from conftest import chain


def test_log_must_start_at_genesis():
    with pytest.raises(ValueError):
        Log((5, 6))
    with pytest.raises(ValueError):
        Log(())


def test_prefix_and_compatibility_examples():
    a, ab, ac = chain(1), chain(1, 2), chain(1, 3)
    assert is_prefix(GENESIS_LOG, ab)
    assert is_prefix(a, ab) and not is_prefix(ab, a)
    assert compatible(a, ab)
    assert not compatible(ab, ac)
    assert ab.height == 2 and ab.tip == 2
    assert ab.prefix(1) == a


def test_highest_examples():
    assert highest([chain(1), chain(1, 2), GENESIS_LOG]) == chain(1, 2)
    with pytest.raises(IncompatibleSet):
        highest([chain(1, 2), chain(1, 3)])
    with pytest.raises(ValueError):
        highest([])
    assert is_chain([]) and not is_chain([chain(1), chain(2)])


def test_common_prefix():
    assert common_prefix([chain(1, 2, 3), chain(1, 2, 4), chain(1, 2)]) == chain(1, 2)
    assert common_prefix([chain(1), chain(2)]) == GENESIS_LOG


def test_json_round_trip():
    lg = chain(4, 9)
    assert Log.from_json(lg.to_json()) == lg


def test_message_validation():
    with pytest.raises(ValueError):
        Message(MsgKind.PROPOSAL, 0, 0, GENESIS_LOG)  # no VRF
    with pytest.raises(ValueError):
        Message(MsgKind.GA_INPUT, 0, 0, GENESIS_LOG, vrf=3)
    with pytest.raises(ValueError):
        Message(MsgKind.GA_INPUT, 0, -1, GENESIS_LOG)
    m = Message(MsgKind.GA_INPUT, 2, 3, chain(1), round=1)
    assert m.to_json() == {"kind": "GA_INPUT", "sender": 2, "view": 3, "round": 1, "log": [0, 1]}


def test_vrf_is_deterministic_and_seed_dependent():
    assert vrf(1, 2, 3) == vrf(1, 2, 3)
    assert vrf(1, 2, 3) != vrf(2, 2, 3)
    assert 0 <= vrf(7, 0, 0) < 1 << 64
    assert derive_seed(1, "a") != derive_seed(1, "b")


def test_vrf_leader_picks_max():
    vals = range(6)
    leader = vrf_leader(11, vals, 4)
    assert vrf(11, leader, 4) == max(vrf(11, v, 4) for v in vals)
    assert vrf_leader(11, [], 4) is None


def test_proposal_block_ids_unique():
    ids = {proposal_block_id(7, view, p, var) for view in range(20) for p in range(7) for var in range(4)}
    assert len(ids) == 20 * 7 * 4
    assert 0 not in ids


# -- properties ----------------------------------------------------------------

paths = st.lists(st.integers(1, 3), max_size=5).map(lambda xs: Log((0,) + tuple(xs)))


@given(paths, paths, paths)
def test_prefix_is_a_partial_order(a, b, c):
    assert is_prefix(a, a)
    if is_prefix(a, b) and is_prefix(b, a):
        assert a == b
    if is_prefix(a, b) and is_prefix(b, c):
        assert is_prefix(a, c)


@given(paths, paths)
def test_compatible_is_symmetric(a, b):
    assert compatible(a, b) == compatible(b, a)


@given(st.lists(paths.filter(lambda lg: all(x == 1 for x in lg.blocks[1:])), min_size=1), st.randoms())
def test_highest_is_order_insensitive(logs, rnd):
    shuffled = list(logs)
    rnd.shuffle(shuffled)
    assert highest(logs) == highest(shuffled)


@given(st.lists(paths, min_size=1))
def test_common_prefix_is_extended_by_all(logs):
    cp = common_prefix(logs)
    assert all(is_prefix(cp, lg) for lg in logs)
