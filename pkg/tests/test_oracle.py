from sleepytob import oracle
from sleepytob.oracle import NEVER, Case


def test_arrival_vectors():
    vecs = oracle.arrival_vectors()
    assert len(vecs) == 22
    assert (NEVER, NEVER, NEVER) in vecs and (3, 3, NEVER) in vecs
    assert (1, 1, 2) in vecs and (1, 3, 2) not in vecs and (1, NEVER, 1) not in vecs


def test_canonical_form_is_a_fixed_point():
    vecs = oracle.arrival_vectors()
    arrivals = ((vecs[5], vecs[9]), (vecs[1], vecs[0]))
    c = oracle._canonical("AAA", arrivals)
    assert oracle._canonical("AAA", c) == c
    assert c <= arrivals


def test_silent_adversary_outputs_honest_input():
    silent = (NEVER,) * 3
    case = Case("AAA", ((silent, silent), (silent, silent)))
    outs = oracle.engine_outputs(case)
    assert outs == oracle.reference_outputs(case)
    assert all(outs[r][1] == {oracle.G, oracle.A} for r in oracle.HONEST)
    assert oracle.property_violations(case, outs) == []


def test_equivocating_sender_does_not_count():
    silent = (NEVER,) * 3
    both = (1, 1, 1)
    case = Case("AAB", ((both, both), (silent, (1, 1, 1))))
    outs = oracle.engine_outputs(case)
    assert outs == oracle.reference_outputs(case)
    # A has 2 of 5 senders, B has 2; only genesis reaches a majority
    assert all(outs[r][0] == {oracle.G} for r in oracle.HONEST)


def test_sampled_cases_agree_with_simulator():
    cases = list(oracle.enumerate_cases())
    for case in cases[:: len(cases) // 25]:
        trace, outs = oracle.simulate(case)
        assert outs == oracle.highest_of(oracle.engine_outputs(case))
