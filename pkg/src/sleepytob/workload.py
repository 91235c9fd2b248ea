"""Random and parametric scenario generators for batch runs."""

from __future__ import annotations

import random
from dataclasses import replace
from typing import Optional

from .scenario import Scenario, ScenarioError, validate
from .verify import compliance

LIBRARY = ("SILENT", "EQUIVOCATE_SPLIT", "WITHHOLD_MAX_DELAY")
LABELS = ("", "a", "a.b", "a.b.c", "a.c", "d", "d.e")


def _random_faults(rng: random.Random, n: int, delta: int, horizon: int, max_bad: int):
    """Byzantine set, scheduled corruptions and sleep intervals."""
    bad = rng.sample(range(n), rng.randint(0, max_bad))
    split = rng.randint(0, len(bad))
    byzantine = tuple(bad[:split])
    corruptions = tuple((v, rng.randint(0, horizon)) for v in bad[split:])
    sleep = []
    for v in range(n):
        if v in byzantine or rng.random() < 0.4:
            continue
        for _ in range(rng.randint(1, 2)):
            start = rng.randint(0, horizon)
            sleep.append((v, start, start + rng.randint(1, 6 * delta)))
    return byzantine, corruptions, tuple(sleep)


def random_ga_scenario(rng: random.Random, protocol: str, n: Optional[int] = None,
                       tries: int = 200) -> Scenario:
    """A single GA instance satisfying ``h > f`` over its duration."""
    for _ in range(tries):
        size = n if n is not None else rng.randint(4, 12)
        delta = rng.randint(1, 3)
        horizon = (3 if protocol == "GA2" else 5) * delta
        byzantine, corruptions, sleep = _random_faults(rng, size, delta, horizon, (size - 1) // 2)
        inputs = tuple((v, rng.choice(LABELS)) for v in range(size))
        sc = Scenario(n=size, delta=delta, protocol=protocol, horizon=horizon, seed=rng.getrandbits(32),
                      byzantine=byzantine, corruptions=corruptions, sleep=sleep, inputs=inputs,
                      adversary=rng.choice(LIBRARY), instrument=True)
        if compliance(sc)[0]:
            return sc
    raise RuntimeError("no compliant GA scenario found")


def random_tob_scenario(rng: random.Random, protocol: str, views: int = 10, tries: int = 200,
                        eta=0) -> Scenario:
    """A TOB run whose schedule satisfies the protocol's sleepy-model condition.

    ``eta`` only applies to ``TOB1_LMD``; with ``eta > 0`` the schedule must
    also satisfy the stale-vote condition of the expiration period.
    """
    period = 5 if protocol == "TOB2" else 4
    for _ in range(tries):
        n = rng.randint(4, 10)
        delta = rng.randint(1, 3)
        horizon = views * period * delta
        byzantine, corruptions, sleep = _random_faults(rng, n, delta, horizon, (n - 1) // 2)
        sc = Scenario(n=n, delta=delta, protocol=protocol, horizon=horizon, seed=rng.getrandbits(32),
                      byzantine=byzantine, corruptions=corruptions, sleep=sleep,
                      adversary=rng.choice(LIBRARY), eta=eta if protocol == "TOB1_LMD" else None)
        if compliance(sc)[0]:
            return sc
    raise RuntimeError("no compliant TOB scenario found")


# -- sweep axes -----------------------------------------------------------------------

AXES = ("participation", "corruption", "eta", "pi")


def apply_axis(base: Scenario, axis: str, value: str) -> Scenario:
    """``base`` with one sweep coordinate applied; raises ScenarioError if invalid.

    participation p: the last ``n - round(p * n)`` validators sleep for the
    whole run. corruption c: the last ``floor(c * n)`` validators are
    Byzantine from genesis. eta and pi overwrite the expiration period and
    the asynchrony window length.
    """
    n = base.n
    if axis == "participation":
        awake = round(float(value) * n)
        sleepers = range(awake, n)
        sleep = tuple(x for x in base.sleep if x[0] not in sleepers)
        sc = replace(base, sleep=sleep + tuple((v, 0, base.horizon + 1) for v in sleepers))
    elif axis == "corruption":
        k = int(float(value) * n + 1e-9)
        sc = replace(base, byzantine=tuple(range(n - k, n)),
                     corruptions=tuple(x for x in base.corruptions if x[0] < n - k))
    elif axis == "eta":
        sc = replace(base, eta=float("inf") if value == "inf" else int(value))
    elif axis == "pi":
        if base.asynchrony is None:
            raise ScenarioError("SEMANTIC_ERROR", "pi sweep needs an asynchrony window", field="pi")
        sc = replace(base, asynchrony=(base.asynchrony[0], int(value)))
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return validate(sc)
