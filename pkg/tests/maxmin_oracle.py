"""Independent max-min oracle for tests: exact water filling plus the
bottleneck characterization that uniquely identifies the max-min allocation."""

import random
from fractions import Fraction


def _level_for_link(cap, frozen_load, free_demands):
    """Smallest water level t at which sum(min(d, t)) + frozen_load reaches cap.

    free_demands holds the demands (None = unlimited) of unfrozen flows on the link.
    Returns None when the link never saturates.
    """
    room = cap - frozen_load
    bounded = sorted(d for d in free_demands if d is not None)
    unlimited = sum(1 for d in free_demands if d is None)
    used = Fraction(0)
    count = len(free_demands)
    prev = Fraction(0)
    for d in bounded:
        # on [prev, d] every remaining flow rises with the level
        if used + count * (d - prev) >= room:
            return prev + (room - used) / count
        used += count * (d - prev)
        count -= 1
        prev = d
    if unlimited:
        return prev + (room - used) / unlimited
    return None


def oracle_max_min(demands, caps, routes):
    n = len(demands)
    caps = [Fraction(c) for c in caps]
    dem = [None if d is None else Fraction(d) for d in demands]
    rate = [None] * n
    for i in range(n):
        if dem[i] == 0:
            rate[i] = Fraction(0)
    while any(r is None for r in rate):
        free = [i for i in range(n) if rate[i] is None]
        best, bottleneck = None, None
        for link, cap in enumerate(caps):
            on = [i for i in free if link in routes[i]]
            if not on:
                continue
            frozen = sum(rate[i] for i in range(n) if rate[i] is not None and link in routes[i])
            t = _level_for_link(cap, frozen, [dem[i] for i in on])
            if t is not None and (best is None or t < best):
                best, bottleneck = t, link
        if best is None:
            for i in free:
                rate[i] = dem[i]
            break
        # flows whose demand is below the level stop at their demand
        satisfied = [i for i in free if dem[i] is not None and dem[i] <= best]
        if satisfied:
            for i in satisfied:
                rate[i] = dem[i]
            continue
        for i in free:
            if bottleneck in routes[i]:
                rate[i] = best
    return rate


def is_max_min(rate, demands, caps, routes):
    """Feasible, and every flow is demand-limited or has a saturated link on which it is maximal."""
    n = len(rate)
    load = [sum(rate[i] for i in range(n) if l in routes[i]) for l in range(len(caps))]
    if any(load[l] > caps[l] for l in range(len(caps))):
        return False
    for i in range(n):
        if demands[i] is not None and rate[i] > demands[i]:
            return False
        if demands[i] is not None and rate[i] == demands[i]:
            continue
        ok = any(
            load[l] == caps[l] and all(rate[j] <= rate[i] for j in range(n) if l in routes[j])
            for l in routes[i]
        )
        if not ok:
            return False
    return True


def _corpus(seed=20240601, size=100):
    rng = random.Random(seed)
    out = []
    for _ in range(size):
        n_links = rng.randint(1, 4)
        n_vcs = rng.randint(1, 6)
        caps = [rng.randint(1, 20) for _ in range(n_links)]
        demands = [None if rng.random() < 0.25 else rng.randint(0, 20) for _ in range(n_vcs)]
        routes = [sorted(rng.sample(range(n_links), rng.randint(1, n_links))) for _ in range(n_vcs)]
        out.append((demands, caps, routes))
    return out


CORPUS = _corpus()
