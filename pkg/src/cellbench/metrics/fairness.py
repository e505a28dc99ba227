"""Throughput fairness index."""

from __future__ import annotations

import math
from collections.abc import Sequence
from fractions import Fraction


def fairness_index(measured: Sequence[float], ideal: Sequence[float]):
    """Jain's index over the relative allocations ``measured[i] / ideal[i]``.

    Exact when every input is an int or Fraction; float otherwise.
    """
    if len(measured) != len(ideal):
        raise ValueError("measured and ideal allocations differ in length")
    if not measured:
        raise ValueError("fairness of an empty allocation is undefined")
    exact = all(isinstance(v, (int, Fraction)) for v in (*measured, *ideal))
    xs = []
    for t, t_hat in zip(measured, ideal):
        if t_hat <= 0:
            raise ValueError(f"ideal allocation must be > 0, got {t_hat}")
        if t < 0:
            raise ValueError(f"measured allocation must be >= 0, got {t}")
        xs.append(Fraction(t) / Fraction(t_hat) if exact else t / t_hat)
    n = len(xs)
    if exact:
        sq = sum(x * x for x in xs)
        return Fraction(0) if sq == 0 else sum(xs) ** 2 / (n * sq)
    sq = math.fsum(x * x for x in xs)
    if sq == 0:
        return 0.0
    return math.fsum(xs) ** 2 / (n * sq)


def mean_fairness(indices: Sequence[float]) -> float:
    if not indices:
        raise ValueError("mean fairness needs at least one run")
    if all(isinstance(f, (int, Fraction)) for f in indices):
        return sum(Fraction(f) for f in indices) / len(indices)
    return math.fsum(indices) / len(indices)
