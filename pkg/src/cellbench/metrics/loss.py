"""Frame loss ratio and application goodput."""

from __future__ import annotations

from collections.abc import Iterable
from fractions import Fraction


def _ratio(num, den):
    if isinstance(num, int) and isinstance(den, int):
        return Fraction(num, den)
    return num / den


def frame_loss_ratio(input_count, output_count):
    """(input - output) / input, for frame counts or for rates."""
    if input_count <= 0:
        raise ValueError(f"input must be > 0, got {input_count}")
    if output_count < 0 or output_count > input_count:
        raise ValueError(f"output {output_count} outside 0..{input_count}")
    return _ratio(input_count - output_count, input_count)


def average_flr(runs: Iterable[tuple[float, float]]):
    """Aggregate FLR over repetitions as a ratio of sums (never a mean of ratios)."""
    runs = list(runs)
    if not runs:
        raise ValueError("no runs to average")
    total_in = sum(r[0] for r in runs)
    total_out = sum(r[1] for r in runs)
    for i, o in runs:
        if o > i or o < 0:
            raise ValueError(f"run output {o} exceeds input {i}")
    return frame_loss_ratio(total_in, total_out)


def application_goodput(received_frames: int, transmitted_frames: int):
    """Frames received / frames transmitted over one measurement interval.

    Callers count user data frames only; management and keep-alive frames stay out.
    """
    if transmitted_frames <= 0:
        raise ValueError(f"transmitted frames must be > 0, got {transmitted_frames}")
    if received_frames < 0 or received_frames > transmitted_frames:
        raise ValueError(f"received {received_frames} outside 0..{transmitted_frames}")
    return _ratio(received_frames, transmitted_frames)
