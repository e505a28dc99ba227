"""Frames, cells and AAL5 segmentation.

All time values are integer nanoseconds ("ticks").  Rates are converted to
per-cell times by rounding half-up so every implementation agrees exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

CELL_OCTETS = 53
CELL_PAYLOAD_OCTETS = 48
CELL_BITS = CELL_OCTETS * 8
AAL5_TRAILER_OCTETS = 8

TICKS_PER_SECOND = 10**9
PS_PER_SECOND = 10**12


class ServiceClass(enum.Enum):
    UBR = "UBR"
    CBR = "CBR"
    SIGNALING = "SIGNALING"


class TraceCorruptionError(RuntimeError):
    """Raised when a cell trace is internally inconsistent (a simulator bug)."""


def round_half_up(num: int | Fraction, den: int | Fraction = 1) -> int:
    """Round ``num / den`` to the nearest integer, ties away from zero for positives."""
    q = Fraction(num) / Fraction(den)
    if q < 0:
        return -round_half_up(-q)
    return int((2 * q.numerator + q.denominator) // (2 * q.denominator))


def cells_per_frame(payload_octets: int) -> int:
    if payload_octets < 1:
        raise ValueError(f"payload_octets must be >= 1, got {payload_octets}")
    return -(-(payload_octets + AAL5_TRAILER_OCTETS) // CELL_PAYLOAD_OCTETS)


@dataclass(frozen=True)
class LinkRate:
    """Raw line rate of a link in bits per second."""

    bits_per_second: int

    def __post_init__(self):
        if int(self.bits_per_second) != self.bits_per_second or self.bits_per_second <= 0:
            raise ValueError(f"link rate must be a positive integer, got {self.bits_per_second}")

    @property
    def cell_time(self) -> int:
        """Ticks needed to transmit one 53-octet cell."""
        return max(1, round_half_up(CELL_BITS * TICKS_PER_SECOND, self.bits_per_second))

    @property
    def cell_time_ps(self) -> int:
        return round_half_up(CELL_BITS * PS_PER_SECOND, self.bits_per_second)

    @property
    def cells_per_second(self) -> float:
        return self.bits_per_second / CELL_BITS

    def payload_capacity(self, payload_octets: int) -> float:
        """Largest effective (AAL payload) bit rate the link can carry for this frame size."""
        return cell_rate_to_effective_rate(self.cells_per_second, payload_octets)


@dataclass(frozen=True)
class Frame:
    frame_id: int
    vc_id: int
    payload_octets: int
    service_class: ServiceClass = ServiceClass.UBR

    def __post_init__(self):
        if self.payload_octets < 1:
            raise ValueError("payload_octets must be >= 1")

    @property
    def n_cells(self) -> int:
        return cells_per_frame(self.payload_octets)


@dataclass(frozen=True)
class Cell:
    vc_id: int
    frame_id: int
    seq_in_frame: int
    is_first: bool
    is_last: bool
    # AAL5 carries the payload length in the trailer of the last cell.
    frame_octets: int = 0


@dataclass(frozen=True)
class LossIndication:
    vc_id: int
    frame_id: int
    received_cells: int
    expected_cells: int | None


def segment_frame(payload_octets: int, vc_id: int = 0, frame_id: int = 0) -> list[Cell]:
    n = cells_per_frame(payload_octets)
    return [
        Cell(
            vc_id=vc_id,
            frame_id=frame_id,
            seq_in_frame=i,
            is_first=i == 0,
            is_last=i == n - 1,
            frame_octets=payload_octets if i == n - 1 else 0,
        )
        for i in range(n)
    ]


def reassemble(
    cells: list[Cell], service_class: ServiceClass = ServiceClass.UBR
) -> Frame | LossIndication:
    """Rebuild a frame from its delivered cells.

    Any missing cell yields a :class:`LossIndication`; partial frames count as lost.
    """
    if not cells:
        raise ValueError("cannot reassemble an empty cell list")
    frame_id, vc_id = cells[0].frame_id, cells[0].vc_id
    seen: set[int] = set()
    trailer = None
    for c in cells:
        if c.frame_id != frame_id or c.vc_id != vc_id:
            raise ValueError("cells belong to different frames")
        if c.seq_in_frame in seen:
            raise TraceCorruptionError(
                f"duplicate cell seq {c.seq_in_frame} in frame {frame_id}"
            )
        seen.add(c.seq_in_frame)
        if c.is_last:
            trailer = c.frame_octets
    expected = cells_per_frame(trailer) if trailer else None
    if expected is None or len(seen) != expected or seen != set(range(expected)):
        return LossIndication(vc_id, frame_id, len(seen), expected)
    return Frame(frame_id, vc_id, trailer, service_class)


def effective_rate_to_cell_rate(effective_bps: float, payload_octets: int) -> float:
    """Cells per second needed to carry ``effective_bps`` of AAL payload."""
    if effective_bps <= 0:
        raise ValueError(f"effective_bps must be > 0, got {effective_bps}")
    return effective_bps / (8 * payload_octets) * cells_per_frame(payload_octets)


def cell_rate_to_effective_rate(cells_per_second: float, payload_octets: int) -> float:
    if cells_per_second <= 0:
        raise ValueError(f"cells_per_second must be > 0, got {cells_per_second}")
    return cells_per_second / cells_per_frame(payload_octets) * 8 * payload_octets
