"""Cycle-accurate simulator of the scanchain transform datapath.

The machine holds one text block plus its end marker in a register chain of
N+1 byte slots. Work is scheduled in fixed 6-cycle groups, one group per
loaded character:

    load_shift    shift the chain one slot, insert the new character at the
                  entry end; one byte of the previous block's transform is
                  produced at the output in the same cycle
    find_marker   priority-encode the end-marker position in the active region
    count_le      popcount of (byte <= c) over the slots before the marker
    count_lt      popcount of (byte < c) from the marker to the region end
    place_char    rank = cursor + count_le + count_lt; write c at the marker
    place_marker  close the gap by shifting the sub-range down one slot and
                  write the marker at the rank position

Characters are consumed in reverse text order, so each group performs exactly
one right-to-left insertion pass of the software algorithm; after every
place_marker the active region byte-equals the software stepper's buffer.
A block of N characters therefore costs exactly 6*N cycles regardless of
content.

The very first load_shift of a block also materializes the end marker in the
slot behind the new character, so the marker never costs a load slot. On the
output side the marker is not a wire byte either: the final rank register
already names its position, and the drain queue carries the remaining N bytes
out at one byte per load_shift of the following block. With blocks streamed
back to back the machine sustains one byte in and one byte out every six
cycles. After the last block a flush drains the queue at one byte per cycle.

The two-stage popcount mode (default on) mirrors splitting each count into
two partial sums that are combined on the following cycle; final results and
cycle counts are identical with the mode off.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence, TextIO

import numpy as np

from .core import SENTINEL
from .errors import (
    BlockSizeMismatch,
    InvalidConfig,
    MultipleMarkers,
    NoMarker,
    ProtocolViolation,
    SentinelInPayload,
)

CYCLES_PER_CHAR = 6


class Phase(enum.Enum):
    LOAD_SHIFT = "load_shift"
    FIND_MARKER = "find_marker"
    COUNT_LE = "count_le"
    COUNT_LT = "count_lt"
    PLACE_CHAR = "place_char"
    PLACE_MARKER = "place_marker"


PHASE_ORDER = tuple(Phase)


@dataclass(frozen=True)
class BlockConfig:
    """Geometry of one simulator instance: N text bytes per block."""

    block_size: int
    two_stage_popcount: bool = True

    def __post_init__(self) -> None:
        if self.block_size < 1:
            raise InvalidConfig(f"block size must be >= 1, got {self.block_size}")

    @property
    def chain_capacity(self) -> int:
        return self.block_size + 1


class CompareVectors(NamedTuple):
    """Combinational comparator outputs for every chain slot."""

    eq: np.ndarray  # slot holds the end marker
    le: np.ndarray  # slot byte <= c
    lt: np.ndarray  # slot byte < c


def comparator_bank(chain, c: int) -> CompareVectors:
    """Compare every chain slot against the candidate byte c in parallel."""
    if c == SENTINEL:
        raise ValueError("comparand must not be the reserved end marker")
    arr = np.asarray(bytearray(chain) if isinstance(chain, (bytes, bytearray)) else chain,
                     dtype=np.uint8)
    return CompareVectors(eq=arr == SENTINEL, le=arr <= c, lt=arr < c)


def encode_marker_position(eq, active_lo: int, active_hi: int) -> int:
    """Priority-encode the single end-marker bit within [active_lo, active_hi]."""
    bits = np.asarray(eq, dtype=bool)
    hits = np.flatnonzero(bits[active_lo : active_hi + 1])
    if hits.size == 0:
        raise NoMarker(f"no marker bit in [{active_lo}, {active_hi}]")
    if hits.size > 1:
        raise MultipleMarkers(f"{hits.size} marker bits in [{active_lo}, {active_hi}]")
    return active_lo + int(hits[0])


def popcount_two_stage(bits, lo: int, hi: int) -> tuple[int, int]:
    """Split popcount of bits[lo..hi] into two half-range partial sums.

    The halves are combined by the consumer on the following cycle; an empty
    range (lo == hi + 1) yields (0, 0).
    """
    if lo > hi + 1:
        raise ValueError(f"invalid popcount range [{lo}, {hi}]")
    if lo > hi:
        return 0, 0
    arr = np.asarray(bits, dtype=bool)
    mid = (lo + hi) // 2
    return (
        int(np.count_nonzero(arr[lo : mid + 1])),
        int(np.count_nonzero(arr[mid + 1 : hi + 1])),
    )


class SignalSnapshot(NamedTuple):
    """Datapath registers as visible after a tick; None means not yet valid.

    marker_pos and rank are reported as positions in the software buffer
    (cursor-relative), matching the stepper's StepTrace fields.
    """

    marker_pos: Optional[int]
    partial_le: Optional[tuple[int, int]]
    partial_lt: Optional[tuple[int, int]]
    count_le: Optional[int]
    count_lt: Optional[int]
    rank: Optional[int]


@dataclass(frozen=True)
class CycleEvents:
    """Externally visible activity of one clock tick."""

    cycle: int
    phase: str
    cursor: int
    consumed_input: Optional[int]
    emitted_output: Optional[int]
    signals: SignalSnapshot


def format_trace_line(ev: CycleEvents) -> str:
    """Render one tick in the line-oriented trace format."""

    def hx(v):
        return f"{v:02x}" if v is not None else "-"

    def num(v):
        return str(v) if v is not None else "-"

    sig = ev.signals
    return (
        f"cycle={ev.cycle} phase={ev.phase} s={ev.cursor} "
        f"in={hx(ev.consumed_input)} out={hx(ev.emitted_output)} "
        f"p={num(sig.marker_pos)} le={num(sig.count_le)} "
        f"lt={num(sig.count_lt)} r={num(sig.rank)}"
    )


class Simulator:
    """Architectural state of one scanchain instance.

    Drive it with tick() one cycle at a time, or use run_block / run_stream.
    Slot 0 is the entry end of the chain; after m loads the active region is
    chain[0..m] and maps onto software buffer positions [cursor..N], with
    cursor = N - m.
    """

    def __init__(self, config: BlockConfig):
        self.config = config
        n = config.chain_capacity
        self.chain = np.zeros(n, dtype=np.uint8)
        self.loaded = 0
        self.cycle_count = 0
        self.drain_queue: deque[int] = deque()
        self.trace_sink: Optional[TextIO] = None
        self._phase_idx = 0
        self._iter_active = False
        self._group_cursor = config.block_size
        self._finished: deque[tuple[bytes, int]] = deque()
        self._clear_signals()

    # -- observable state ---------------------------------------------------

    @property
    def phase(self) -> Phase:
        return PHASE_ORDER[self._phase_idx]

    @property
    def cursor(self) -> int:
        """Software buffer position of the most recently loaded character."""
        return self.config.block_size - self.loaded

    @property
    def marker_pos(self) -> Optional[int]:
        return self._mp_chain

    @property
    def rank(self) -> Optional[int]:
        return self._rank_chain

    def active_region(self) -> bytes:
        """Chain slots holding the block loaded so far (incl. the marker)."""
        return self.chain[: self.loaded + 1].tobytes()

    # -- per-cycle machinery --------------------------------------------------

    def _clear_signals(self) -> None:
        self._mp_chain: Optional[int] = None
        self._partial_le: Optional[tuple[int, int]] = None
        self._partial_lt: Optional[tuple[int, int]] = None
        self._count_le: Optional[int] = None
        self._count_lt: Optional[int] = None
        self._rank_chain: Optional[int] = None

    def _snapshot(self) -> SignalSnapshot:
        base = self._group_cursor
        return SignalSnapshot(
            marker_pos=None if self._mp_chain is None else base + self._mp_chain,
            partial_le=self._partial_le,
            partial_lt=self._partial_lt,
            count_le=self._count_le,
            count_lt=self._count_lt,
            rank=None if self._rank_chain is None else base + self._rank_chain,
        )

    def tick(self, input_byte: Optional[int] = None) -> CycleEvents:
        """Advance the machine by exactly one clock cycle.

        input_byte may only be supplied on load_shift cycles (the next
        character in reverse text order); pass None to stall or drain.
        """
        phase = self.phase
        consumed: Optional[int] = None
        emitted: Optional[int] = None

        if phase is Phase.LOAD_SHIFT:
            if self.loaded == self.config.block_size:
                # Previous block finished on the last place_marker tick; hand
                # its transform to the drain before this group begins.
                self._capture_block()
            self._clear_signals()
            self._iter_active = False
            if input_byte is not None:
                if input_byte == SENTINEL:
                    raise SentinelInPayload("0x00 cannot be loaded as a text byte")
                first = self.loaded == 0
                self.chain[1:] = self.chain[:-1].copy()
                self.chain[0] = input_byte
                if first:
                    self.chain[1] = SENTINEL
                self.loaded += 1
                self._iter_active = self.loaded >= 2
                consumed = input_byte
            self._group_cursor = self.config.block_size - self.loaded
            if self.drain_queue:
                emitted = self.drain_queue.popleft()
        else:
            if input_byte is not None:
                raise ProtocolViolation(f"input supplied during {phase.value}")
            if self._iter_active:
                self._execute_phase(phase)
            elif self.loaded == 0 and self.drain_queue:
                # End-of-stream flush: no block in flight, push pending
                # output at one byte per cycle.
                emitted = self.drain_queue.popleft()
            if phase is Phase.PLACE_MARKER and self.loaded > 0:
                self._finish_group()

        events = CycleEvents(
            cycle=self.cycle_count,
            phase=phase.value,
            cursor=self._group_cursor,
            consumed_input=consumed,
            emitted_output=emitted,
            signals=self._snapshot(),
        )
        if self.trace_sink is not None:
            self.trace_sink.write(format_trace_line(events) + "\n")
        self.cycle_count += 1
        self._phase_idx = (self._phase_idx + 1) % len(PHASE_ORDER)
        return events

    def _execute_phase(self, phase: Phase) -> None:
        c = int(self.chain[0])
        hi = self.loaded
        two_stage = self.config.two_stage_popcount
        if phase is Phase.FIND_MARKER:
            vecs = comparator_bank(self.chain[: hi + 1], c)
            self._mp_chain = encode_marker_position(vecs.eq, 1, hi)
        elif phase is Phase.COUNT_LE:
            vecs = comparator_bank(self.chain[: hi + 1], c)
            parts = popcount_two_stage(vecs.le, 1, self._mp_chain - 1)
            if two_stage:
                self._partial_le = parts
            else:
                self._count_le = parts[0] + parts[1]
        elif phase is Phase.COUNT_LT:
            if two_stage:
                self._count_le = self._partial_le[0] + self._partial_le[1]
            vecs = comparator_bank(self.chain[: hi + 1], c)
            parts = popcount_two_stage(vecs.lt, self._mp_chain, hi)
            if two_stage:
                self._partial_lt = parts
            else:
                self._count_lt = parts[0] + parts[1]
        elif phase is Phase.PLACE_CHAR:
            if two_stage:
                self._count_lt = self._partial_lt[0] + self._partial_lt[1]
            self._rank_chain = self._count_le + self._count_lt
            self.chain[self._mp_chain] = c
        elif phase is Phase.PLACE_MARKER:
            rk = self._rank_chain
            self.chain[:rk] = self.chain[1 : rk + 1].copy()
            self.chain[rk] = SENTINEL

    def _finish_group(self) -> None:
        # Every place_marker exit must leave exactly one marker in the
        # active region; anything else means corrupted state.
        region = self.chain[: self.loaded + 1]
        markers = int(np.count_nonzero(region == SENTINEL))
        if markers == 0:
            raise NoMarker("active region lost its end marker")
        if markers > 1:
            raise MultipleMarkers(f"active region holds {markers} end markers")

    def _capture_block(self) -> None:
        transform = self.active_region()
        marker_idx = transform.index(SENTINEL)
        self._finished.append((transform, marker_idx))
        # Wire bytes for the drain: the transform minus the in-band marker,
        # whose position is recoverable from the final rank register.
        self.drain_queue.extend(transform[:marker_idx])
        self.drain_queue.extend(transform[marker_idx + 1 :])
        self.loaded = 0
        self._iter_active = False

    # -- block-level drivers --------------------------------------------------

    def _feed_block(self, payload: bytes,
                    on_event: Optional[Callable[[CycleEvents], None]] = None) -> int:
        n = self.config.block_size
        if len(payload) != n:
            raise BlockSizeMismatch(f"payload is {len(payload)} bytes, config wants {n}")
        if SENTINEL in payload:
            raise SentinelInPayload("payload contains the reserved end marker byte")
        start = self.cycle_count
        for ch in reversed(payload):
            for phase_slot in range(CYCLES_PER_CHAR):
                ev = self.tick(ch if phase_slot == 0 else None)
                if on_event is not None:
                    on_event(ev)
        return self.cycle_count - start

    @property
    def _capture_pending(self) -> bool:
        return (self.loaded == self.config.block_size
                and self.phase is Phase.LOAD_SHIFT)

    def _flush(self, on_event: Optional[Callable[[CycleEvents], None]] = None) -> int:
        ticks = 0
        while self.drain_queue or self._capture_pending:
            ev = self.tick(None)
            if on_event is not None:
                on_event(ev)
            ticks += 1
        return ticks

    def _pop_finished(self) -> bytes:
        transform, _marker_idx = self._finished.popleft()
        return transform

    def run_block(self, payload: bytes,
                  on_event: Optional[Callable[[CycleEvents], None]] = None,
                  ) -> tuple[bytes, int]:
        """Transform one block, returning (transform, cycles attributed).

        The attributed count covers loading and computing the block and is
        always exactly 6*N; the trailing output flush is extra pipeline time
        that would overlap the next block when streaming.
        """
        cycles = self._feed_block(payload, on_event)
        self._flush(on_event)
        return self._pop_finished(), cycles

    def run_stream(self, payloads: Sequence[bytes],
                   on_event: Optional[Callable[[CycleEvents], None]] = None,
                   ) -> tuple[list[bytes], list[int]]:
        """Transform blocks back to back, overlapping each block's output
        with the next block's input. Returns per-block transforms and the
        per-block attributed cycle counts (6*N each)."""
        per_block = [self._feed_block(p, on_event) for p in payloads]
        self._flush(on_event)
        outputs = [self._pop_finished() for _ in payloads]
        return outputs, per_block


def new_simulator(config: BlockConfig) -> Simulator:
    """Fresh simulator instance: empty chain, load_shift phase, cycle 0."""
    return Simulator(config)


def throughput_model(freq_hz: float) -> float:
    """Sustained input rate in bytes per second at a given clock frequency.

    One byte is consumed (and one produced) every six cycles, so the model
    is exactly freq/6. Published figures for comparable designs sometimes
    quote higher rates; this function sticks to the architectural contract.
    """
    if freq_hz <= 0:
        raise ValueError("frequency must be positive")
    return freq_hz / CYCLES_PER_CHAR
