"""Burrows-Wheeler transform core.

Two routes to the same transform: a brute-force rotation sort that serves as
the oracle everything else is checked against, and the insertion-based
in-place algorithm that works right to left through the text using a single
working buffer plus a handful of scalars. A per-iteration stepper exposes the
intermediate buffer states so the hardware simulator can be verified in
lockstep against it.

Byte 0x00 is reserved as the end marker: it is appended to every payload,
compares strictly below every payload byte, and travels in-band through the
transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import AlreadyDone, MalformedTransform, NoMarker, SentinelInPayload

SENTINEL = 0x00

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dep, but degrade politely
    njit = None


@dataclass(frozen=True)
class TextBlock:
    """A sentinel-free payload with the end marker logically appended.

    The transformable string has length ``n == len(payload) + 1``; its final
    byte is the marker.
    """

    payload: bytes

    def __post_init__(self) -> None:
        if SENTINEL in self.payload:
            raise SentinelInPayload(
                f"payload contains reserved byte 0x{SENTINEL:02x} "
                f"at offset {self.payload.index(SENTINEL)}"
            )

    @property
    def text(self) -> bytes:
        """Payload with the end marker appended (the string actually transformed)."""
        return self.payload + bytes([SENTINEL])

    @property
    def n(self) -> int:
        return len(self.payload) + 1


def attach_sentinel(payload: bytes) -> TextBlock:
    """Wrap a raw payload, appending the 0x00 end marker.

    Raises SentinelInPayload if the payload already contains 0x00.
    """
    return TextBlock(bytes(payload))


def bwt_reference(block: TextBlock) -> bytes:
    """Brute-force transform: sort all cyclic rotations, take last bytes.

    Quadratic in both time and memory. This is the oracle; keep it dumb.
    """
    s = block.text
    n = block.n
    doubled = s + s
    rotations = sorted(doubled[i : i + n] for i in range(n))
    return bytes(rot[-1] for rot in rotations)


def _insertion_kernel(buf, n):
    # Right-to-left insertion: each pass treats buf[s+1:] as the finished
    # transform of the shorter suffix and splices buf[s] into it. The marker
    # position itself is counted by the second scan; 0x00 < c always holds,
    # so the marker contributes one to the rank every pass.
    for s in range(n - 3, -1, -1):
        c = buf[s]
        r = s
        i = s + 1
        while buf[i] != 0:
            if buf[i] <= c:
                r += 1
            i += 1
        p = i
        while i < n:
            if buf[i] < c:
                r += 1
            i += 1
        buf[p] = c
        for j in range(s, r):
            buf[j] = buf[j + 1]
        buf[r] = 0


if njit is not None:
    _insertion_kernel_jit = njit(cache=True)(_insertion_kernel)
else:  # pragma: no cover
    _insertion_kernel_jit = _insertion_kernel


def bwt_inplace(block: TextBlock) -> bytes:
    """Transform via the in-place insertion algorithm.

    Produces output identical to bwt_reference using one n-byte buffer and
    constant scalar state.
    """
    buf = np.frombuffer(block.text, dtype=np.uint8).copy()
    if block.n >= 3:
        _insertion_kernel_jit(buf, block.n)
    return buf.tobytes()


class StepTrace(NamedTuple):
    """What one insertion pass did: inserted byte, marker found, rank computed."""

    c: int
    p: int
    r: int
    count_le: int
    count_lt: int


@dataclass
class BwtState:
    """Working buffer and cursor for stepping the insertion algorithm.

    Invariant between steps: buffer[s+1:] is the transform of the original
    text[s+1:n-1] plus marker; buffer[:s+1] is still the original prefix.
    """

    buffer: bytearray
    s: int
    done: bool = field(default=False)

    @property
    def n(self) -> int:
        return len(self.buffer)


def init_state(block: TextBlock) -> BwtState:
    """Stepper start state: cursor at n-3, final two bytes already transformed."""
    n = block.n
    return BwtState(buffer=bytearray(block.text), s=n - 3, done=n <= 2)


def rank_insert(buffer, s: int, c: int) -> tuple[int, int, int, int]:
    """Locate the marker and compute the rank for inserting byte c at cursor s.

    Returns (r, p, count_le, count_lt) where p is the marker index in
    buffer[s+1:], count_le counts bytes <= c strictly before the marker,
    count_lt counts bytes < c from the marker onward (the marker itself
    always satisfies this), and r = s + count_le + count_lt.
    """
    n = len(buffer)
    count_le = 0
    i = s + 1
    while i < n and buffer[i] != SENTINEL:
        if buffer[i] <= c:
            count_le += 1
        i += 1
    if i >= n:
        raise NoMarker(f"no end marker in buffer[{s + 1}:{n}]")
    p = i
    count_lt = 0
    while i < n:
        if buffer[i] < c:
            count_lt += 1
        i += 1
    return s + count_le + count_lt, p, count_le, count_lt


def extend_step(state: BwtState) -> StepTrace:
    """Run one insertion pass, splicing buffer[s] into the transformed suffix.

    Mutates the state: writes c at the marker, shifts [s+1, r] down one slot,
    drops the marker at r, then moves the cursor left. Raises AlreadyDone once
    the cursor has passed zero.
    """
    if state.done:
        raise AlreadyDone("transform already complete")
    buf = state.buffer
    s = state.s
    c = buf[s]
    r, p, count_le, count_lt = rank_insert(buf, s, c)
    buf[p] = c
    buf[s:r] = buf[s + 1 : r + 1]
    buf[r] = SENTINEL
    state.s = s - 1
    if state.s < 0:
        state.done = True
    return StepTrace(c=c, p=p, r=r, count_le=count_le, count_lt=count_lt)


def bwt_inverse(transformed: bytes) -> bytes:
    """Invert the transform, returning the payload without the end marker.

    Stable-sorts positions by byte value to build the last-to-first column
    permutation, then follows it from the marker position emitting n-1 bytes.
    """
    n = len(transformed)
    if transformed.count(SENTINEL) != 1:
        raise MalformedTransform(
            f"expected exactly one end marker, found {transformed.count(SENTINEL)}"
        )
    counts = [0] * 256
    for b in transformed:
        counts[b] += 1
    base = [0] * 256
    total = 0
    for v in range(256):
        base[v] = total
        total += counts[v]
    # forward[j] = position in the transform of the rotation that follows
    # sorted row j; equivalently the stable argsort of the transform.
    forward = [0] * n
    seen = [0] * 256
    for i, b in enumerate(transformed):
        forward[base[b] + seen[b]] = i
        seen[b] += 1
    out = bytearray(n - 1)
    row = transformed.index(SENTINEL)
    for k in range(n - 1):
        row = forward[row]
        out[k] = transformed[row]
    return bytes(out)
