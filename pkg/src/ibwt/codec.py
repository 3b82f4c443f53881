"""Block compression pipeline and container format.

Stages, each an exact bijection on its domain:

    transform   in-place BWT with the 0x00 end marker in band
    mtf         move-to-front over the 256 byte values, marker byte first
    zrle        runs of MTF zeros recoded in bijective base 2 over two run
                symbols; nonzero indices shifted up by one
    huffman     canonical prefix code over the 257-symbol run/literal
                alphabet, rebuilt per block

The zero-run stage exists because move-to-front output downstream of the
transform is dominated by zeros; coding run lengths instead of individual
zeros is worth more than it costs on every realistic input.

Container layout (all integers little-endian): magic "IBW1", version byte
0x01, u32 block size, then per block: u32 original length, u32 compressed
byte length, u32 CRC32 of the compressed bytes, compressed bytes. The
compressed bytes are the 257 code lengths at 5 bits each (padded to a byte
boundary) followed by the MSB-first code stream. No symbol count is stored:
the decoder knows the transform length from the original length and stops
once the reconstructed move-to-front stream reaches it.
"""

from __future__ import annotations

import heapq
import struct
import zlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .core import SENTINEL, attach_sentinel, bwt_inplace, bwt_inverse
from .errors import (
    BadMagic,
    ChecksumMismatch,
    CorruptBitstream,
    EmptyInput,
    IndexOutOfRange,
    MalformedContainer,
    MalformedRun,
    TruncatedStream,
    UnsupportedVersion,
)

RUNA = 0
RUNB = 1
LITERAL_BASE = 2
ALPHABET_SIZE = 257  # two run symbols + shifted nonzero indices 2..256
CODE_LENGTH_BITS = 5
MAX_CODE_LENGTH = (1 << CODE_LENGTH_BITS) - 1  # 31, the serialization ceiling
TABLE_BYTES = (ALPHABET_SIZE * CODE_LENGTH_BITS + 7) // 8

MAGIC = b"IBW1"
VERSION = 0x01


# -- move-to-front -----------------------------------------------------------

def mtf_encode(data: Iterable[int]) -> list[int]:
    """Replace each byte with its index in a recency list.

    The list starts in ascending byte order, so the end marker (0x00) sits
    at the front and every byte maps to itself on first sight.
    """
    order = list(range(256))
    out = []
    for b in data:
        i = order.index(b)
        out.append(i)
        if i:
            del order[i]
            order.insert(0, b)
    return out


def mtf_decode(seq: Iterable[int]) -> bytes:
    """Invert mtf_encode. Raises IndexOutOfRange on indices >= 256."""
    order = list(range(256))
    out = bytearray()
    for i in seq:
        if not 0 <= i < 256:
            raise IndexOutOfRange(f"move-to-front index {i} outside [0, 255]")
        b = order[i]
        out.append(b)
        if i:
            del order[i]
            order.insert(0, b)
    return bytes(out)


# -- zero-run coding ---------------------------------------------------------

def _emit_run(length: int, out: list[int]) -> None:
    # Bijective base 2, least significant digit first: RUNA weighs 1, RUNB 2.
    while length > 0:
        if length % 2 == 1:
            out.append(RUNA)
            length = (length - 1) // 2
        else:
            out.append(RUNB)
            length = (length - 2) // 2


def zrle_encode(seq: Sequence[int]) -> list[int]:
    """Recode runs of zeros as run symbols; shift nonzero indices up by one."""
    out: list[int] = []
    run = 0
    for v in seq:
        if v == 0:
            run += 1
        else:
            _emit_run(run, out)
            run = 0
            out.append(v + 1)
    _emit_run(run, out)
    return out


def zrle_decode(seq: Iterable[int]) -> list[int]:
    """Invert zrle_encode. Raises MalformedRun on out-of-alphabet symbols."""
    out: list[int] = []
    run = 0
    weight = 1
    for v in seq:
        if v == RUNA:
            run += weight
            weight *= 2
        elif v == RUNB:
            run += 2 * weight
            weight *= 2
        elif LITERAL_BASE <= v < ALPHABET_SIZE:
            out.extend([0] * run)
            run = 0
            weight = 1
            out.append(v - 1)
        else:
            raise MalformedRun(f"symbol {v} outside the coded alphabet")
    out.extend([0] * run)
    return out


# -- canonical prefix code ---------------------------------------------------

class HuffmanTable:
    """Canonical prefix code defined entirely by per-symbol code lengths."""

    def __init__(self, code_lengths: Sequence[int]):
        self.code_lengths = tuple(int(l) for l in code_lengths)
        if any(l < 0 or l > MAX_CODE_LENGTH for l in self.code_lengths):
            raise MalformedContainer("code length outside [0, 31]")
        coded = sorted(
            (l, sym) for sym, l in enumerate(self.code_lengths) if l > 0
        )
        self.codes: dict[int, tuple[int, int]] = {}  # symbol -> (length, code)
        # Decode side: for each length, the first canonical code and the
        # symbols using that length in canonical order.
        self._first_code = [0] * (MAX_CODE_LENGTH + 2)
        self._first_index = [0] * (MAX_CODE_LENGTH + 2)
        self._symbols = [sym for _, sym in coded]
        code = 0
        prev_len = coded[0][0] if coded else 0
        counts = [0] * (MAX_CODE_LENGTH + 1)
        for idx, (length, sym) in enumerate(coded):
            code <<= length - prev_len
            prev_len = length
            self.codes[sym] = (length, code)
            counts[length] += 1
            code += 1
        # first_code[l] = canonical code of the first symbol with length l
        code = 0
        index = 0
        for l in range(1, MAX_CODE_LENGTH + 1):
            code <<= 1
            self._first_code[l] = code
            self._first_index[l] = index
            code += counts[l]
            index += counts[l]

    def kraft_sum(self) -> Fraction:
        return sum(
            (Fraction(1, 2 ** l) for l in self.code_lengths if l > 0),
            Fraction(0),
        )

    def decode_one(self, reader: "_BitReader") -> int:
        """Read one symbol from the bit reader."""
        code = 0
        for length in range(1, MAX_CODE_LENGTH + 1):
            code = (code << 1) | reader.read_bit()
            offset = code - self._first_code[length]
            if 0 <= offset < self._count_at(length):
                return self._symbols[self._first_index[length] + offset]
        raise CorruptBitstream("no code matches the next 31 bits")

    def _count_at(self, length: int) -> int:
        return self._first_index[length + 1] - self._first_index[length] \
            if length < MAX_CODE_LENGTH else len(self._symbols) - self._first_index[length]


def huffman_build(freqs, alphabet_size: int | None = None) -> HuffmanTable:
    """Optimal prefix code for the given symbol frequencies.

    freqs is a mapping symbol -> count or a sequence indexed by symbol.
    A lone symbol gets a one-bit code by convention. If the optimal tree
    would exceed the 31-bit serialization ceiling the frequencies are scaled
    down and the tree rebuilt, trading a sliver of optimality for depth.
    """
    if hasattr(freqs, "items"):
        pairs = [(s, f) for s, f in freqs.items() if f > 0]
    else:
        pairs = [(s, f) for s, f in enumerate(freqs) if f > 0]
    if not pairs:
        raise EmptyInput("at least one symbol must have nonzero frequency")
    size = alphabet_size if alphabet_size is not None else max(s for s, _ in pairs) + 1

    lengths = _tree_lengths(pairs)
    while max(lengths.values()) > MAX_CODE_LENGTH:
        pairs = [(s, (f + 1) // 2) for s, f in pairs]
        lengths = _tree_lengths(pairs)

    table = [0] * size
    for sym, l in lengths.items():
        table[sym] = l
    return HuffmanTable(table)


def _tree_lengths(pairs: list[tuple[int, int]]) -> dict[int, int]:
    if len(pairs) == 1:
        return {pairs[0][0]: 1}
    # Entries: (freq, tiebreak, [symbols at depth 0], ...) — depths tracked
    # by how many merges each symbol has been through.
    heap = [(f, s, {s: 0}) for s, f in pairs]
    heapq.heapify(heap)
    counter = max(s for s, _ in pairs) + 1
    while len(heap) > 1:
        fa, _, da = heapq.heappop(heap)
        fb, _, db = heapq.heappop(heap)
        merged = {s: d + 1 for s, d in da.items()}
        merged.update({s: d + 1 for s, d in db.items()})
        heapq.heappush(heap, (fa + fb, counter, merged))
        counter += 1
    return heap[0][2]


class _BitWriter:
    def __init__(self) -> None:
        self.buf = bytearray()
        self._acc = 0
        self._nbits = 0
        self.bit_count = 0

    def write(self, code: int, length: int) -> None:
        self._acc = (self._acc << length) | code
        self._nbits += length
        self.bit_count += length
        while self._nbits >= 8:
            self._nbits -= 8
            self.buf.append((self._acc >> self._nbits) & 0xFF)
        self._acc &= (1 << self._nbits) - 1

    def getvalue(self) -> bytes:
        if self._nbits:
            return bytes(self.buf) + bytes([(self._acc << (8 - self._nbits)) & 0xFF])
        return bytes(self.buf)


class _BitReader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0  # bit index

    def read_bit(self) -> int:
        byte_idx = self.pos >> 3
        if byte_idx >= len(self.data):
            raise CorruptBitstream("bitstream exhausted")
        bit = (self.data[byte_idx] >> (7 - (self.pos & 7))) & 1
        self.pos += 1
        return bit


def huffman_encode(table: HuffmanTable, seq: Iterable[int]) -> tuple[bytes, int]:
    """Encode symbols MSB-first; returns (bytes, exact bit count)."""
    w = _BitWriter()
    codes = table.codes
    for sym in seq:
        try:
            length, code = codes[sym]
        except KeyError:
            raise CorruptBitstream(f"symbol {sym} has no code") from None
        w.write(code, length)
    return w.getvalue(), w.bit_count


def huffman_decode(table: HuffmanTable, data: bytes, count: int) -> list[int]:
    """Decode exactly count symbols from an MSB-first bitstream."""
    reader = _BitReader(data)
    return [table.decode_one(reader) for _ in range(count)]


# -- block pipeline ----------------------------------------------------------

@dataclass(frozen=True)
class CompressedBlock:
    """One block's compressed form: code lengths plus the code stream."""

    original_len: int
    code_lengths: tuple[int, ...]
    payload_bits: bytes

    def serialized(self) -> bytes:
        w = _BitWriter()
        for l in self.code_lengths:
            w.write(l, CODE_LENGTH_BITS)
        return w.getvalue() + self.payload_bits


def compress_block(payload: bytes) -> CompressedBlock:
    """Run the full pipeline over one sentinel-free payload."""
    transform = bwt_inplace(attach_sentinel(payload))
    symbols = zrle_encode(mtf_encode(transform))
    freqs = [0] * ALPHABET_SIZE
    for s in symbols:
        freqs[s] += 1
    table = huffman_build(freqs, alphabet_size=ALPHABET_SIZE)
    bits, _ = huffman_encode(table, symbols)
    return CompressedBlock(
        original_len=len(payload),
        code_lengths=table.code_lengths,
        payload_bits=bits,
    )


def decompress_block(block: CompressedBlock) -> bytes:
    """Invert every stage and strip the end marker."""
    table = HuffmanTable(block.code_lengths)
    target = block.original_len + 1  # transform length incl. marker
    reader = _BitReader(block.payload_bits)
    symbols: list[int] = []
    produced = 0  # move-to-front symbols fixed so far
    run = 0  # value of the pending run-digit streak
    weight = 1
    while produced + run < target:
        sym = table.decode_one(reader)
        symbols.append(sym)
        if sym == RUNA:
            run += weight
            weight *= 2
        elif sym == RUNB:
            run += 2 * weight
            weight *= 2
        elif LITERAL_BASE <= sym < ALPHABET_SIZE:
            produced += run + 1
            run = 0
            weight = 1
        else:
            raise MalformedRun(f"symbol {sym} outside the coded alphabet")
    if produced + run != target:
        raise CorruptBitstream("decoded stream overshoots the block length")
    transform = mtf_decode(zrle_decode(symbols))
    payload = bwt_inverse(transform)
    if len(payload) != block.original_len:
        raise CorruptBitstream("decoded payload length mismatch")
    return payload


def _parse_compressed(raw: bytes, original_len: int) -> CompressedBlock:
    if len(raw) < TABLE_BYTES:
        raise TruncatedStream("compressed block shorter than its code table")
    reader = _BitReader(raw[:TABLE_BYTES])
    lengths = tuple(
        _read_fixed(reader, CODE_LENGTH_BITS) for _ in range(ALPHABET_SIZE)
    )
    return CompressedBlock(
        original_len=original_len,
        code_lengths=lengths,
        payload_bits=raw[TABLE_BYTES:],
    )


def _read_fixed(reader: _BitReader, nbits: int) -> int:
    v = 0
    for _ in range(nbits):
        v = (v << 1) | reader.read_bit()
    return v


# -- container ---------------------------------------------------------------

def write_container(blocks: Sequence[CompressedBlock], sink, block_size: int) -> int:
    """Write the IBW1 container; returns the byte count written."""
    written = 0
    header = MAGIC + bytes([VERSION]) + struct.pack("<I", block_size)
    sink.write(header)
    written += len(header)
    for block in blocks:
        raw = block.serialized()
        rec = struct.pack("<III", block.original_len, len(raw), zlib.crc32(raw))
        sink.write(rec)
        sink.write(raw)
        written += len(rec) + len(raw)
    return written


def read_container(source) -> tuple[int, list[CompressedBlock]]:
    """Read an IBW1 container; returns (block_size, blocks)."""
    header = source.read(9)
    if len(header) < 9:
        raise TruncatedStream("container header incomplete")
    if header[:4] != MAGIC:
        raise BadMagic(f"bad magic {header[:4]!r}")
    if header[4] != VERSION:
        raise UnsupportedVersion(f"version {header[4]} unsupported")
    (block_size,) = struct.unpack("<I", header[5:9])
    if block_size < 1:
        raise MalformedContainer("block size must be >= 1")
    blocks = []
    while True:
        rec = source.read(12)
        if not rec:
            break
        if len(rec) < 12:
            raise TruncatedStream("block record header incomplete")
        original_len, comp_len, crc = struct.unpack("<III", rec)
        raw = source.read(comp_len)
        if len(raw) < comp_len:
            raise TruncatedStream("block body incomplete")
        if zlib.crc32(raw) != crc:
            raise ChecksumMismatch("block CRC32 mismatch")
        if original_len > block_size:
            raise MalformedContainer("block longer than the container block size")
        blocks.append(_parse_compressed(raw, original_len))
    return block_size, blocks


# -- measurement -------------------------------------------------------------

@dataclass(frozen=True)
class BpcReport:
    """Aggregate compression cost of a corpus at one block size."""

    block_size: int
    num_blocks: int
    total_input_bytes: int
    total_output_bits: int
    header_bytes: int

    @property
    def bits_per_char(self) -> float:
        return self.total_output_bits / self.total_input_bytes


def split_blocks(data: bytes, block_size: int) -> Iterator[bytes]:
    for off in range(0, len(data), block_size):
        yield data[off : off + block_size]


def measure_bpc(corpus: bytes, block_size: int) -> BpcReport:
    """Compress the corpus blockwise and report bits per input character.

    Only the compressed payloads (code table + code stream) count toward the
    bit total; container framing is reported separately as header_bytes.
    """
    if block_size < 1:
        raise ValueError("block size must be >= 1")
    total_bits = 0
    nblocks = 0
    for chunk in split_blocks(corpus, block_size):
        cb = compress_block(chunk)
        total_bits += 8 * len(cb.serialized())
        nblocks += 1
    return BpcReport(
        block_size=block_size,
        num_blocks=nblocks,
        total_input_bytes=len(corpus),
        total_output_bits=total_bits,
        header_bytes=9 + 12 * nblocks,
    )
