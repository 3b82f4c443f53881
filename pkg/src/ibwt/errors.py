"""Exception hierarchy shared by all ibwt subsystems.

Everything derives from IbwtError so callers (notably the CLI) can map any
domain failure to a "data error" exit code in one clause. Plain OSError is
deliberately left alone: I/O failures are a separate exit code.
"""


class IbwtError(Exception):
    """Base class for all ibwt domain errors."""


# -- transform core ----------------------------------------------------------

class SentinelInPayload(IbwtError):
    """Payload contains the reserved end-marker byte (0x00)."""


class NoMarker(IbwtError):
    """Expected end marker is absent from the scanned range."""


class MultipleMarkers(IbwtError):
    """More than one end marker found where exactly one must exist."""


class AlreadyDone(IbwtError):
    """Stepping a transform state that has already finished."""


class MalformedTransform(IbwtError):
    """Transformed block does not contain exactly one end marker."""


# -- hardware simulator ------------------------------------------------------

class InvalidConfig(IbwtError):
    """Simulator configuration is unusable (e.g. zero block size)."""


class ProtocolViolation(IbwtError):
    """Input byte supplied on a phase that cannot accept one."""


class BlockSizeMismatch(IbwtError):
    """Payload length disagrees with the configured block size."""


# -- codec -------------------------------------------------------------------

class IndexOutOfRange(IbwtError):
    """Move-to-front decode saw an index outside the recency list."""


class MalformedRun(IbwtError):
    """Zero-run decode saw a symbol outside the coded alphabet."""


class EmptyInput(IbwtError):
    """Prefix-code construction needs at least one nonzero frequency."""


class CorruptBitstream(IbwtError):
    """Prefix-coded bitstream ended early or decoded past its target."""


class MalformedContainer(IbwtError):
    """Container framing is structurally invalid."""


class BadMagic(MalformedContainer):
    """Container does not start with the expected magic bytes."""


class UnsupportedVersion(MalformedContainer):
    """Container version byte is not one this reader understands."""


class TruncatedStream(MalformedContainer):
    """Container ended mid-record."""


class ChecksumMismatch(MalformedContainer):
    """Stored CRC32 does not match the block contents."""


# -- benchmark harness -------------------------------------------------------

class CorpusNotFound(IbwtError):
    """Corpus path does not exist and is not a known generator name."""


class EmptyCorpus(IbwtError):
    """Corpus resolved to zero bytes."""


class InsufficientData(IbwtError):
    """Scaling check needs at least three consecutive doubling sizes."""
