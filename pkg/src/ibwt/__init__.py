"""In-place Burrows-Wheeler transform toolkit.

Subpackages: core (reference + in-place transform), hwsim (cycle-accurate
scanchain simulator), codec (block compression pipeline), bench (throughput
harness), cli (command-line front end).
"""

from .core import (
    SENTINEL,
    TextBlock,
    attach_sentinel,
    bwt_inplace,
    bwt_inverse,
    bwt_reference,
)

__version__ = "0.1.0"

__all__ = [
    "SENTINEL",
    "TextBlock",
    "attach_sentinel",
    "bwt_inplace",
    "bwt_inverse",
    "bwt_reference",
    "__version__",
]
