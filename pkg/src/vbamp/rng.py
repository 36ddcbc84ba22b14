"""Counter-based random streams.

Every sampling routine in the package draws from a Philox generator keyed
by ``(seed, stream)``.  Streams for distinct entities (channels, mask rows,
signal blocks) are independent by construction, so generation order and
thread count never change the output.
"""

import numpy as np


def stream(seed, index=0):
    """Return a ``numpy.random.Generator`` for substream ``index`` of ``seed``."""
    key = np.array([np.uint64(seed), np.uint64(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
