import zlib

import numpy as np


def _key(k):
    if isinstance(k, str):
        return zlib.crc32(k.encode())
    return int(k)


def derive_seed(seed, *keys):
    """Independent 32-bit seed for the stream identified by ``(seed, *keys)``."""
    ss = np.random.SeedSequence(0 if seed is None else int(seed),
                                spawn_key=tuple(_key(k) for k in keys))
    return int(ss.generate_state(1)[0])
