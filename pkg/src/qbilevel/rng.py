"""Named, independent random streams derived from one master seed.

``stream(seed, "agent", 3, "explore")`` always yields the same generator
for the same arguments, and streams with different names are statistically
independent (numpy ``SeedSequence`` spawn keys). Adding a new stream name
never perturbs existing ones.
"""
import zlib

import numpy as np


def _key(part):
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed, *names):
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in names))
    return np.random.Generator(np.random.PCG64(seq))
