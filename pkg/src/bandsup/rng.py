"""Counter-based random streams keyed by (master seed, purpose, replicate, ...).

Every stream is a Philox generator seeded from a ``SeedSequence`` whose spawn
key encodes the full stream identity, so a replicate draws the same numbers
no matter which worker runs it or in which order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PURPOSE_ALM = 0
PURPOSE_NET = 1
PURPOSE_BERMAN = 2
PURPOSE_PROBE = 3


@dataclass(frozen=True)
class RNGStream:
    master_seed: int
    replicate: int = 0

    def generator(self, purpose: int, *key: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(purpose, self.replicate, *key))
        return np.random.Generator(np.random.Philox(seq))

    def with_replicate(self, replicate: int) -> "RNGStream":
        return RNGStream(self.master_seed, replicate)

    def identity(self) -> dict:
        return {"master_seed": self.master_seed, "replicate": self.replicate}
