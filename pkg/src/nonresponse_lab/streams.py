"""Counter-based random substreams.

Every random draw in a simulation comes from a stream addressed by
``(seed, examiner index)``; the seed of each sweep cell is in turn derived from
``(base seed, grid index)``. Nothing depends on evaluation order, so cells and
rows can be generated in any order or in parallel with identical results.

* ``derive_seed(root, *path)`` hashes the path into a 64-bit seed with
  numpy's ``SeedSequence`` (``entropy=root, spawn_key=path``).
* ``examiner_stream(seed, i)`` is Philox4x64 keyed by ``seed`` with the third
  counter word set to ``i``; streams are 2**128 blocks apart.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(root: int, *path: int) -> int:
    if root < 0 or any(p < 0 for p in path):
        raise ValueError("seeds and stream indices must be nonnegative")
    ss = np.random.SeedSequence(entropy=root, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])


def examiner_stream(seed: int, index: int) -> np.random.Generator:
    bitgen = np.random.Philox(key=seed & MASK64, counter=[0, 0, index, 0])
    return np.random.Generator(bitgen)
