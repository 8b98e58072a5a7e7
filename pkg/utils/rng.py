"""Counter-based random streams.

Every draw is a pure function of (seed, trajectory index, step, coordinate,
tag), computed with the Philox4x32-10 bijection. Trajectories can therefore
be simulated in any order, in any batch layout and on any number of threads
without changing a single bit of the result.
"""
from dataclasses import dataclass, replace

import numpy as np

PHILOX_M4x32_0 = 0xD2511F53
PHILOX_M4x32_1 = 0xCD9E8D57
PHILOX_W32_0 = 0x9E3779B9
PHILOX_W32_1 = 0xBB67AE85
PHILOX_ROUNDS = 10
MASK32 = 0xFFFFFFFF

# Counter word 3 separates independent uses of the same (trajectory, step).
TAG_DITHER = 0
TAG_BOOTSTRAP = 1
TAG_Y0 = 2
TAG_X0 = 3


def philox4x32(ctr0, ctr1, ctr2, ctr3, key0, key1):
    """Vectorized Philox4x32-10 over broadcastable uint64 counter words."""
    mask = np.uint64(MASK32)
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & mask for c in (ctr0, ctr1, ctr2, ctr3))
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0, k1 = key0 & MASK32, key1 & MASK32
    m0, m1 = np.uint64(PHILOX_M4x32_0), np.uint64(PHILOX_M4x32_1)
    shift = np.uint64(32)

    for _ in range(PHILOX_ROUNDS):
        prod0 = c0 * m0
        prod1 = c2 * m1
        hi0, lo0 = prod0 >> shift, prod0 & mask
        hi1, lo1 = prod1 >> shift, prod1 & mask

        c0, c1, c2, c3 = (
            hi1 ^ c1 ^ np.uint64(k0),
            lo1,
            hi0 ^ c3 ^ np.uint64(k1),
            lo0,
        )
        k0 = (k0 + PHILOX_W32_0) & MASK32
        k1 = (k1 + PHILOX_W32_1) & MASK32

    return c0, c1, c2, c3


@dataclass(frozen=True, eq=False)
class RandomStream:
    """Handle on the draws of a batch of trajectories at one step."""
    seed: int
    trajectory_indices: np.ndarray
    step: int = 0

    @classmethod
    def for_trajectories(cls, seed, start, stop):
        return cls(seed=int(seed), trajectory_indices=np.arange(start, stop, dtype=np.uint64))

    @property
    def batch(self):
        return len(self.trajectory_indices)

    def at(self, step):
        return replace(self, step=int(step))

    def _words(self, dim, tag):
        key0 = self.seed & MASK32
        key1 = (self.seed >> 32) & MASK32
        traj = self.trajectory_indices.astype(np.uint64)[:, None]
        coord = np.arange(dim, dtype=np.uint64)[None, :]
        return philox4x32(traj, np.uint64(self.step), coord, np.uint64(tag), key0, key1)

    def signs(self, dim=1, tag=TAG_DITHER):
        """±1.0 with equal probability, shape (batch, dim)."""
        out0 = self._words(dim, tag)[0]
        return np.where(out0 & np.uint64(1), 1.0, -1.0)

    def uniforms(self, dim=1, tag=TAG_DITHER):
        """53-bit doubles in [0, 1), shape (batch, dim)."""
        out0, out1, _, _ = self._words(dim, tag)
        hi = (out0 >> np.uint64(5)).astype(np.float64)
        lo = (out1 >> np.uint64(6)).astype(np.float64)
        return (hi * 67108864.0 + lo) / 9007199254740992.0
