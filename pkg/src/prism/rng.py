"""Seeded, platform-independent randomness.

Every stochastic component in the package draws from SeededRng, a SplitMix64
generator implemented here so that a (seed, draw sequence) pair produces
bit-identical results on any platform and Python version. The hardware being
modelled would use an in-DRAM TRNG/PRNG; for experiments we only need
reproducibility, not entropy.

Sub-streams for epochs, banks, and sweep points are derived from the master
seed and an integer path (`derive`), never from draw position, so parallel
workers are deterministic regardless of scheduling.
"""

from __future__ import annotations

from .errors import ConfigError

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SeededRng:
    """SplitMix64 stream with uniform integer and k-of-n subset draws."""

    __slots__ = ("seed", "_state")

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self._state = self.seed

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection."""
        if n <= 0:
            raise ValueError(f"randint bound must be positive, got {n}")
        limit = _MASK + 1 - ((_MASK + 1) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def subset(self, n: int, k: int) -> list[int]:
        """k distinct integers from [0, n), uniform over all k-subsets.

        Partial Fisher-Yates over a sparse overlay map: O(k) time and space,
        so sampling a handful of slots out of a large window stays cheap.
        Order of the returned list is the selection order, not sorted.
        """
        if k < 0 or k > n:
            raise ValueError(f"subset size {k} outside [0, {n}]")
        overlay: dict[int, int] = {}
        out = []
        for i in range(k):
            j = i + self.randint(n - i)
            out.append(overlay.get(j, j))
            overlay[j] = overlay.get(i, i)
        return out

    def derive(self, *path: int) -> "SeededRng":
        """Child stream keyed by (seed, path), independent of draws made."""
        s = self.seed
        for p in path:
            s = _mix((s ^ ((p + 1) * _GAMMA)) & _MASK)
        return SeededRng(s)


def sample_window_slots(w: int, r: int, rng: SeededRng) -> set[int]:
    """Draw the r sampled activation-slot indices for one window of w slots.

    Marginal probability of any slot being sampled is r/w; the returned set
    always has exactly r distinct members.
    """
    if r > w:
        raise ConfigError(f"cannot sample {r} slots from a {w}-slot window")
    if r < 1:
        raise ConfigError(f"sampled slot count must be >= 1, got {r}")
    return set(rng.subset(w, r))
