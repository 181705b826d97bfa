"""Counter-based random streams.

A draw is a pure function of ``(seed, labels..., index)``: a splitmix64
finalizer is chained over the labels and the top 53 bits give a uniform on
(0, 1].  Nothing is stateful, so parents can be expanded in any order (or
concurrently) and still see the same numbers.
"""
from __future__ import annotations

from statistics import NormalDist

from ._backend import core

SEED_TAG = 0x53454544  # "SEED"
_STD_NORMAL = NormalDist()
_U_MAX = 1.0 - 2.0 ** -53


def derive_seed(master: int, j: int) -> int:
    """Seed for path ``j`` of a batch keyed by ``master``.

    ``hash(master, SEED_TAG, j)`` with the splitmix64 chain, so growing a
    batch never changes the seeds of earlier paths.
    """
    return int(core.hash_labels(int(master), (SEED_TAG, int(j))))


class RngStream:
    """Uniform draws addressed by ``(seed, *labels, index)``."""

    __slots__ = ("seed", "labels")

    def __init__(self, seed: int, labels=()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.labels = tuple(int(x) for x in labels)

    def uniform(self, index: int) -> float:
        labels = self.labels
        if len(labels) == 2:
            return core.uniform3(self.seed, labels[0], labels[1], index)
        return core.uniform_labels(self.seed, labels + (index,))

    def child(self, label: int) -> "RngStream":
        return RngStream(self.seed, self.labels + (label,))

    def poisson(self, lam: float) -> int:
        """Poisson(lam) by inverse transform; uses index 0 of this stream."""
        if len(self.labels) != 2:
            raise ValueError("poisson draws need a (generation, parent) stream")
        return core.poisson3(self.seed, self.labels[0], self.labels[1], float(lam))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, labels={self.labels})"


class MarkDraws:
    """Uniforms available to a mark sampler for one candidate point.

    ``uniform(0)`` is the candidate's own W draw; samplers needing more
    randomness (continuous marks) read ``uniform(1)``, ``uniform(2)``, ...
    """

    __slots__ = ("_stream", "_index")

    def __init__(self, stream: RngStream, index: int):
        self._stream = stream
        self._index = index

    def uniform(self, k: int = 0) -> float:
        if k == 0:
            return self._stream.uniform(self._index)
        return self._stream.child(self._index).uniform(k)

    def normal(self, k: int, mean: float = 0.0, sd: float = 1.0) -> float:
        u = min(self.uniform(k), _U_MAX)
        return mean + sd * _STD_NORMAL.inv_cdf(u)
