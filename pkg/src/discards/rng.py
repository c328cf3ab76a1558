"""Deterministic, splittable random-number streams.

Every stochastic component derives its stream from a master seed and a
derivation path (e.g. ``[replicate]`` or ``[scheme, run]``). Identical
``(master_seed, path)`` always produce identical streams, independent of
execution order or thread schedule, so parallel replicates stay reproducible.

Derivation is counter-based: the path is hashed into the stream state via
``numpy.random.SeedSequence`` spawn keys (no sequential splitting), and the
bit stream comes from PCG64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class RngState:
    """Value-type handle for one reproducible stream.

    States are cheap to create and immutable; each concurrent task should own
    its derived state and materialize a generator locally.
    """

    master_seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.master_seed <= _U64_MAX:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if any(p < 0 for p in self.path):
            raise ValueError("path indices must be non-negative")

    def derive(self, index: int) -> "RngState":
        """Child state for ``path + [index]``; independent of its siblings."""
        if index < 0:
            raise ValueError("derivation index must be non-negative")
        return RngState(self.master_seed, self.path + (index,))

    def generator(self) -> np.random.Generator:
        """Fresh PCG64 generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(seq))


def derive(state: RngState, index: int) -> RngState:
    """Functional alias for :meth:`RngState.derive`."""
    return state.derive(index)


def uniform_index(state: RngState, n: int) -> int:
    """First uniform draw from the stream, over ``[0, n)``.

    Pure in ``state``: repeated calls return the same value. Use
    :meth:`RngState.generator` for a consumable stream.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    return int(state.generator().integers(0, n))


def normal(state: RngState, mu: float, sd: float) -> float:
    """First Gaussian draw from the stream (ziggurat transform via numpy)."""
    if sd < 0:
        raise ValueError("sd must be non-negative")
    if sd == 0:
        return float(mu)
    return float(state.generator().normal(mu, sd))
