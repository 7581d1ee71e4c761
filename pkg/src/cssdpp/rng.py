"""Seeded random streams.

An :class:`RngState` names a stream by a 64-bit seed plus a spawn path, so
parallel trials can derive independent substreams without sharing state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class RngState:
    """Reproducible description of a random stream.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit seed.
    stream : tuple of int
        Spawn path. ``RngState(s).substream(i)`` has path ``(i,)``; an int is
        accepted and wrapped.
    """

    seed: int
    stream: tuple = ()

    def __post_init__(self):
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise InputError(f"seed must be an unsigned 64-bit integer, got {seed}")
        stream = self.stream
        if isinstance(stream, (int, np.integer)):
            stream = (int(stream),)
        stream = tuple(int(s) for s in stream)
        if any(s < 0 for s in stream):
            raise InputError("stream indices must be non-negative")
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "stream", stream)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, index: int) -> "RngState":
        return RngState(self.seed, self.stream + (int(index),))


def as_generator(rng=None) -> np.random.Generator:
    """Turn an RngState, a Generator, an int seed or None into a Generator.

    A Generator is passed through, so successive calls advance it. An
    RngState always yields a fresh generator at the start of its stream.
    """
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngState):
        return rng.generator()
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, (int, np.integer)):
        return RngState(int(rng)).generator()
    raise InputError(f"cannot build a random generator from {type(rng).__name__}")


def inverse_cdf(weights, u) -> np.ndarray:
    """Indices drawn by inverting the cumulative weights at uniforms ``u``.

    ``weights`` is either a vector (shared by all draws) or an (n, m) array
    with one row per draw. Entries with zero weight are never returned.
    """
    w = np.asarray(weights, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if w.ndim == 1:
        c = np.cumsum(w)
        idx = np.searchsorted(c, u * c[-1], side="right")
        last = np.flatnonzero(w > 0)[-1]
        return np.minimum(idx, last)
    c = np.cumsum(w, axis=1)
    target = u.reshape(-1, 1) * c[:, -1:]
    idx = np.sum(c <= target, axis=1)
    pos = w > 0
    last = w.shape[1] - 1 - np.argmax(pos[:, ::-1], axis=1)
    return np.minimum(idx, last)
