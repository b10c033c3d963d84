"""Deterministic per-agent random streams.

Every random draw in a run is tied to a named stream identified by
``(seed, agent, purpose)``. Streams are derived through
``numpy.random.SeedSequence`` spawn keys, so distinct agents and purposes
never share state and a run is reproducible from its seed alone.
"""
from __future__ import annotations

import numpy as np

# Purpose codes. The code, not the label, enters the spawn key, so the
# mapping must never be reordered once runs have been published.
PURPOSES = {
    "xi": 0,       # stochastic oracle samples
    "zeta": 1,     # search directions for gradient estimators
    "dither": 2,   # compressor randomness (dither, coordinate picks)
    "init": 3,     # initial iterate draws
}


def stream(seed: int, agent: int, purpose: str) -> np.random.Generator:
    """Return the generator for one agent and one purpose.

    Parameters
    ----------
    seed : int
        Run-level seed shared by every stream of the run.
    agent : int
        Agent index, zero based.
    purpose : str
        One of ``"xi"``, ``"zeta"``, ``"dither"``, ``"init"``.
    """
    try:
        code = PURPOSES[purpose]
    except KeyError:
        raise ValueError(f"unknown stream purpose {purpose!r}; expected one of {sorted(PURPOSES)}") from None
    if agent < 0:
        raise ValueError(f"agent index must be nonnegative, got {agent}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(agent, code))
    return np.random.Generator(np.random.Philox(ss))


def agent_streams(seed: int, n: int, purpose: str) -> list[np.random.Generator]:
    """Streams for agents ``0 .. n-1`` under a single purpose."""
    return [stream(seed, i, purpose) for i in range(n)]
