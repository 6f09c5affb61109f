"""Two-state Markov (Gilbert-Elliott) packet-loss channels.

State 1 is "good" (packet delivered), state 0 is "bad" (packet dropped).
``p`` is the probability of leaving the good state, ``q`` the probability
of recovering from the bad state.  Channels are mutually independent; each
one draws from its own RNG substream so adding or removing a channel never
perturbs the others' sample paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelModel:
    p: float  # P(next = bad  | current = good)
    q: float  # P(next = good | current = bad)

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError(f"p and q must lie in [0, 1], got p={self.p} q={self.q}")


@dataclass
class ChannelState:
    gamma: np.ndarray  # 0/1 per channel, current step's outcomes

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.int64)
        if g.ndim != 1 or not np.all((g == 0) | (g == 1)):
            raise ValueError("gamma must be a 1-D array of 0/1 values")
        self.gamma = g


def channel_reset(models, good=True):
    """Initial channel state; all good by default."""
    fill = 1 if good else 0
    return ChannelState(np.full(len(models), fill, dtype=np.int64))


def channel_step(models, state, rngs):
    """Advance every chain one step.  rngs: one Generator per channel."""
    if not (len(models) == len(state.gamma) == len(rngs)):
        raise ValueError(
            f"got {len(models)} models, {len(state.gamma)} states, "
            f"{len(rngs)} rngs")
    new = np.empty(len(models), dtype=np.int64)
    for m, model in enumerate(models):
        u = rngs[m].random()
        if state.gamma[m] == 1:
            new[m] = 0 if u < model.p else 1
        else:
            new[m] = 1 if u < model.q else 0
    return ChannelState(new)


def stationary_success_prob(model):
    """Long-run fraction of good slots, q / (p + q)."""
    if model.p == 0.0 and model.q == 0.0:
        raise ValueError("p = q = 0 has no unique stationary distribution")
    return model.q / (model.p + model.q)


def spawn_channel_rngs(seed, n_channels):
    """Independent counter-based substreams, one per channel.

    ``seed`` may be an int or a numpy SeedSequence.  Spawned children give
    structural independence: streams never overlap regardless of how many
    draws each consumes.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(child))
            for child in seed.spawn(n_channels)]
