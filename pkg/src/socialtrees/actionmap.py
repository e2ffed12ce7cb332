"""Discretization of continuous action boxes into per-channel bins.

Discrete index ``a`` selects channel ``a // bins`` and bin ``a % bins``; the
chosen channel gets ``2 * bin / (bins - 1) - 1`` and every other channel 0.
"""

from dataclasses import dataclass

import numpy as np


class InvalidAction(ValueError):
    pass


@dataclass(frozen=True)
class DiscretizedActionMap:
    n_a: int
    bins: int = 7

    def __post_init__(self):
        if self.n_a < 1:
            raise ValueError(f"n_a must be >= 1, got {self.n_a}")
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2, got {self.bins}")

    @property
    def total_actions(self):
        return self.bins * self.n_a

    def channel_bin(self, a_dt):
        a_dt = int(a_dt)
        if not 0 <= a_dt < self.total_actions:
            raise InvalidAction(f"discrete action {a_dt} outside [0, {self.total_actions})")
        return divmod(a_dt, self.bins)

    def bin_value(self, b):
        return 2.0 * b / (self.bins - 1) - 1.0

    def to_continuous(self, a_dt):
        channel, b = self.channel_bin(a_dt)
        a = np.zeros(self.n_a)
        a[channel] = self.bin_value(b)
        return a

    def to_discrete(self, channel, value):
        """Index whose bin value is closest to ``value`` on ``channel``."""
        b = int(round((value + 1.0) * (self.bins - 1) / 2.0))
        return channel * self.bins + min(max(b, 0), self.bins - 1)


def total_actions(action_map):
    return action_map.total_actions


def to_continuous(action_map, a_dt):
    return action_map.to_continuous(a_dt)
