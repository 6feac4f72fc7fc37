"""Dyadic time grid for multilevel path sampling."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``2**levels + 1`` time nodes.

    Parameters
    ----------
    levels : int
        Number of interleaving levels ``m``; the path has ``M = 2**m``
        steps and node 0 is the fixed initial condition.
    step_dt : float
        Spacing between adjacent time nodes.
    prefactor_tau : float
        Overall action prefactor.  It multiplies the whole discretized
        action and is kept separate from ``step_dt`` because the two play
        different roles (node spacing vs. action scale).
    """

    levels: int
    step_dt: float
    prefactor_tau: float

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 1:
            raise ConfigError(f"grid.m must be a positive integer, got {self.levels}")
        if not (self.step_dt > 0):
            raise ConfigError(f"grid.step_dt must be > 0, got {self.step_dt}")
        if not (self.prefactor_tau > 0):
            raise ConfigError(
                f"grid.prefactor_tau must be > 0, got {self.prefactor_tau}"
            )

    @property
    def final_node(self) -> int:
        """Index ``M = 2**m`` of the endpoint node."""
        return 2 ** self.levels

    @property
    def node_count(self) -> int:
        return self.final_node + 1

    def node_times(self):
        import numpy as np

        return np.arange(self.node_count) * self.step_dt


def sampled_nodes(level: int, levels_total: int):
    """Node indices newly placed (and conditionally sampled) at ``level``.

    Level ``k`` places the odd multiples of ``2**(m-k)``: the midpoints of
    the intervals defined by the coarser levels.  Level 0 holds only the
    endpoint, which is not returned here.
    """
    import numpy as np

    if level < 1 or level > levels_total:
        raise ValueError(f"level must be in 1..{levels_total}, got {level}")
    delta = 2 ** (levels_total - level)
    return delta * (2 * np.arange(1, 2 ** (level - 1) + 1) - 1)


def active_interior_nodes(level: int, levels_total: int):
    """All interior nodes still random at ``level`` (multiples of the spacing)."""
    import numpy as np

    delta = 2 ** (levels_total - level)
    final = 2**levels_total
    return np.arange(delta, final, delta)
