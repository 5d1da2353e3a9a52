"""Sampled phase-space fields and solver trajectories."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["PhaseField", "Trajectory", "dual_weights"]


def dual_weights(nodes: np.ndarray) -> np.ndarray:
    """Trapezoid weights (dual-cell widths) for a sorted 1-D node set."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size == 1:
        return np.ones(1)
    w = np.empty_like(nodes)
    w[1:-1] = 0.5 * (nodes[2:] - nodes[:-2])
    w[0] = 0.5 * (nodes[1] - nodes[0])
    w[-1] = 0.5 * (nodes[-1] - nodes[-2])
    return w


@dataclass
class PhaseField:
    """A scalar field f(x, v) on a tensor grid.

    ``values[i, j]`` is f at (x[i], v[j]).  ``wx`` and ``wv`` are the
    quadrature weights used for mass; they default to trapezoid weights but
    the finite-volume solver stores its cell widths here instead.
    """

    x: np.ndarray
    v: np.ndarray
    values: np.ndarray
    time: float = 0.0
    wx: np.ndarray | None = None
    wv: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.x.size, self.v.size):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.x.size}, {self.v.size})"
            )
        if self.wx is None:
            self.wx = dual_weights(self.x)
        if self.wv is None:
            self.wv = dual_weights(self.v)

    @property
    def shape(self):
        return self.values.shape

    def mass(self) -> float:
        return float(self.wx @ self.values @ self.wv)

    def sup(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0

    def inf(self) -> float:
        return float(self.values.min()) if self.values.size else 0.0

    def marginal_v(self) -> np.ndarray:
        """H(v) = int f dx."""
        return self.wx @ self.values

    def with_values(self, values, time=None) -> "PhaseField":
        return PhaseField(self.x, self.v, values,
                          self.time if time is None else time, self.wx, self.wv)

    def mesh(self):
        return np.meshgrid(self.x, self.v, indexing="ij")


@dataclass
class Trajectory:
    """Snapshots plus per-step bookkeeping of a solver run.

    Per-step arrays all have one entry per recorded step, starting with the
    initial state (where the fluxes are zero).  Fluxes are the mass that
    left through each wall during the step, and ``source`` is the mass made
    by a non-conservative transport step (zero up to roundoff for the
    upwind scheme), so ``mass[n+1] = mass[n] - flux_left[n+1] -
    flux_right[n+1] - leakage[n+1] + source[n+1] + defect[n+1]`` with the
    defect at roundoff level.
    """

    snapshots: list = field(default_factory=list)
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mass: np.ndarray = field(default_factory=lambda: np.zeros(0))
    flux_left: np.ndarray = field(default_factory=lambda: np.zeros(0))
    flux_right: np.ndarray = field(default_factory=lambda: np.zeros(0))
    leakage: np.ndarray = field(default_factory=lambda: np.zeros(0))
    defect: np.ndarray = field(default_factory=lambda: np.zeros(0))
    source: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sup: np.ndarray = field(default_factory=lambda: np.zeros(0))
    inf: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sup0: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def snapshot_times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def snapshot_at(self, t: float) -> PhaseField:
        """Snapshot whose time is closest to t."""
        times = self.snapshot_times
        if times.size == 0:
            raise ValueError("trajectory has no snapshots")
        return self.snapshots[int(np.argmin(np.abs(times - t)))]
