"""Ground-plane geometry: agent states, gaze anchors, view sectors, pooling.

Angles are radians, counterclockwise from the +x axis, normalized to
``[0, 2*pi)``. Positions are meters in a fixed world frame.

The attention region of an agent is a circular sector rooted at the
agent position, aimed along the pan angle, with a full aperture angle
and a maximum depth. Social pooling maps neighbours into an axis-aligned
``N x N`` grid over a square centered on the agent; each grid cell
accumulates the sum of the mapped neighbours' hidden-state vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "TWO_PI",
    "normalize_angle",
    "wrap_signed",
    "angle_abs_diff",
    "AgentState",
    "gaze_anchor",
    "FrustumSpec",
    "PoolingGrid",
    "in_frustum",
    "cell_index",
    "cell_assignments",
    "pool_social_tensor",
]

TWO_PI = 2.0 * math.pi


def normalize_angle(a):
    """Map an angle (scalar or array) into ``[0, 2*pi)``.

    Values already in range are returned unchanged bit for bit.
    """
    if np.ndim(a) == 0:
        a = float(a)
        if 0.0 <= a < TWO_PI:
            return a
        return a % TWO_PI
    a = np.asarray(a, dtype=np.float64)
    return np.where((a >= 0.0) & (a < TWO_PI), a, np.mod(a, TWO_PI))


def wrap_signed(a):
    """Map an angle difference into ``[-pi, pi)``."""
    return np.mod(np.asarray(a, dtype=np.float64) + math.pi, TWO_PI) - math.pi


def angle_abs_diff(a, b):
    """Absolute wrapped difference between two angles, in ``[0, pi]``."""
    return np.abs(wrap_signed(np.asarray(a, dtype=np.float64) - b))


@dataclass(frozen=True)
class AgentState:
    """Position (meters) and head pan angle (radians, normalized)."""

    x: float
    y: float
    pan: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "pan", float(normalize_angle(self.pan)))

    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


def gaze_anchor(state: AgentState, r: float) -> tuple[float, float]:
    """Anchor point at distance ``r`` along the head direction.

    The anchor encodes the pan angle as a plain 2-D point, which avoids
    the wrap discontinuity at 360 degrees and matches the representation
    of positions.
    """
    if r <= 0.0:
        raise ValueError("anchor distance must be positive")
    return (state.x + r * math.cos(state.pan), state.y + r * math.sin(state.pan))


@dataclass(frozen=True)
class FrustumSpec:
    """Circular attention sector: full aperture (radians) and depth (meters)."""

    aperture: float
    depth: float

    def __post_init__(self):
        if not (0.0 < self.aperture <= TWO_PI):
            raise ValueError("aperture must be in (0, 2*pi]")
        if self.depth <= 0.0:
            raise ValueError("depth must be positive")


@dataclass(frozen=True)
class PoolingGrid:
    """Square pooling region: cells per side and total side length (meters)."""

    cells_per_side: int
    side_length: float

    def __post_init__(self):
        if self.cells_per_side <= 0:
            raise ValueError("cells_per_side must be positive")
        if self.side_length <= 0.0:
            raise ValueError("side_length must be positive")

    @property
    def cell_size(self) -> float:
        return self.side_length / self.cells_per_side

    @property
    def half_side(self) -> float:
        return 0.5 * self.side_length


def _sector_mask(
    obs_xy: np.ndarray,
    obs_pan: float,
    points: np.ndarray,
    spec: FrustumSpec,
) -> np.ndarray:
    """Vectorized sector membership for ``points`` (K, 2).

    A point coincident with the observer is never a member. Both the
    depth and the angular boundary are inclusive.
    """
    delta = points - obs_xy
    dist = np.hypot(delta[:, 0], delta[:, 1])
    heading = np.arctan2(delta[:, 1], delta[:, 0])
    deviation = np.abs(wrap_signed(heading - obs_pan))
    return (dist > 0.0) & (dist <= spec.depth) & (deviation <= 0.5 * spec.aperture)


def in_frustum(
    observer: AgentState,
    other_position: Sequence[float],
    spec: FrustumSpec,
) -> bool:
    """True iff ``other_position`` lies inside the observer's sector."""
    pts = np.asarray([other_position], dtype=np.float64)
    obs = np.asarray([observer.x, observer.y], dtype=np.float64)
    return bool(_sector_mask(obs, observer.pan, pts, spec)[0])


def cell_index(dx: float, dy: float, grid: PoolingGrid) -> tuple[int, int] | None:
    """Grid cell of a relative displacement, or None when outside.

    The domain is the half-open square ``[-h, h)^2`` with ``h`` the half
    side; a displacement on an interior cell boundary belongs to the
    higher-index cell, and a coordinate equal to ``+h`` falls outside.
    """
    h = grid.half_side
    if not (-h <= dx < h and -h <= dy < h):
        return None
    n_cells = grid.cells_per_side
    m = min(int((dx + h) / grid.cell_size), n_cells - 1)
    n = min(int((dy + h) / grid.cell_size), n_cells - 1)
    return (m, n)


def cell_assignments(
    observer_index: int,
    positions: np.ndarray,
    pans: np.ndarray,
    present: np.ndarray,
    grid: PoolingGrid,
    frustum: FrustumSpec,
    mode: str,
) -> list[tuple[int, int]]:
    """Pooling assignments for one observer over an array of agents.

    Returns ``(agent_index, flat_cell)`` pairs in ascending agent index,
    where ``flat_cell = m * cells_per_side + n``. ``mode`` selects the
    eligibility rule: ``"frustum"`` keeps neighbours inside the attention
    sector, ``"all"`` keeps every neighbour inside the pooling square,
    ``"none"`` keeps nobody. The observer itself is always excluded.
    """
    if mode == "none":
        return []
    if mode not in ("frustum", "all"):
        raise ValueError(f"unknown pooling mode: {mode!r}")
    positions = np.asarray(positions, dtype=np.float64)
    obs_xy = positions[observer_index]
    eligible = np.asarray(present, dtype=bool).copy()
    eligible[observer_index] = False
    if mode == "frustum":
        eligible &= _sector_mask(obs_xy, float(pans[observer_index]), positions, frustum)
    pairs: list[tuple[int, int]] = []
    for j in np.nonzero(eligible)[0]:
        cell = cell_index(positions[j, 0] - obs_xy[0], positions[j, 1] - obs_xy[1], grid)
        if cell is not None:
            pairs.append((int(j), cell[0] * grid.cells_per_side + cell[1]))
    return pairs


def pool_social_tensor(
    agent_id: int,
    agents: Mapping[int, AgentState],
    hidden_states: Mapping[int, np.ndarray],
    grid: PoolingGrid,
    frustum: FrustumSpec,
    mode: str,
    dim: int | None = None,
) -> np.ndarray:
    """Pooled hidden-state tensor of shape ``(N, N, D)`` for one agent.

    Cell ``(m, n)`` holds the sum of the hidden states of eligible
    neighbours whose relative displacement maps to that cell. ``dim``
    may be passed to fix ``D`` when the scene has no other agents.
    """
    if agent_id not in agents:
        raise ValueError(f"agent {agent_id} not present in scene")
    ids = sorted(agents)
    if dim is None:
        others = [i for i in ids if i != agent_id and i in hidden_states]
        if not others:
            raise ValueError("hidden-state dimension unknown; pass dim explicitly")
        dim = int(np.asarray(hidden_states[others[0]]).shape[0])
    positions = np.array([[agents[i].x, agents[i].y] for i in ids], dtype=np.float64)
    pans = np.array([agents[i].pan for i in ids], dtype=np.float64)
    present = np.ones(len(ids), dtype=bool)
    observer_index = ids.index(agent_id)
    out = np.zeros((grid.cells_per_side, grid.cells_per_side, dim))
    for j, flat in cell_assignments(
        observer_index, positions, pans, present, grid, frustum, mode
    ):
        other_id = ids[j]
        if other_id not in hidden_states:
            raise ValueError(f"missing hidden state for eligible agent {other_id}")
        vec = np.asarray(hidden_states[other_id], dtype=np.float64)
        if vec.shape != (dim,):
            raise ValueError(f"hidden state for agent {other_id} has shape {vec.shape}")
        m, n = divmod(flat, grid.cells_per_side)
        out[m, n] += vec
    return out
