from fractions import Fraction
from typing import Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from helpers.errors import GridError


def double_node(nodes: np.ndarray, tau) -> int:
    """Index of the tau- entry of the repeated node at tau."""
    hits = np.flatnonzero(np.isclose(nodes, float(tau), rtol=0.0, atol=1e-12))
    if len(hits) != 2 or hits[1] != hits[0] + 1:
        raise GridError(f"grid has no double node at tau={tau}")
    return int(hits[0])


class Grid(BaseModel):
    """Node entries on [0,1]; every impulse point appears twice (tau- then tau+)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    nodes: np.ndarray
    taus: Tuple[Fraction, ...]
    n: int

    def left_index(self, tau) -> int:
        return double_node(self.nodes, tau)

    def right_index(self, tau) -> int:
        return self.left_index(tau) + 1

    def pieces(self) -> list:
        """(start, stop) entry slices of the smooth pieces between double nodes."""
        cuts = sorted(self.left_index(tau) for tau in self.taus)
        starts = [0] + [c + 1 for c in cuts]
        stops = [c + 1 for c in cuts] + [len(self.nodes)]
        return list(zip(starts, stops))

    @classmethod
    def from_nodes(cls, nodes: Sequence[float], taus: Sequence[Fraction], n: int = 0) -> "Grid":
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 3:
            raise GridError("grid needs at least three node entries")
        if np.any(np.diff(nodes) < 0):
            raise GridError("grid nodes must be nondecreasing")
        if not np.isclose(nodes[0], 0.0) or not np.isclose(nodes[-1], 1.0):
            raise GridError("grid must span [0, 1]")
        grid = cls(nodes=nodes, taus=tuple(sorted(set(taus))), n=n)
        duplicates = int(np.sum(np.diff(nodes) == 0))
        if duplicates != len(grid.taus):
            raise GridError(f"grid has {duplicates} repeated node(s) but {len(grid.taus)} impulse point(s)")
        for tau in grid.taus:
            grid.left_index(tau)
        return grid


class PiecewiseGridFunction(BaseModel):
    """Piecewise linear function on a Grid; at a double node the value is the left one."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    nodes: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        raw = np.searchsorted(self.nodes, t, side="left")
        idx = np.clip(raw, 1, len(self.nodes) - 1)
        x0, x1 = self.nodes[idx - 1], self.nodes[idx]
        y0, y1 = self.values[idx - 1], self.values[idx]
        width = np.where(x1 > x0, x1 - x0, 1.0)
        out = y0 + (y1 - y0) * (t - x0) / width
        hit = (raw < len(self.nodes)) & (self.nodes[np.minimum(raw, len(self.nodes) - 1)] == t)
        out = np.where(hit, self.values[np.minimum(raw, len(self.nodes) - 1)], out)
        return float(out[0]) if scalar else out

    def left(self, tau) -> float:
        return float(self.values[double_node(self.nodes, tau)])

    def right(self, tau) -> float:
        return float(self.values[double_node(self.nodes, tau) + 1])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def window_min(self, a, b) -> float:
        a, b = float(a), float(b)
        inside = self.values[(self.nodes >= a) & (self.nodes <= b)]
        ends = [self(a), self(b)]
        return float(min(np.min(inside), *ends)) if inside.size else float(min(ends))

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "PiecewiseGridFunction":
        return cls(nodes=grid.nodes, values=np.asarray(fn(grid.nodes), dtype=float))

    @classmethod
    def constant(cls, grid: Grid, value) -> "PiecewiseGridFunction":
        return cls(nodes=grid.nodes, values=np.full(len(grid.nodes), float(value)))


def build_grid(taus: Sequence[Fraction], n: int) -> Grid:
    """n uniform panels on [0, tau] and on [tau, 1] for every tau, merged into one node set."""
    if n < 8:
        raise GridError(f"need at least 8 panels per smooth piece, got {n}")
    taus = sorted({Fraction(t) for t in taus})
    for tau in taus:
        if not 0 < tau < 1:
            raise GridError(f"impulse point {tau} is not interior to (0, 1)")

    positions = {Fraction(0), Fraction(1)}
    for tau in taus:
        positions.update(tau * k / n for k in range(n + 1))
        positions.update(tau + (1 - tau) * k / n for k in range(n + 1))
    if not taus:
        positions.update(Fraction(k, n) for k in range(n + 1))

    entries = []
    for x in sorted(positions):
        entries.append(float(x))
        if x in taus:
            entries.append(float(x))
    return Grid(nodes=np.array(entries), taus=tuple(taus), n=n)
