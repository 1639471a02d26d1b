"""Uniform cell grid with the medium interface pinned on a cell face."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GridMismatchError

__all__ = ["Grid", "Field", "make_grid", "make_field"]


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [x_min, x_max] into n_cells cells.

    interface_face is the face index sitting exactly at x = 0; cells
    [0, interface_face) belong to medium 1, the rest to medium 2.
    """

    x_min: float
    x_max: float
    n_cells: int
    dx: float
    interface_face: int

    @property
    def cell_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_cells + 1) * self.dx

    def side_slices(self):
        """(medium-1 cells, medium-2 cells) as slices."""
        return slice(0, self.interface_face), slice(self.interface_face, self.n_cells)


def make_grid(x_min: float, x_max: float, n_cells: int) -> Grid:
    x_min, x_max = float(x_min), float(x_max)
    n_cells = int(n_cells)
    if not (x_min < 0.0 < x_max):
        raise GridMismatchError(f"grid must straddle x=0, got [{x_min}, {x_max}]")
    if n_cells < 4 or n_cells % 2 != 0:
        raise GridMismatchError(f"n_cells must be an even count >= 4, got {n_cells}")
    dx = (x_max - x_min) / n_cells
    ratio = -x_min / dx
    interface_face = int(round(ratio))
    if abs(ratio - interface_face) > 1e-9:
        raise GridMismatchError(
            f"x=0 must lie on a cell face: -x_min/dx = {ratio!r} is not an integer"
        )
    if interface_face < 2 or interface_face > n_cells - 2:
        raise GridMismatchError("each medium needs at least two cells")
    return Grid(x_min=x_min, x_max=x_max, n_cells=n_cells, dx=dx,
                interface_face=interface_face)


@dataclass(frozen=True)
class Field:
    """Cell-averaged saturations at one time."""

    values: np.ndarray
    time: float

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]


def make_field(values, time: float = 0.0, grid: Grid | None = None) -> Field:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise DomainError("field values must be a 1-D array of cell averages")
    if grid is not None and arr.shape[0] != grid.n_cells:
        raise GridMismatchError(
            f"field has {arr.shape[0]} cells, grid has {grid.n_cells}"
        )
    if arr.size and (arr.min() < -1e-12 or arr.max() > 1 + 1e-12):
        raise DomainError(
            f"saturations must lie in [0,1]; range is [{arr.min()!r}, {arr.max()!r}]"
        )
    np.clip(arr, 0.0, 1.0, out=arr)
    arr.flags.writeable = False
    return Field(values=arr, time=float(time))
