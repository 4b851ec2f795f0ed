"""Population rasters and per-face population mass.

A raster is stored in a small ESRI-like text format::

    ncols 4
    nrows 3
    xmin 0.0
    ymin 0.0
    cellsize 0.25
    <nrows lines of ncols values>

Rows are listed top to bottom, i.e. the first value row covers the largest y.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

_HEADER = ("ncols", "nrows", "xmin", "ymin", "cellsize")


@dataclass
class Raster:
    ncols: int
    nrows: int
    xmin: float
    ymin: float
    cellsize: float
    values: np.ndarray  # shape (nrows, ncols), row 0 is the top row

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.nrows, self.ncols)
        if self.cellsize <= 0:
            raise ConfigError("cellsize must be positive")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ConfigError("population values must be finite and non-negative")

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flattened (x, y, mass) arrays, one entry per cell."""
        cols = np.arange(self.ncols)
        rows = np.arange(self.nrows)
        xs = self.xmin + (cols + 0.5) * self.cellsize
        ys = self.ymin + (self.nrows - rows - 0.5) * self.cellsize
        gx, gy = np.meshgrid(xs, ys)
        return gx.ravel(), gy.ravel(), self.values.ravel()


def uniform_raster(xmin: float, ymin: float, xmax: float, ymax: float, n: int = 64,
                   density: float = 1.0) -> Raster:
    """Square-celled raster with ``n`` cells along the longer side."""
    cellsize = max(xmax - xmin, ymax - ymin) / n
    ncols = max(1, int(np.ceil((xmax - xmin) / cellsize - 1e-9)))
    nrows = max(1, int(np.ceil((ymax - ymin) / cellsize - 1e-9)))
    return Raster(ncols, nrows, xmin, ymin, cellsize, np.full((nrows, ncols), density))


def read_raster(path: str | Path) -> Raster:
    tokens = Path(path).read_text().split()
    header: dict[str, float] = {}
    pos = 0
    while pos < len(tokens) and tokens[pos].lower() in _HEADER:
        header[tokens[pos].lower()] = float(tokens[pos + 1])
        pos += 2
    missing = [k for k in _HEADER if k not in header]
    if missing:
        raise ConfigError(f"raster header missing {missing}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    body = tokens[pos:]
    if len(body) != ncols * nrows:
        raise ConfigError(f"raster expects {ncols * nrows} values, found {len(body)}")
    try:
        values = np.array([float(v) for v in body])
    except ValueError as exc:
        raise ConfigError(f"bad raster value: {exc}") from None
    return Raster(ncols, nrows, header["xmin"], header["ymin"], header["cellsize"], values)


def write_raster(raster: Raster, path: str | Path) -> None:
    lines = [
        f"ncols {raster.ncols}",
        f"nrows {raster.nrows}",
        f"xmin {raster.xmin!r}",
        f"ymin {raster.ymin!r}",
        f"cellsize {raster.cellsize!r}",
    ]
    for row in raster.values:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def points_in_triangle(px, py, a, b, c, eps: float = 1e-12) -> np.ndarray:
    """Boolean mask of points inside the closed triangle abc (any winding)."""
    def cross(p, q, x, y):
        return (q[0] - p[0]) * (y - p[1]) - (q[1] - p[1]) * (x - p[0])

    d1 = cross(a, b, px, py)
    d2 = cross(b, c, px, py)
    d3 = cross(c, a, px, py)
    scale = eps * max(abs(b[0] - a[0]) + abs(b[1] - a[1]), 1.0) ** 2
    has_neg = (d1 < -scale) | (d2 < -scale) | (d3 < -scale)
    has_pos = (d1 > scale) | (d2 > scale) | (d3 > scale)
    return ~(has_neg & has_pos)


class FaceMassIndex:
    """Caches which raster cells fall in each face.

    Children only test the cells of their parent, so the cost of a deep
    subdivision stays proportional to the parent's cell count.
    """

    def __init__(self, raster: Raster | None):
        self.raster = raster
        if raster is not None:
            self._x, self._y, self._m = raster.cell_centers()
        self._cells: dict[int, np.ndarray] = {}

    def mass(self, network, face_id: int) -> float:
        face = network.faces[face_id]
        a, b, c = (network.position(n) for n in face.corners)
        if self.raster is None:
            # exact uniform density: mass is the face area
            return abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) / 2.0
        return float(self._m[self._cells_of(network, face_id)].sum())

    def _cells_of(self, network, face_id: int) -> np.ndarray:
        if face_id in self._cells:
            return self._cells[face_id]
        face = network.faces[face_id]
        if face.parent is not None:
            candidates = self._cells_of(network, face.parent)
        else:
            candidates = np.arange(self._x.size)
        a, b, c = (network.position(n) for n in face.corners)
        inside = points_in_triangle(self._x[candidates], self._y[candidates], a, b, c)
        self._cells[face_id] = candidates[inside]
        return self._cells[face_id]
