"""Static-obstacle occupancy field with continuous bilinear queries.

The grid stores per-cell occupancy probabilities; queries interpolate
between the four surrounding cell centers and treat everything outside
the grid as fully occupied.  Grids load from PGM images (P2/P5, with a
JSON sidecar for resolution and origin) or plain CSV value grids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MapFormatError(ValueError):
    """Raised when a map file cannot be parsed."""


@dataclass(frozen=True)
class OccupancyGrid:
    """Rasterized p(occupied | position) over a rectangle of the plane.

    ``values[r, c]`` is the occupancy of the cell whose center sits at
    origin + ((c + 0.5) res, (r + 0.5) res); row 0 is the lowest-y row.
    """

    values: np.ndarray
    resolution: float
    origin: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        origin = np.asarray(self.origin, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("occupancy values must lie in [0, 1]")
        if self.resolution <= 0.0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if origin.shape != (2,):
            raise ValueError("origin must be a 2-D point")
        values.setflags(write=False)
        origin.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", origin)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the covered rectangle."""
        xmin, ymin = self.origin
        return (
            xmin,
            ymin,
            xmin + self.width * self.resolution,
            ymin + self.height * self.resolution,
        )


def query(grid: OccupancyGrid, points) -> np.ndarray:
    """Occupancy probability at world point(s) by bilinear interpolation.

    Points outside the grid rectangle return exactly 1.0 (occupied).
    Accepts a single (2,) point or any (..., 2) array of points.
    """
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)

    rel = (pts - grid.origin) / grid.resolution
    inside = (
        (rel[..., 0] >= 0.0)
        & (rel[..., 0] <= grid.width)
        & (rel[..., 1] >= 0.0)
        & (rel[..., 1] <= grid.height)
    )

    # Interpolate among cell centers; clamp so the outer half-cell band
    # extends the edge value (stays continuous up to the boundary).
    fx = np.clip(rel[..., 0] - 0.5, 0.0, grid.width - 1.0)
    fy = np.clip(rel[..., 1] - 0.5, 0.0, grid.height - 1.0)
    c0 = np.minimum(fx.astype(int), grid.width - 2) if grid.width > 1 else np.zeros_like(fx, dtype=int)
    r0 = np.minimum(fy.astype(int), grid.height - 2) if grid.height > 1 else np.zeros_like(fy, dtype=int)
    c1 = np.minimum(c0 + 1, grid.width - 1)
    r1 = np.minimum(r0 + 1, grid.height - 1)
    tx = fx - c0
    ty = fy - r0

    v = grid.values
    out = (
        v[r0, c0] * (1 - tx) * (1 - ty)
        + v[r0, c1] * tx * (1 - ty)
        + v[r1, c0] * (1 - tx) * ty
        + v[r1, c1] * tx * ty
    )
    out = np.where(inside, out, 1.0)
    return float(out[0]) if scalar else out


def _read_sidecar(path: Path) -> tuple[float, np.ndarray]:
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    if not meta_path.exists():
        return 1.0, np.zeros(2)
    with open(meta_path) as fh:
        meta = json.load(fh)
    return float(meta.get("resolution", 1.0)), np.asarray(meta.get("origin", [0.0, 0.0]), dtype=float)


def _load_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    pos = 0

    def next_token():
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MapFormatError(f"{path}: truncated header at byte {start}")
        return data[start:pos]

    magic = next_token()
    if magic not in (b"P2", b"P5"):
        raise MapFormatError(f"{path}: not a P2/P5 PGM (magic {magic!r} at byte 0)")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise MapFormatError(f"{path}: bad header value near byte {pos}") from exc
    if width <= 0 or height <= 0 or maxval <= 0:
        raise MapFormatError(f"{path}: nonpositive dimensions or maxval")

    n = width * height
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        bytes_per = 2 if maxval > 255 else 1
        raster = data[pos : pos + n * bytes_per]
        if len(raster) < n * bytes_per:
            raise MapFormatError(
                f"{path}: raster truncated at byte {pos + len(raster)} "
                f"(expected {n * bytes_per} raster bytes)"
            )
        dtype = ">u2" if bytes_per == 2 else "u1"
        pixels = np.frombuffer(raster, dtype=dtype, count=n).astype(float)
    else:
        pixels = np.empty(n)
        for i in range(n):
            try:
                pixels[i] = int(next_token())
            except MapFormatError:
                raise MapFormatError(
                    f"{path}: raster truncated at byte {pos} (got {i} of {n} values)"
                ) from None
    pixels = pixels.reshape(height, width)
    return 1.0 - pixels / maxval


def _load_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise MapFormatError(f"{path}:{lineno}: unparsable value ({exc})") from None
            for val in row:
                if not 0.0 <= val <= 1.0:
                    raise MapFormatError(f"{path}:{lineno}: value {val} outside [0, 1]")
            rows.append(row)
    if not rows:
        raise MapFormatError(f"{path}: empty grid")
    if len({len(r) for r in rows}) != 1:
        raise MapFormatError(f"{path}: ragged rows")
    return np.asarray(rows)


def load(path, fmt: str | None = None) -> OccupancyGrid:
    """Load an occupancy grid from a PGM or CSV file.

    ``fmt`` is "pgm" or "csv"; inferred from the extension when omitted.
    PGM pixel values map to occupancy as 1 - pixel/maxval (white = free);
    CSV values are occupancy probabilities used directly.  Resolution and
    origin come from an optional ``<file>.meta.json`` sidecar.
    """
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt not in ("pgm", "csv"):
        raise MapFormatError(f"unknown map format {fmt!r} (expected pgm or csv)")
    values = _load_pgm(path) if fmt == "pgm" else _load_csv(path)
    resolution, origin = _read_sidecar(path)
    return OccupancyGrid(values=values, resolution=resolution, origin=origin)
