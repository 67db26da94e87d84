"""Regular 2-D grids, field conventions and image I/O.

Fields are plain numpy arrays on a :class:`Grid`:

* image         ``(nx, ny)``
* vector field  ``(nx, ny, 2)``
* matrix field  ``(nx, ny, 2, 2)``, indexed ``[..., row, col]``

Axis 0 is the first physical coordinate ``x1`` and pixel ``(i, j)`` has its
centre at ``(x1_min + (i + 1/2) h, x2_min + (j + 1/2) h)``. A stacked variable
(e.g. ``(u, zeta)`` for the TGV family) is a tuple of such arrays.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Grid",
    "inner_product",
    "norm",
    "write_image",
    "read_image",
    "write_csv",
    "read_csv",
]


@dataclass(frozen=True)
class Grid:
    """Square-pixel grid on a rectangular domain.

    Parameters
    ----------
    nx, ny : int
        Pixel counts along the first and second axis.
    extent : tuple of float
        ``(x1_min, x1_max, x2_min, x2_max)``, default ``[-1, 1]^2``.
    """

    nx: int
    ny: int
    extent: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs at least 2x2 pixels, got {self.nx}x{self.ny}")
        x0, x1, y0, y1 = self.extent
        hx = (x1 - x0) / self.nx
        hy = (y1 - y0) / self.ny
        if hx <= 0 or hy <= 0:
            raise ValueError(f"degenerate extent {self.extent}")
        if not np.isclose(hx, hy, rtol=1e-12, atol=0.0):
            raise ValueError(f"non-square pixels: {hx} x {hy}")

    @classmethod
    def square(cls, n: int, half_width: float = 1.0) -> "Grid":
        return cls(n, n, (-half_width, half_width, -half_width, half_width))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def h(self) -> float:
        return (self.extent[1] - self.extent[0]) / self.nx

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def centres(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel-centre coordinates ``(X1, X2)`` as ``(nx, ny)`` arrays."""
        h = self.h
        x1 = self.extent[0] + (np.arange(self.nx) + 0.5) * h
        x2 = self.extent[2] + (np.arange(self.ny) + 0.5) * h
        return np.meshgrid(x1, x2, indexing="ij")

    def coarsen(self, factor: int) -> "Grid":
        if self.nx % factor or self.ny % factor:
            raise ValueError(f"factor {factor} does not divide {self.nx}x{self.ny}")
        return Grid(self.nx // factor, self.ny // factor, self.extent)

    def check(self, arr: np.ndarray, trailing: tuple[int, ...] = ()) -> np.ndarray:
        """Validate that ``arr`` is a field on this grid."""
        expected = self.shape + tuple(trailing)
        if arr.shape != expected:
            raise ValueError(f"expected field of shape {expected}, got {arr.shape}")
        return arr


def _as_tuple(a) -> tuple[np.ndarray, ...]:
    if isinstance(a, np.ndarray):
        return (a,)
    return tuple(a)


def inner_product(a, b, grid: Grid | None = None) -> float:
    """Grid-weighted l2 inner product ``h^2 * sum(a * b)``.

    ``a`` and ``b`` may be single arrays or stacked variables (sequences of
    arrays); stacked components are summed. Without a grid ``h = 1``.
    """
    a, b = _as_tuple(a), _as_tuple(b)
    if len(a) != len(b):
        raise ValueError(f"component count mismatch: {len(a)} vs {len(b)}")
    total = 0.0
    for ai, bi in zip(a, b):
        if ai.shape != bi.shape:
            raise ValueError(f"shape mismatch: {ai.shape} vs {bi.shape}")
        total += float(np.vdot(ai, bi))
    weight = 1.0 if grid is None else grid.cell_area
    return weight * total


def norm(a, grid: Grid | None = None) -> float:
    return float(np.sqrt(inner_product(a, a, grid)))


# -- 16-bit PGM ---------------------------------------------------------------

_MAXVAL = 65535


def write_image(img: np.ndarray, path, window: tuple[float, float]) -> None:
    """Write a 2-D array as binary 16-bit PGM (P5, big-endian).

    Values are mapped affinely from ``window = (lo, hi)`` onto ``[0, 65535]``
    and clipped. Row ``i`` of the file is ``img[i, :]``.
    """
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError(f"empty window {window}")
    scaled = np.rint((img - lo) / (hi - lo) * _MAXVAL)
    samples = np.clip(scaled, 0, _MAXVAL).astype(">u2")
    nrows, ncols = img.shape
    header = f"P5\n{ncols} {nrows}\n{_MAXVAL}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(samples.tobytes())


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("malformed PGM header: truncated")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates header and raster
    return tokens, pos + 1


def read_image(path, window: tuple[float, float] = (0.0, 1.0)) -> np.ndarray:
    """Read a binary PGM written by :func:`write_image`, undoing the window map."""
    data = Path(path).read_bytes()
    tokens, offset = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise ValueError(f"malformed PGM header: magic {tokens[0]!r}")
    try:
        ncols, nrows, maxval = (int(t) for t in tokens[1:])
    except ValueError as err:
        raise ValueError("malformed PGM header: non-integer field") from err
    if ncols <= 0 or nrows <= 0 or not 0 < maxval <= _MAXVAL:
        raise ValueError("malformed PGM header: bad dimensions or maxval")
    dtype = ">u2" if maxval > 255 else "u1"
    nbytes = nrows * ncols * np.dtype(dtype).itemsize
    raster = data[offset:offset + nbytes]
    if len(raster) != nbytes:
        raise ValueError("malformed PGM: raster shorter than header claims")
    samples = np.frombuffer(raster, dtype=dtype).reshape(nrows, ncols)
    lo, hi = window
    return lo + samples.astype(float) / maxval * (hi - lo)


# -- CSV ----------------------------------------------------------------------

def write_csv(path, header: Sequence[str], rows) -> None:
    """Comma-separated table with a header row and LF line endings."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
