"""Forward operators for the two test problems, noise models and norm estimation.

The Radon transform is assembled once per geometry as a sparse matrix using
Joseph's method; its adjoint is the exact matrix transpose. Sinograms are
``(n_views, n_detectors)`` arrays holding line integrals in physical units.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .fields import Grid, write_csv

__all__ = [
    "RadonGeometry",
    "RadonTransform",
    "radon_forward",
    "radon_adjoint",
    "SuperResGeometry",
    "downsample",
    "upsample_adjoint",
    "SaltPepperNoise",
    "GaussianNoise",
    "add_noise",
    "power_method",
    "write_sinogram",
]


@dataclass(frozen=True)
class RadonGeometry:
    """Parallel-beam geometry with ``n_views`` angles equispaced in ``[0, pi)``.

    The detector array of total width ``detector_span`` is centred on the
    origin; bin ``k`` measures the ray at offset
    ``-span/2 + (k + 1/2) * span / n_detectors``.
    """

    n_views: int = 15
    n_detectors: int = 100
    detector_span: float = 3.0

    def __post_init__(self):
        if self.n_views < 1 or self.n_detectors < 1:
            raise ValueError("need at least one view and one detector")
        if not self.detector_span > 0:
            raise ValueError("detector_span must be positive")

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.n_views) * np.pi / self.n_views

    @property
    def bin_width(self) -> float:
        return self.detector_span / self.n_detectors

    @property
    def offsets(self) -> np.ndarray:
        return -0.5 * self.detector_span + (np.arange(self.n_detectors) + 0.5) * self.bin_width

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_views, self.n_detectors)


def _joseph_view(grid: Grid, theta: float, offsets: np.ndarray):
    """Row/column/weight triplets of one view (rows are detector indices)."""
    h = grid.h
    e = np.array([np.cos(theta), np.sin(theta)])      # detector axis
    r = np.array([-np.sin(theta), np.cos(theta)])     # ray direction
    lo = (grid.extent[0], grid.extent[2])
    n = grid.shape
    drive = 1 if abs(r[1]) >= abs(r[0]) else 0
    other = 1 - drive
    # one sample per pixel layer along the driving axis
    c_drive = lo[drive] + (np.arange(n[drive]) + 0.5) * h
    t = offsets[:, None]
    s = (c_drive[None, :] - t * e[drive]) / r[drive]
    pos = t * e[other] + s * r[other]
    fidx = (pos - lo[other]) / h - 0.5
    i0 = np.floor(fidx).astype(int)
    frac = fidx - i0
    step = h / abs(r[drive])
    det = np.broadcast_to(np.arange(len(offsets))[:, None], fidx.shape)
    layer = np.broadcast_to(np.arange(n[drive])[None, :], fidx.shape)

    rows, cols, vals = [], [], []
    for idx, wgt in ((i0, (1.0 - frac) * step), (i0 + 1, frac * step)):
        ok = (idx >= 0) & (idx < n[other]) & (wgt != 0)
        ii = idx[ok] if other == 0 else layer[ok]
        jj = layer[ok] if other == 0 else idx[ok]
        rows.append(det[ok])
        cols.append(ii * grid.ny + jj)
        vals.append(wgt[ok])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


class RadonTransform:
    """Discrete parallel-beam projector ``image (nx, ny) -> sinogram``."""

    def __init__(self, grid: Grid, geometry: RadonGeometry):
        self.grid = grid
        self.geometry = geometry

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        g = self.geometry
        rows, cols, vals = [], [], []
        for v, theta in enumerate(g.angles):
            r, c, w = _joseph_view(self.grid, theta, g.offsets)
            rows.append(r + v * g.n_detectors)
            cols.append(c)
            vals.append(w)
        shape = (g.n_views * g.n_detectors, self.grid.nx * self.grid.ny)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=shape)

    @cached_property
    def _matrix_t(self) -> sp.csr_matrix:
        return self.matrix.T.tocsr()

    def __call__(self, u: np.ndarray) -> np.ndarray:
        self.grid.check(u)
        return (self.matrix @ u.ravel()).reshape(self.geometry.shape)

    def adjoint(self, s: np.ndarray) -> np.ndarray:
        if s.shape != self.geometry.shape:
            raise ValueError(f"expected sinogram of shape {self.geometry.shape}, got {s.shape}")
        return (self._matrix_t @ s.ravel()).reshape(self.grid.shape)


def radon_forward(u: np.ndarray, grid: Grid, geometry: RadonGeometry) -> np.ndarray:
    return RadonTransform(grid, geometry)(u)


def radon_adjoint(s: np.ndarray, grid: Grid, geometry: RadonGeometry) -> np.ndarray:
    return RadonTransform(grid, geometry).adjoint(s)


def write_sinogram(path, sino: np.ndarray, geometry: RadonGeometry) -> None:
    """One CSV row per view: angle followed by the detector readings."""
    header = ["angle"] + [f"d{k}" for k in range(geometry.n_detectors)]
    rows = ([repr(float(a))] + [repr(float(x)) for x in row]
            for a, row in zip(geometry.angles, sino))
    write_csv(path, header, rows)


# -- super-resolution ----------------------------------------------------------

@dataclass(frozen=True)
class SuperResGeometry:
    factor: int = 5

    def __post_init__(self):
        if self.factor < 1:
            raise ValueError("factor must be a positive integer")

    def output_shape(self, shape: tuple[int, int]) -> tuple[int, int]:
        nx, ny = shape
        if nx % self.factor or ny % self.factor:
            raise ValueError(f"factor {self.factor} does not divide {nx}x{ny}")
        return nx // self.factor, ny // self.factor


def downsample(u: np.ndarray, geometry: SuperResGeometry) -> np.ndarray:
    """Mean over non-overlapping ``factor x factor`` blocks."""
    f = geometry.factor
    mx, my = geometry.output_shape(u.shape)
    return u.reshape(mx, f, my, f).mean(axis=(1, 3))


def upsample_adjoint(y: np.ndarray, geometry: SuperResGeometry) -> np.ndarray:
    """Transpose of :func:`downsample`: replicate each value and divide by ``factor^2``."""
    f = geometry.factor
    return np.repeat(np.repeat(y, f, axis=0), f, axis=1) / (f * f)


# -- noise ---------------------------------------------------------------------

@dataclass(frozen=True)
class SaltPepperNoise:
    """Replace ``floor(fraction * N)`` distinct entries by ``lo`` or ``hi``
    (each with probability 1/2). ``lo``/``hi`` default to the data range."""

    fraction: float = 0.05
    lo: float | None = None
    hi: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.fraction <= 1:
            raise ValueError(f"fraction must lie in [0, 1], got {self.fraction}")


@dataclass(frozen=True)
class GaussianNoise:
    mean: float = 0.0
    stddev: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.stddev < 0:
            raise ValueError("stddev must be nonnegative")


def add_noise(data: np.ndarray, spec) -> np.ndarray:
    """Return a noisy copy of ``data``; deterministic for a fixed ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    out = np.array(data, dtype=float, copy=True)
    if isinstance(spec, SaltPepperNoise):
        n = int(np.floor(spec.fraction * out.size))
        if n == 0:
            return out
        lo = float(out.min()) if spec.lo is None else spec.lo
        hi = float(out.max()) if spec.hi is None else spec.hi
        idx = rng.choice(out.size, size=n, replace=False)
        flat = out.reshape(-1)
        flat[idx] = np.where(rng.random(n) < 0.5, lo, hi)
        return out
    if isinstance(spec, GaussianNoise):
        if spec.stddev == 0 and spec.mean == 0:
            return out
        return out + rng.normal(spec.mean, spec.stddev, size=out.shape)
    raise TypeError(f"unknown noise spec {spec!r}")


# -- operator norm -------------------------------------------------------------

def _random_like(domain, rng):
    if isinstance(domain[0], (tuple, list)):
        return tuple(rng.standard_normal(s) for s in domain)
    return rng.standard_normal(domain)


def _sq_norm(x) -> float:
    if isinstance(x, tuple):
        return sum(float(np.vdot(c, c)) for c in x)
    return float(np.vdot(x, x))


def _scale(x, a):
    if isinstance(x, tuple):
        return tuple(a * c for c in x)
    return a * x


def power_method(forward, adjoint, domain, iters: int = 500, seed: int = 0,
                 rtol: float = 1e-6) -> float:
    """Largest singular value of ``forward`` by power iteration on ``A^T A``.

    ``domain`` is an array shape, or a sequence of shapes for stacked
    variables (then ``forward`` takes and ``adjoint`` returns tuples).
    Iteration stops once the estimate changes by less than ``rtol``
    (relative) or after ``iters`` steps.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    x = _random_like(domain, rng)
    x = _scale(x, 1.0 / np.sqrt(_sq_norm(x)))
    est = 0.0
    for _ in range(iters):
        z = adjoint(forward(x))
        nz = np.sqrt(_sq_norm(z))
        if nz == 0:
            return 0.0
        new = np.sqrt(nz)
        x = _scale(z, 1.0 / nz)
        if est > 0 and abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return float(est)
