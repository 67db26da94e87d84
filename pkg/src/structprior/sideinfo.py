"""Edge weights and directional projectors derived from a guide image."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffops import gradient
from .fields import Grid

__all__ = [
    "DegenerateInputError",
    "SideInformation",
    "normalize_side_info",
    "edge_weight",
    "edge_vector",
    "apply_D",
]


class DegenerateInputError(ValueError):
    """Raised for inputs without any structure (e.g. a constant guide image)."""


def _check_eta(eta: float) -> None:
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")


def normalize_side_info(v: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Scale ``v`` so that ``max |grad v| == 1``."""
    sup = np.max(np.linalg.norm(gradient(v, h), axis=-1))
    if sup == 0:
        raise DegenerateInputError("constant side information cannot be normalised")
    return v / sup


def _weight_from_grad(grad_v, eta):
    return eta / np.sqrt(eta**2 + np.sum(grad_v**2, axis=-1))


def _vector_from_grad(grad_v, eta):
    return grad_v / np.sqrt(eta**2 + np.sum(grad_v**2, axis=-1))[..., None]


def edge_weight(v: np.ndarray, eta: float, h: float = 1.0) -> np.ndarray:
    """``w = eta / sqrt(eta^2 + |grad v|^2)``, in ``(0, 1]``."""
    _check_eta(eta)
    return _weight_from_grad(gradient(v, h), eta)


def edge_vector(v: np.ndarray, eta: float, h: float = 1.0) -> np.ndarray:
    """``xi = grad v / sqrt(eta^2 + |grad v|^2)``, so that ``w^2 + |xi|^2 = 1``."""
    _check_eta(eta)
    return _vector_from_grad(gradient(v, h), eta)


@dataclass(frozen=True)
class SideInformation:
    """Guide image with its cached edge weight ``w`` and edge vectors ``xi``.

    Build instances with :meth:`from_image`; ``v`` is normalised there unless
    ``normalize=False`` (needed for constant guides, which cannot be
    normalised but are valid degenerate side information).
    """

    v: np.ndarray
    grid: Grid
    eta: float
    gamma: float
    grad_v: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)

    @classmethod
    def from_image(cls, v: np.ndarray, grid: Grid, eta: float = 0.1,
                   gamma: float = 1.0, normalize: bool = True) -> "SideInformation":
        _check_eta(eta)
        if not 0 < gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
        v = grid.check(np.asarray(v, dtype=float))
        if normalize:
            v = normalize_side_info(v, grid.h)
        grad_v = gradient(v, grid.h)
        for arr in (v, grad_v):
            arr.setflags(write=False)
        w = _weight_from_grad(grad_v, eta)
        xi = _vector_from_grad(grad_v, eta)
        w.setflags(write=False)
        xi.setflags(write=False)
        return cls(v, grid, eta, gamma, grad_v, w, xi)

    def apply_D(self, p: np.ndarray) -> np.ndarray:
        """``(I - gamma xi xi^T) p`` per pixel; self-adjoint."""
        return apply_D(self, p)


def apply_D(si: SideInformation, p: np.ndarray) -> np.ndarray:
    if p.shape != si.xi.shape:
        raise ValueError(f"grid mismatch: {p.shape} vs {si.xi.shape}")
    proj = np.sum(si.xi * p, axis=-1, keepdims=True)
    return p - si.gamma * proj * si.xi
