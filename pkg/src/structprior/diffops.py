"""Finite differences with Neumann boundary and Jacobian diagnostics.

Forward differences are used throughout; the last difference along each
axis is zero. ``divergence`` and ``sym_divergence`` are the exact negative
transposes of ``gradient`` and ``sym_gradient``, so for any ``u, p``::

    vdot(gradient(u, h), p) == -vdot(u, divergence(p, h))

up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "gradient",
    "divergence",
    "sym_gradient",
    "sym_divergence",
    "jacobian",
    "jacobian_det",
    "singular_values",
    "SimilarityReport",
    "similarity_report",
]


def _fdiff(u: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(u)
    n = u.shape[axis]
    hi = [slice(None)] * u.ndim
    lo = [slice(None)] * u.ndim
    hi[axis] = slice(1, n)
    lo[axis] = slice(0, n - 1)
    out[tuple(lo)] = (u[tuple(hi)] - u[tuple(lo)]) / h
    return out


def _fdiff_t(p: np.ndarray, axis: int, h: float) -> np.ndarray:
    # transpose of _fdiff: p[n-1] is never read by the forward operator
    out = np.zeros_like(p)
    n = p.shape[axis]

    def sl(a, b):
        s = [slice(None)] * p.ndim
        s[axis] = slice(a, b)
        return tuple(s)

    out[sl(0, n - 1)] -= p[sl(0, n - 1)]
    out[sl(1, n)] += p[sl(0, n - 1)]
    return out / h


def gradient(u: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Forward-difference gradient, shape ``(nx, ny, 2)``."""
    return np.stack([_fdiff(u, 0, h), _fdiff(u, 1, h)], axis=-1)


def divergence(p: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Negative adjoint of :func:`gradient`."""
    return -(_fdiff_t(p[..., 0], 0, h) + _fdiff_t(p[..., 1], 1, h))


def sym_gradient(zeta: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Symmetrised gradient ``(d_i z_j + d_j z_i) / 2``, shape ``(nx, ny, 2, 2)``."""
    d = np.empty(zeta.shape[:2] + (2, 2), dtype=zeta.dtype)
    for i in range(2):
        for j in range(2):
            d[..., i, j] = _fdiff(zeta[..., j], i, h)
    return 0.5 * (d + np.swapaxes(d, -1, -2))


def sym_divergence(m: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Negative adjoint of :func:`sym_gradient` for arbitrary (not only
    symmetric) matrix fields."""
    s = 0.5 * (m + np.swapaxes(m, -1, -2))
    out = np.zeros(m.shape[:2] + (2,), dtype=m.dtype)
    for j in range(2):
        for i in range(2):
            out[..., j] -= _fdiff_t(s[..., i, j], i, h)
    return out


def jacobian(u: np.ndarray, v: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Jacobian of ``z = [u, v]``; ``J[..., k, c]`` is ``d_k`` of channel ``c``."""
    if u.shape != v.shape:
        raise ValueError(f"grid mismatch: {u.shape} vs {v.shape}")
    return np.stack([gradient(u, h), gradient(v, h)], axis=-1)


def _check_jacobian(J: np.ndarray) -> None:
    if J.ndim < 2 or J.shape[-1] != 2 or J.shape[-2] not in (2, 3):
        raise ValueError(f"expected a field of d x 2 matrices, got shape {J.shape}")


def _cross_sq(J: np.ndarray) -> np.ndarray:
    # |c0|^2 |c1|^2 - <c0, c1>^2 via the Lagrange identity, nonnegative by construction
    a, b = J[..., 0], J[..., 1]
    if J.shape[-2] == 2:
        return (a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]) ** 2
    return np.sum(np.cross(a, b) ** 2, axis=-1)


def jacobian_det(J: np.ndarray) -> np.ndarray:
    """Per-pixel ``det(J^T J) = |grad u|^2 |grad v|^2 - <grad u, grad v>^2``."""
    _check_jacobian(J)
    det = _cross_sq(J)
    return np.where((det < 0) & (det > -1e-14), 0.0, det)


def singular_values(J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Singular values ``s1 >= s2 >= 0`` of a field of ``d x 2`` matrices.

    ``s1^2`` is the larger root of ``t^2 - |J|^2 t + det(J^T J)``; the smaller
    value is recovered as ``sqrt(det) / s1`` to avoid cancellation.
    """
    _check_jacobian(J)
    g = np.einsum("...ki,...kj->...ij", J, J)
    half_tr = 0.5 * (g[..., 0, 0] + g[..., 1, 1])
    half_diff = 0.5 * (g[..., 0, 0] - g[..., 1, 1])
    lam1 = half_tr + np.hypot(half_diff, g[..., 0, 1])
    s1 = np.sqrt(lam1)
    root_det = np.sqrt(_cross_sq(J))
    with np.errstate(invalid="ignore", divide="ignore"):
        s2 = np.where(s1 > 0, root_det / np.where(s1 > 0, s1, 1.0), 0.0)
    return s1, np.minimum(s2, s1)


@dataclass
class SimilarityReport:
    """Edge-set and parallel-level-set diagnostics for a pair of images."""

    edge_set_u: np.ndarray
    edge_set_v: np.ndarray
    jaccard: float
    det_field: np.ndarray
    sigma2_field: np.ndarray
    parallel_fraction: float


def similarity_report(u: np.ndarray, v: np.ndarray, eps: float | None = None,
                      h: float = 1.0) -> SimilarityReport:
    """Compare the structure of ``u`` and ``v``.

    A pixel belongs to an edge set when the gradient magnitude exceeds
    ``eps`` (default ``1e-8`` times the largest gradient magnitude of the
    pair). ``parallel_fraction`` is the fraction of pixels in both edge sets
    at which the second singular value of the Jacobian is at most ``eps``
    (1 when the edge sets do not meet).
    """
    J = jacobian(u, v, h)
    mag_u = np.linalg.norm(J[..., 0], axis=-1)
    mag_v = np.linalg.norm(J[..., 1], axis=-1)
    if eps is None:
        eps = 1e-8 * max(mag_u.max(), mag_v.max())
    elif eps <= 0:
        raise ValueError("eps must be positive")
    edge_u = mag_u > eps
    edge_v = mag_v > eps
    union = np.count_nonzero(edge_u | edge_v)
    inter = np.count_nonzero(edge_u & edge_v)
    jaccard = 1.0 if union == 0 else inter / union
    _, s2 = singular_values(J)
    both = edge_u & edge_v
    if inter == 0:
        parallel = 1.0
    else:
        parallel = np.count_nonzero((s2 <= eps) & both) / inter
    return SimilarityReport(edge_u, edge_v, jaccard, jacobian_det(J), s2, parallel)
