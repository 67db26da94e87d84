"""Proximal operators of the functionals used by the composite problems.

Every functional ``F`` provides

* ``F(y)``               its value (``inf`` outside an indicator's domain),
* ``F.prox(z, sigma)``   ``argmin_x 1/2 |x - z|^2 + sigma F(x)``,
* ``F.convex_conj(p)``   the value of the convex conjugate ``F^*``.

All norms are plain Euclidean sums over array entries; discretisation
weights such as the pixel area are folded into ``weight``. Group norms act
on the trailing one (vector fields) or two (matrix fields) axes.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Functional",
    "SquaredNorm",
    "GroupL1",
    "NuclearL1",
    "QuadraticFidelity",
    "RobustL1Fidelity",
    "NonnegIndicator",
    "Zero",
    "Scaled",
    "prox",
    "prox_shifted",
    "conjugate_prox",
    "svd_2col",
]

# slack on norm-ball and sign constraints when evaluating conjugates
CONSTRAINT_TOL = 1e-9


def _check_sigma(sigma) -> None:
    if not np.all(np.asarray(sigma) > 0):
        raise ValueError(f"step size must be positive, got {sigma}")


def _check_shape(z: np.ndarray, ref: np.ndarray | None, what: str) -> None:
    if ref is not None and np.shape(z) != np.shape(ref):
        raise ValueError(f"{what} shape {np.shape(ref)} does not match operand {np.shape(z)}")


class Functional:
    """Base class; subclasses implement ``__call__``, ``prox`` and ``convex_conj``."""

    def __call__(self, y: np.ndarray) -> float:
        raise NotImplementedError

    def prox(self, z: np.ndarray, sigma: float) -> np.ndarray:
        raise NotImplementedError

    def convex_conj(self, p: np.ndarray) -> float:
        raise NotImplementedError

    def conj_prox(self, y: np.ndarray, sigma: float) -> np.ndarray:
        return conjugate_prox(self, y, sigma)

    def convex_conj_at(self, p: np.ndarray, x: np.ndarray) -> float:
        """Conjugate value with tolerated constraint violations charged at ``x``.

        Used for the simple term of a primal-dual gap: plain ``convex_conj``
        unless the functional is an indicator with an unbounded domain.
        """
        return self.convex_conj(p)


class SquaredNorm(Functional):
    """``weight * |y|_2^2``."""

    def __init__(self, weight: float = 1.0):
        if weight < 0:
            raise ValueError("weight must be nonnegative")
        self.weight = float(weight)

    def __repr__(self):
        return f"SquaredNorm(weight={self.weight:g})"

    def __call__(self, y):
        return self.weight * float(np.vdot(y, y))

    def prox(self, z, sigma):
        _check_sigma(sigma)
        return z / (1.0 + 2.0 * sigma * self.weight)

    def convex_conj(self, p):
        if self.weight == 0:
            return 0.0 if not np.any(p) else np.inf
        return float(np.vdot(p, p)) / (4.0 * self.weight)


class _ShiftedNorm(Functional):
    """Common machinery for ``weight * sum_pixels N(y - shift)``."""

    group_ndim = 1

    def __init__(self, weight: float = 1.0, shift: np.ndarray | None = None):
        if weight < 0:
            raise ValueError("weight must be nonnegative")
        self.weight = float(weight)
        self.shift = None if shift is None else np.asarray(shift, dtype=float)

    def __repr__(self):
        s = "" if self.shift is None else ", shifted"
        return f"{type(self).__name__}(weight={self.weight:g}{s})"

    def _centre(self, y):
        _check_shape(y, self.shift, "shift")
        return y if self.shift is None else y - self.shift

    def _pixel_norm(self, y):
        raise NotImplementedError

    def _dual_norm(self, p):
        raise NotImplementedError

    def _prox_unshifted(self, z, t):
        raise NotImplementedError

    def __call__(self, y):
        return self.weight * float(np.sum(self._pixel_norm(self._centre(y))))

    def prox(self, z, sigma):
        _check_sigma(sigma)
        if self.shift is None:
            return self._prox_unshifted(z, sigma * self.weight)
        return prox_shifted(lambda q: self._prox_unshifted(q, sigma * self.weight),
                            z, self.shift)

    def convex_conj(self, p):
        excess = self._dual_norm(p) - self.weight
        if np.any(excess > CONSTRAINT_TOL * max(1.0, self.weight)):
            return np.inf
        return 0.0 if self.shift is None else float(np.vdot(p, self.shift))


class GroupL1(_ShiftedNorm):
    """``weight * sum_pixels |y(x) - shift(x)|`` with the Euclidean/Frobenius
    norm over the trailing ``group_ndim`` axes."""

    def __init__(self, weight: float = 1.0, shift: np.ndarray | None = None,
                 group_ndim: int = 1):
        super().__init__(weight, shift)
        if group_ndim not in (1, 2):
            raise ValueError("group_ndim must be 1 or 2")
        self.group_ndim = group_ndim

    def _axes(self):
        return tuple(range(-self.group_ndim, 0))

    def _pixel_norm(self, y):
        return np.sqrt(np.sum(y * y, axis=self._axes()))

    _dual_norm = _pixel_norm

    def _prox_unshifted(self, z, t):
        mag = np.sqrt(np.sum(z * z, axis=self._axes(), keepdims=True))
        # zero vectors map to zero
        scale = np.maximum(0.0, 1.0 - t / np.where(mag > 0, mag, np.inf))
        return z * scale


class NuclearL1(_ShiftedNorm):
    """``weight * sum_pixels |y(x) - shift(x)|_*`` for fields of ``d x 2``
    matrices (sum of singular values per pixel)."""

    group_ndim = 2

    def _pixel_norm(self, y):
        _, s1, s2, _ = svd_2col(y)
        return s1 + s2

    def _dual_norm(self, p):
        return svd_2col(p)[1]

    def _prox_unshifted(self, z, t):
        _, s1, s2, V = svd_2col(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            c1 = np.where(s1 > 0, np.maximum(0.0, 1.0 - t / s1), 0.0)
            c2 = np.where(s2 > 0, np.maximum(0.0, 1.0 - t / s2), 0.0)
        v1, v2 = V[..., 0], V[..., 1]
        # M (c1 v1 v1^T + c2 v2 v2^T) == U diag(shrunk) V^T
        P = (c1[..., None, None] * v1[..., :, None] * v1[..., None, :]
             + c2[..., None, None] * v2[..., :, None] * v2[..., None, :])
        return np.einsum("...ij,...jk->...ik", z, P)


class QuadraticFidelity(Functional):
    """``weight / 2 * |y - data|^2``."""

    def __init__(self, data: np.ndarray, weight: float = 1.0):
        if not weight > 0:
            raise ValueError("fidelity weight must be positive")
        self.data = np.asarray(data, dtype=float)
        self.weight = float(weight)

    def __repr__(self):
        return f"QuadraticFidelity(weight={self.weight:g})"

    def __call__(self, y):
        r = y - self.data
        return 0.5 * self.weight * float(np.vdot(r, r))

    def prox(self, z, sigma):
        _check_sigma(sigma)
        _check_shape(z, self.data, "data")
        sw = sigma * self.weight
        return (z + sw * self.data) / (1.0 + sw)

    def convex_conj(self, p):
        return float(np.vdot(p, self.data)) + float(np.vdot(p, p)) / (2.0 * self.weight)


class RobustL1Fidelity(Functional):
    """``weight * |y - data|_1``."""

    def __init__(self, data: np.ndarray, weight: float = 1.0):
        if not weight > 0:
            raise ValueError("fidelity weight must be positive")
        self.data = np.asarray(data, dtype=float)
        self.weight = float(weight)

    def __repr__(self):
        return f"RobustL1Fidelity(weight={self.weight:g})"

    def __call__(self, y):
        return self.weight * float(np.sum(np.abs(y - self.data)))

    def prox(self, z, sigma):
        _check_sigma(sigma)
        _check_shape(z, self.data, "data")
        r = z - self.data
        t = sigma * self.weight
        return self.data + np.sign(r) * np.maximum(np.abs(r) - t, 0.0)

    def convex_conj(self, p):
        if np.any(np.abs(p) - self.weight > CONSTRAINT_TOL * max(1.0, self.weight)):
            return np.inf
        return float(np.vdot(p, self.data))


class NonnegIndicator(Functional):
    """Indicator of the nonnegative orthant."""

    def __repr__(self):
        return "NonnegIndicator()"

    def __call__(self, y):
        return 0.0 if np.all(y >= 0) else np.inf

    def prox(self, z, sigma):
        _check_sigma(sigma)
        return np.maximum(z, 0.0)

    def convex_conj(self, p):
        return 0.0 if np.all(p <= CONSTRAINT_TOL) else np.inf

    def convex_conj_at(self, p, x):
        c = self.convex_conj(p)
        return c if not np.isfinite(c) else float(np.vdot(np.maximum(p, 0.0), x))


class Zero(Functional):
    def __repr__(self):
        return "Zero()"

    def __call__(self, y):
        return 0.0

    def prox(self, z, sigma):
        _check_sigma(sigma)
        return z

    def convex_conj(self, p):
        return 0.0 if np.all(np.abs(p) <= CONSTRAINT_TOL) else np.inf

    def convex_conj_at(self, p, x):
        c = self.convex_conj(p)
        return c if not np.isfinite(c) else float(np.vdot(p, x))


class Scaled(Functional):
    """``y -> inner(scale * y)``, the prewhitened form of ``inner``.

    Its prox follows ``prox_{s G}(y) = prox_{s scale^2 inner}(scale y) / scale``.
    """

    def __init__(self, inner: Functional, scale: float):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.inner = inner
        self.scale = float(scale)

    def __repr__(self):
        return f"Scaled({self.inner!r}, scale={self.scale:g})"

    def __call__(self, y):
        return self.inner(self.scale * y)

    def prox(self, z, sigma):
        _check_sigma(sigma)
        lam = self.scale
        return self.inner.prox(lam * z, sigma * lam * lam) / lam

    def convex_conj(self, p):
        return self.inner.convex_conj(p / self.scale)


def prox(F: Functional, z: np.ndarray, sigma: float) -> np.ndarray:
    """``argmin_x 1/2 |x - z|^2 + sigma F(x)``."""
    return F.prox(z, sigma)


def prox_shifted(prox_fn, z: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Prox of ``F(. - shift)`` from the prox of ``F``: ``shift + prox(z - shift)``."""
    _check_shape(z, shift, "shift")
    return shift + prox_fn(z - shift)


def conjugate_prox(F: Functional, y: np.ndarray, sigma: float) -> np.ndarray:
    """Prox of ``sigma F^*`` by Moreau decomposition."""
    _check_sigma(sigma)
    return y - sigma * F.prox(y / sigma, 1.0 / sigma)


def svd_2col(M: np.ndarray):
    """Closed-form thin SVD of a field of ``d x 2`` matrices, ``d in {2, 3}``.

    Returns ``U (..., d, 2)``, ``s1``, ``s2`` and ``V (..., 2, 2)`` with
    ``M = U diag(s1, s2) V^T`` and ``s1 >= s2 >= 0``. Right singular vectors
    have their first nonzero entry positive. ``V`` comes from the eigenvectors
    of ``M^T M`` and ``s2 = |m_0 x m_1| / s1`` (Lagrange identity).
    """
    M = np.asarray(M, dtype=float)
    d = M.shape[-2]
    if M.shape[-1] != 2 or d not in (2, 3):
        raise ValueError(f"expected d x 2 matrices with d in (2, 3), got {M.shape}")
    m0, m1 = M[..., 0], M[..., 1]
    g00 = np.sum(m0 * m0, axis=-1)
    g11 = np.sum(m1 * m1, axis=-1)
    g01 = np.sum(m0 * m1, axis=-1)
    s1 = np.sqrt(0.5 * (g00 + g11) + np.hypot(0.5 * (g00 - g11), g01))
    if d == 2:
        cross = np.abs(m0[..., 0] * m1[..., 1] - m0[..., 1] * m1[..., 0])
    else:
        cross = np.linalg.norm(np.cross(m0, m1), axis=-1)
    safe1 = np.where(s1 > 0, s1, 1.0)
    s2 = np.minimum(np.where(s1 > 0, cross / safe1, 0.0), s1)

    theta = 0.5 * np.arctan2(2.0 * g01, g00 - g11)
    c, s = np.cos(theta), np.sin(theta)
    v1 = np.stack([c, s], axis=-1)
    v2 = np.stack([-s, c], axis=-1)
    # sign convention: first nonzero entry positive (v1[0] = cos(theta) >= 0 already)
    flip1 = (v1[..., 0] == 0) & (v1[..., 1] < 0)
    v1 = np.where(flip1[..., None], -v1, v1)
    flip2 = (v2[..., 0] < 0) | ((v2[..., 0] == 0) & (v2[..., 1] < 0))
    v2 = np.where(flip2[..., None], -v2, v2)
    V = np.stack([v1, v2], axis=-1)

    Mv1 = np.einsum("...ij,...j->...i", M, v1)
    Mv2 = np.einsum("...ij,...j->...i", M, v2)
    u1 = np.where((s1 > 0)[..., None], Mv1 / safe1[..., None], _unit(M.shape[:-2], d, 0))
    well = s2 > 1e-12 * s1
    safe2 = np.where(well, s2, 1.0)
    u2 = np.where(well[..., None], Mv2 / safe2[..., None], _complete(u1, Mv2))
    U = np.stack([u1, u2], axis=-1)
    return U, s1, s2, V


def _unit(batch, d, k):
    e = np.zeros(tuple(batch) + (d,))
    e[..., k] = 1.0
    return e


def _complete(u1, hint):
    """A unit vector orthogonal to ``u1`` (which is unit length)."""
    d = u1.shape[-1]
    if d == 2:
        perp = np.stack([-u1[..., 1], u1[..., 0]], axis=-1)
        # align with the (tiny) image of v2 when it carries a usable sign
        sgn = np.where(np.sum(perp * hint, axis=-1) < 0, -1.0, 1.0)
        return perp * sgn[..., None]
    # d == 3: Gram-Schmidt against the least-aligned basis vector
    k = np.argmin(np.abs(u1), axis=-1)
    e = np.zeros_like(u1)
    np.put_along_axis(e, k[..., None], 1.0, axis=-1)
    w = e - np.sum(e * u1, axis=-1, keepdims=True) * u1
    return w / np.linalg.norm(w, axis=-1, keepdims=True)
