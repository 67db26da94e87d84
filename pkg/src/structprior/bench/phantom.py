"""Synthetic target / side-information pairs.

Both images contain a body disk. Interior disks appear in both with
monotonically transformed intensities, so their edges are shared and their
level sets parallel. Small disks on an outer ring appear only in the target,
and a smooth bump appears only in the side information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fields import Grid

__all__ = ["PhantomPair", "PlacementError", "generate_phantom_pair", "side_transform"]

BODY_RADIUS = 0.7
RING_RADIUS = 0.56
BUMP_AMPLITUDE = 0.2
BUMP_WIDTH = 0.5
BUMP_CENTRE = (0.25, -0.2)
SUPERSAMPLE = 4
MAX_TRIES = 2000


class PlacementError(RuntimeError):
    """Could not place non-overlapping disks within the retry budget."""


@dataclass(frozen=True)
class PhantomPair:
    u_true: np.ndarray
    v: np.ndarray
    grid: Grid
    provenance: dict


def side_transform(a):
    """Strictly decreasing intensity map from target to side information."""
    return 1.0 / (0.5 + np.asarray(a, dtype=float))


def _disk_fraction(grid: Grid, centre, radius) -> np.ndarray:
    """Area fraction of each pixel covered by the disk (supersampled)."""
    h = grid.h
    offs = (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE - 0.5
    X1, X2 = grid.centres()
    frac = np.zeros(grid.shape)
    for dx in offs:
        for dy in offs:
            frac += ((X1 + dx * h - centre[0]) ** 2 + (X2 + dy * h - centre[1]) ** 2
                     <= radius ** 2)
    return frac / SUPERSAMPLE ** 2


def _place_shared(rng, n):
    disks = []
    tries = 0
    while len(disks) < n:
        tries += 1
        if tries > MAX_TRIES:
            raise PlacementError(f"placed {len(disks)} of {n} shared disks")
        r = rng.uniform(0.08, 0.15)
        rho = rng.uniform(0.0, RING_RADIUS - 0.1 - r)
        phi = rng.uniform(0.0, 2 * np.pi)
        c = (rho * np.cos(phi), rho * np.sin(phi))
        if all(np.hypot(c[0] - d[0][0], c[1] - d[0][1]) > r + d[1] + 0.04 for d in disks):
            disks.append((c, r))
    return disks


def _place_ring(rng, n):
    disks = []
    if n == 0:
        return disks
    phase = rng.uniform(0.0, 2 * np.pi)
    for k in range(n):
        phi = phase + 2 * np.pi * k / n + rng.uniform(-0.15, 0.15) * np.pi / n
        r = rng.uniform(0.04, 0.06)
        disks.append(((RING_RADIUS * np.cos(phi), RING_RADIUS * np.sin(phi)), r))
    # neighbours must not touch
    for (c0, r0), (c1, r1) in zip(disks, disks[1:] + disks[:1]):
        if n > 1 and np.hypot(c0[0] - c1[0], c0[1] - c1[1]) <= r0 + r1 + 0.02:
            raise PlacementError(f"{n} ring disks do not fit on the outer ring")
    return disks


def generate_phantom_pair(grid: Grid, seed: int = 0, n_shared: int = 6,
                          n_unshared: int = 8) -> PhantomPair:
    """Deterministic phantom pair for a given ``seed``."""
    if n_shared < 0 or n_unshared < 0:
        raise ValueError("disk counts must be nonnegative")
    rng = np.random.default_rng(seed)
    shared = _place_shared(rng, n_shared)
    ring = _place_ring(rng, n_unshared)
    shared_vals = rng.uniform(0.2, 2.0, size=n_shared)
    ring_vals = rng.choice([0.4, 1.7], size=n_unshared)

    # u_shared carries everything visible in both modalities
    u_shared = _disk_fraction(grid, (0.0, 0.0), BODY_RADIUS)
    v = side_transform(0.0) + (side_transform(1.0) - side_transform(0.0)) * u_shared
    for (c, r), a in zip(shared, shared_vals):
        frac = _disk_fraction(grid, c, r)
        u_shared = u_shared + (a - 1.0) * frac
        v = v + (side_transform(a) - side_transform(1.0)) * frac

    u = u_shared.copy()
    for (c, r), a in zip(ring, ring_vals):
        u = u + (a - 1.0) * _disk_fraction(grid, c, r)
    u = np.maximum(u, 0.0)

    X1, X2 = grid.centres()
    bump = BUMP_AMPLITUDE * np.exp(-((X1 - BUMP_CENTRE[0]) ** 2 + (X2 - BUMP_CENTRE[1]) ** 2)
                                   / (2 * BUMP_WIDTH ** 2))
    v = v + bump

    provenance = {
        "seed": seed,
        "n_shared": n_shared,
        "n_unshared": n_unshared,
        "shared": [(c, r, a) for (c, r), a in zip(shared, shared_vals)],
        "ring": [(c, r, a) for (c, r), a in zip(ring, ring_vals)],
    }
    return PhantomPair(u, v, grid, provenance)
