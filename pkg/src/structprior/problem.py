"""Composite problems ``min_x sum_i F_i(A_i x) + G(x)`` for the regulariser catalogue.

The primal variable is a tuple: ``(u,)`` for first-order regularisers and
``(u, zeta)`` for the TGV family. Block 0 is always the forward operator
``K`` paired with the data fidelity. Regulariser weights carry the pixel
area ``h^2`` so that ``alpha`` means the same thing on every grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import diffops
from .fields import Grid
from .forward import RadonTransform, SuperResGeometry, downsample, power_method, upsample_adjoint
from .prox import Functional, GroupL1, NonnegIndicator, NuclearL1, Scaled, SquaredNorm, Zero
from .sideinfo import SideInformation, apply_D

__all__ = [
    "REGULARIZERS",
    "STRUCTURE_KINDS",
    "RegularizerSpec",
    "LinearBlock",
    "CompositeProblem",
    "identity_block",
    "radon_block",
    "downsample_block",
    "assemble",
    "objective",
    "prewhiten",
]

REGULARIZERS = ("H1", "wH1", "dH1", "TV", "wTV", "dTV", "JTV", "TNV", "TGV", "wTGV", "dTGV")
STRUCTURE_KINDS = frozenset(REGULARIZERS) - {"H1", "TV", "TGV"}
_TGV_KINDS = frozenset({"TGV", "wTGV", "dTGV"})

NORM_ITERS = 1000
NORM_SEED = 0


@dataclass(frozen=True)
class RegularizerSpec:
    kind: str
    alpha: float
    beta: float = 5e-2
    eta: float = 0.1
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in REGULARIZERS:
            raise ValueError(f"unknown regulariser {self.kind!r}; choose from {REGULARIZERS}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.kind in _TGV_KINDS and not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.kind in STRUCTURE_KINDS:
            if not self.eta > 0:
                raise ValueError("eta must be positive")
            if not 0 < self.gamma <= 1:
                raise ValueError("gamma must lie in (0, 1]")

    @property
    def is_tgv(self) -> bool:
        return self.kind in _TGV_KINDS

    @property
    def needs_side_info(self) -> bool:
        return self.kind in STRUCTURE_KINDS


class LinearBlock:
    """A linear map with its adjoint and a lazily estimated operator norm.

    ``domain`` is an array shape, or a list of shapes when the block acts on
    a stacked variable; ``forward`` and ``adjoint`` must match that layout.
    """

    def __init__(self, forward: Callable, adjoint: Callable, domain, range_shape,
                 name: str = "", norm: float | None = None):
        self.forward = forward
        self.adjoint = adjoint
        self.domain = domain
        self.range_shape = tuple(range_shape)
        self.name = name
        self._norm = norm

    def __repr__(self):
        return f"LinearBlock({self.name!r}, range={self.range_shape})"

    def __call__(self, x):
        return self.forward(x)

    @property
    def norm(self) -> float:
        """Power-method estimate of ``|A|`` (no safety factor)."""
        if self._norm is None:
            self._norm = power_method(self.forward, self.adjoint, self.domain,
                                      iters=NORM_ITERS, seed=NORM_SEED)
        return self._norm

    def scaled(self, factor: float) -> "LinearBlock":
        """The block ``factor * A``."""
        fwd, adj = self.forward, self.adjoint
        norm = None if self._norm is None else abs(factor) * self._norm
        return LinearBlock(lambda x: factor * fwd(x),
                           lambda y: _tscale(adj(y), factor),
                           self.domain, self.range_shape, self.name, norm)


def _tscale(x, a):
    if isinstance(x, tuple):
        return tuple(a * c for c in x)
    return a * x


def identity_block(grid: Grid) -> LinearBlock:
    return LinearBlock(lambda u: u.copy(), lambda y: y.copy(), grid.shape, grid.shape, "identity")


def radon_block(op: RadonTransform) -> LinearBlock:
    return LinearBlock(op, op.adjoint, op.grid.shape, op.geometry.shape, "radon")


def downsample_block(grid: Grid, geometry: SuperResGeometry) -> LinearBlock:
    return LinearBlock(lambda u: downsample(u, geometry),
                       lambda y: upsample_adjoint(y, geometry),
                       grid.shape, geometry.output_shape(grid.shape),
                       f"downsample{geometry.factor}")


@dataclass
class CompositeProblem:
    """Blocks ``A_i`` with functionals ``F_i`` and a separable simple term
    ``G`` (one functional per primal component)."""

    blocks: list[LinearBlock]
    functionals: list[Functional]
    simple_term: tuple[Functional, ...]
    variable_shapes: list[tuple[int, ...]]
    grid: Grid
    regularizer: RegularizerSpec | None = None
    prewhitened: bool = False
    _norm: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.blocks) != len(self.functionals):
            raise ValueError("need exactly one functional per block")
        if len(self.simple_term) != len(self.variable_shapes):
            raise ValueError("need exactly one simple functional per primal component")

    def zeros_primal(self) -> tuple[np.ndarray, ...]:
        return tuple(np.zeros(s) for s in self.variable_shapes)

    def zeros_dual(self) -> list[np.ndarray]:
        return [np.zeros(b.range_shape) for b in self.blocks]

    def check(self, x) -> tuple[np.ndarray, ...]:
        x = tuple(x)
        if [c.shape for c in x] != [tuple(s) for s in self.variable_shapes]:
            raise ValueError(f"primal shapes {[c.shape for c in x]} do not match "
                             f"{self.variable_shapes}")
        return x

    def forward(self, x) -> list[np.ndarray]:
        return [b.forward(x) for b in self.blocks]

    def adjoint(self, ys) -> tuple[np.ndarray, ...]:
        out = [np.zeros(s) for s in self.variable_shapes]
        for b, y in zip(self.blocks, ys):
            for k, c in enumerate(b.adjoint(y)):
                out[k] += c
        return tuple(out)

    @property
    def norm(self) -> float:
        """Power-method estimate of the stacked operator norm."""
        if self._norm is None:
            self._norm = power_method(self.forward, self.adjoint, self.variable_shapes,
                                      iters=NORM_ITERS, seed=NORM_SEED)
        return self._norm

    def objective(self, x) -> float:
        return objective(self, x)


def objective(p: CompositeProblem, x) -> float:
    """``sum_i F_i(A_i x) + G(x)``; ``inf`` if ``u`` has a negative entry."""
    x = p.check(x)
    g = sum(G(c) for G, c in zip(p.simple_term, x))
    if not np.isfinite(g):
        return np.inf
    return float(sum(F(b.forward(x)) for b, F in zip(p.blocks, p.functionals)) + g)


# -- assembly ------------------------------------------------------------------

def _lift(K: LinearBlock, shapes) -> LinearBlock:
    rest = [tuple(s) for s in shapes[1:]]

    def adj(y):
        return (K.adjoint(y),) + tuple(np.zeros(s) for s in rest)

    return LinearBlock(lambda x: K.forward(x[0]), adj, list(shapes), K.range_shape,
                       K.name, K._norm)


def _grad_block(kind: str, grid: Grid, si: SideInformation | None, tgv: bool, shapes):
    """``B grad u`` (minus ``zeta`` for TGV) with ``B`` in {I, w, D}."""
    h = grid.h
    weighting = kind[0] if kind[0] in "wd" else ""
    if weighting == "w":
        w = si.w[..., None]
        B = Bt = lambda p: w * p
    elif weighting == "d":
        B = Bt = lambda p: apply_D(si, p)
    else:
        B = Bt = lambda p: p

    if tgv:
        def fwd(x):
            return B(diffops.gradient(x[0], h)) - x[1]

        def adj(y):
            return (-diffops.divergence(Bt(y), h), -y)
    else:
        def fwd(x):
            return B(diffops.gradient(x[0], h))

        def adj(y):
            return (-diffops.divergence(Bt(y), h),)

    name = f"{weighting}grad" + ("-zeta" if tgv else "")
    return LinearBlock(fwd, adj, list(shapes), grid.shape + (2,), name)


def _jacobian_block(grid: Grid, shapes) -> LinearBlock:
    h = grid.h

    def fwd(x):
        out = np.zeros(grid.shape + (2, 2))
        out[..., :, 0] = diffops.gradient(x[0], h)
        return out

    def adj(y):
        return (-diffops.divergence(y[..., :, 0], h),)

    return LinearBlock(fwd, adj, list(shapes), grid.shape + (2, 2), "[grad,0]")


def _symgrad_block(grid: Grid, shapes) -> LinearBlock:
    h = grid.h
    return LinearBlock(lambda x: diffops.sym_gradient(x[1], h),
                       lambda y: (np.zeros(grid.shape), -diffops.sym_divergence(y, h)),
                       list(shapes), grid.shape + (2, 2), "symgrad")


def assemble(reg: RegularizerSpec, fidelity: Functional, K: LinearBlock, grid: Grid,
             side_info: SideInformation | None = None) -> CompositeProblem:
    """Build the composite problem for regulariser ``reg``.

    ``K`` maps images on ``grid`` to data; ``fidelity`` is the functional
    applied to ``K u``. Structure-promoting regularisers need ``side_info``;
    when its ``eta``/``gamma`` differ from ``reg`` it is rebuilt from the
    same guide image with the regulariser's values.
    """
    if reg.needs_side_info:
        if side_info is None:
            raise ValueError(f"{reg.kind} needs side information")
        if side_info.grid != grid:
            raise ValueError("side information lives on a different grid")
        if (side_info.eta, side_info.gamma) != (reg.eta, reg.gamma):
            side_info = SideInformation.from_image(side_info.v, grid, reg.eta, reg.gamma,
                                                   normalize=False)
    if K.domain != grid.shape:
        raise ValueError(f"forward operator domain {K.domain} does not match grid {grid.shape}")

    shapes = [grid.shape, grid.shape + (2,)] if reg.is_tgv else [grid.shape]
    weight = reg.alpha * grid.cell_area
    blocks = [_lift(K, shapes)]
    functionals: list[Functional] = [fidelity]
    kind = reg.kind

    if kind in ("H1", "wH1", "dH1"):
        blocks.append(_grad_block(kind, grid, side_info, False, shapes))
        functionals.append(SquaredNorm(weight))
    elif kind in ("TV", "wTV", "dTV"):
        blocks.append(_grad_block(kind, grid, side_info, False, shapes))
        functionals.append(GroupL1(weight))
    elif kind in ("JTV", "TNV"):
        shift = np.zeros(grid.shape + (2, 2))
        shift[..., :, 1] = reg.eta * side_info.grad_v
        blocks.append(_jacobian_block(grid, shapes))
        functionals.append(GroupL1(weight, shift, group_ndim=2) if kind == "JTV"
                           else NuclearL1(weight, shift))
    else:
        blocks.append(_grad_block(kind, grid, side_info, True, shapes))
        functionals.append(GroupL1(weight))
        blocks.append(_symgrad_block(grid, shapes))
        functionals.append(GroupL1(reg.beta * weight, group_ndim=2))

    simple = (NonnegIndicator(), Zero()) if reg.is_tgv else (NonnegIndicator(),)
    return CompositeProblem(blocks, functionals, simple, shapes, grid, reg)


def prewhiten(p: CompositeProblem) -> CompositeProblem:
    """Rescale every block to unit norm, compensating in its functional.

    With ``lam_i = |A_i|`` the new problem uses ``A_i / lam_i`` and
    ``F_i(lam_i .)``, so objective values are unchanged.
    """
    blocks, funcs = [], []
    for b, F in zip(p.blocks, p.functionals):
        lam = b.norm
        if not lam > 0:
            raise ValueError(f"block {b.name!r} has zero norm and cannot be prewhitened")
        nb = b.scaled(1.0 / lam)
        nb._norm = 1.0
        blocks.append(nb)
        funcs.append(Scaled(F, lam))
    return replace(p, blocks=blocks, functionals=funcs, prewhitened=True, _norm=None)

