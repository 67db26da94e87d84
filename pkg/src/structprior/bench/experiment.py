"""Test-case pipelines: phantom -> data -> composite problem -> PDHG -> metrics.

Two cases are supported. ``x-ray``: sparse-view parallel-beam tomography with
salt-and-pepper corrupted detector bins and an L1 fidelity.
``super-resolution``: block-mean downsampling with Gaussian noise and a
quadratic fidelity. ``paper_scale`` gives the 200^2 / 3000-iteration
settings, :class:`ExperimentConfig` defaults the 64^2 desk scale.
"""

from __future__ import annotations

import dataclasses
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import diffops
from ..fields import Grid, write_csv, write_image
from ..forward import (GaussianNoise, RadonGeometry, RadonTransform, SaltPepperNoise,
                       SuperResGeometry, add_noise, downsample, write_sinogram)
from ..pdhg import SolverConfig, run, write_history
from ..problem import (RegularizerSpec, assemble, downsample_block, prewhiten, radon_block)
from ..prox import QuadraticFidelity, RobustL1Fidelity
from ..sideinfo import SideInformation
from .metrics import psnr, ssim
from .phantom import PhantomPair, generate_phantom_pair

__all__ = [
    "CASES",
    "ExperimentConfig",
    "MetricsRecord",
    "PipelineError",
    "SimulatedData",
    "paper_scale",
    "simulate",
    "run_case",
    "sweep",
    "alpha_grid",
    "tune_alpha",
    "tuned_table",
    "FAMILIES",
    "METRICS_HEADER",
]

CASES = ("x-ray", "super-resolution")
SWEEPABLE = ("eta", "alpha", "gamma", "beta")
DEFAULT_GAMMA = {"x-ray": 1.0, "super-resolution": 0.9}
DEFAULT_FIDELITY = {"x-ray": "l1", "super-resolution": "l2"}

# centres of the logarithmic alpha grids used for tuning, per case and family
ALPHA_CENTRES = {
    ("x-ray", "H1"): 1e-1,
    ("x-ray", "TV"): 1.0,
    ("x-ray", "TGV"): 1.0,
    ("x-ray", "JTV"): 1.0,
    ("super-resolution", "H1"): 1e-2,
    ("super-resolution", "TV"): 1e-1,
    ("super-resolution", "TGV"): 1e-1,
    ("super-resolution", "JTV"): 1e-1,
}


def family(kind: str) -> str:
    """``H1``, ``TV``, ``TGV`` or ``JTV`` (the last also covering TNV)."""
    if kind in ("JTV", "TNV"):
        return "JTV"
    return kind.lstrip("wd")


@dataclass(frozen=True)
class ExperimentConfig:
    case: str = "x-ray"
    size: int = 64
    reg: str = "TV"
    alpha: float = 1e-2
    eta: float = 0.1
    gamma: float | None = None
    beta: float = 5e-2
    fidelity: str | None = None
    seed: int = 0
    iterations: int = 500
    rho: float = 1.0
    prewhiten: bool = True
    n_views: int = 10
    n_detectors: int | None = None
    detector_span: float = 3.0
    factor: int = 4
    salt_pepper: float = 0.05
    noise_std: float = 0.01
    n_shared: int = 6
    n_unshared: int = 8
    timing_repeats: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}; choose from {CASES}")
        if self.fidelity not in (None, "l1", "l2"):
            raise ValueError("fidelity must be 'l1' or 'l2'")
        if self.case == "super-resolution" and self.size % self.factor:
            raise ValueError(f"factor {self.factor} does not divide size {self.size}")
        if self.timing_repeats < 1:
            raise ValueError("timing_repeats must be >= 1")

    @property
    def grid(self) -> Grid:
        return Grid.square(self.size)

    @property
    def gamma_value(self) -> float:
        return DEFAULT_GAMMA[self.case] if self.gamma is None else self.gamma

    @property
    def fidelity_kind(self) -> str:
        return DEFAULT_FIDELITY[self.case] if self.fidelity is None else self.fidelity

    @property
    def detectors(self) -> int:
        # 100 detectors at 200^2 pixels, scaled with the grid otherwise
        if self.n_detectors is not None:
            return self.n_detectors
        return max(1, round(100 * self.size / 200))

    @property
    def regularizer(self) -> RegularizerSpec:
        return RegularizerSpec(self.reg, self.alpha, self.beta, self.eta, self.gamma_value)

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(rho=self.rho, iterations=self.iterations,
                            log_every=max(1, self.iterations // 50), seed=self.seed)

    def with_(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def paper_scale(case: str = "x-ray", **changes) -> ExperimentConfig:
    """The 200^2 grid, 15 views / factor 5, 3000 iterations, median of 3 timings."""
    base = ExperimentConfig(case=case, size=200, n_views=15, n_detectors=100, factor=5,
                            iterations=3000, timing_repeats=3)
    return base.with_(**changes)


@dataclass(frozen=True)
class MetricsRecord:
    case: str
    regulariser: str
    alpha: float
    beta: float
    eta: float
    gamma: float
    fidelity: str
    prewhiten: bool
    iterations: int
    seed: int
    psnr: float
    ssim: float
    wall_time: float = field(compare=False)

    def row(self) -> list[str]:
        """Deterministic CSV row (wall time is kept out; see ``timing_row``)."""
        return [self.case, self.regulariser, repr(self.alpha), repr(self.beta),
                repr(self.eta), repr(self.gamma), self.fidelity, str(int(self.prewhiten)),
                str(self.iterations), str(self.seed), _fmt(self.psnr), _fmt(self.ssim)]

    def timing_row(self) -> list[str]:
        return [self.case, self.regulariser, repr(self.alpha), f"{self.wall_time:.4f}"]


METRICS_HEADER = ["case", "regulariser", "alpha", "beta", "eta", "gamma", "fidelity",
                  "prewhiten", "iterations", "seed", "psnr", "ssim"]
TIMING_HEADER = ["case", "regulariser", "alpha", "wall_time"]


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6f}"


# -- data simulation -------------------------------------------------------------

@dataclass(frozen=True)
class SimulatedData:
    phantom: PhantomPair
    clean: np.ndarray
    data: np.ndarray
    operator: object


_SIM_FIELDS = ("case", "size", "seed", "n_views", "n_detectors", "detector_span", "factor",
               "salt_pepper", "noise_std", "n_shared", "n_unshared")
_sim_cache: dict = {}


def simulate(cfg: ExperimentConfig) -> SimulatedData:
    """Phantom and noisy data for ``cfg`` (cached on the data-relevant fields)."""
    key = tuple(getattr(cfg, f) for f in _SIM_FIELDS)
    if key in _sim_cache:
        return _sim_cache[key]
    grid = cfg.grid
    pair = generate_phantom_pair(grid, cfg.seed, cfg.n_shared, cfg.n_unshared)
    if cfg.case == "x-ray":
        geom = RadonGeometry(cfg.n_views, cfg.detectors, cfg.detector_span)
        op = RadonTransform(grid, geom)
        clean = op(pair.u_true)
        data = add_noise(clean, SaltPepperNoise(cfg.salt_pepper, seed=cfg.seed))
    else:
        geom = SuperResGeometry(cfg.factor)
        op = geom
        clean = downsample(pair.u_true, geom)
        data = add_noise(clean, GaussianNoise(0.0, cfg.noise_std, seed=cfg.seed))
    sim = SimulatedData(pair, clean, data, op)
    if len(_sim_cache) > 32:
        _sim_cache.clear()
    _sim_cache[key] = sim
    return sim


def build_problem(cfg: ExperimentConfig, sim: SimulatedData | None = None):
    sim = simulate(cfg) if sim is None else sim
    grid = cfg.grid
    if cfg.case == "x-ray":
        K = radon_block(sim.operator)
    else:
        K = downsample_block(grid, sim.operator)
    Fid = RobustL1Fidelity if cfg.fidelity_kind == "l1" else QuadraticFidelity
    fidelity = Fid(sim.data)
    reg = cfg.regularizer
    si = None
    if reg.needs_side_info:
        si = SideInformation.from_image(sim.phantom.v, grid, reg.eta, reg.gamma)
    problem = assemble(reg, fidelity, K, grid, si)
    return prewhiten(problem) if cfg.prewhiten else problem


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and the cause is chained."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage} stage failed: {exc}")
        self.stage = stage


def run_case(cfg: ExperimentConfig, write: bool = True):
    """Run one reconstruction; returns ``(MetricsRecord, u_rec, history)``.

    With ``cfg.out`` set (and ``write``), writes ``recon.pgm``, ``metrics.csv``,
    ``timing.csv`` and ``history.csv`` there.
    """
    try:
        sim = simulate(cfg)
    except Exception as exc:
        raise PipelineError("simulate", exc) from exc
    try:
        problem = build_problem(cfg, sim)
    except Exception as exc:
        raise PipelineError("assemble", exc) from exc

    times = []
    result = None
    try:
        for _ in range(cfg.timing_repeats):
            t0 = time.perf_counter()
            result = run(problem, cfg.solver)
            times.append(time.perf_counter() - t0)
    except Exception as exc:
        raise PipelineError("solve", exc) from exc

    u = result.u
    truth = sim.phantom.u_true
    reg = cfg.regularizer
    record = MetricsRecord(cfg.case, cfg.reg, cfg.alpha, cfg.beta, reg.eta, reg.gamma,
                           cfg.fidelity_kind, cfg.prewhiten, cfg.iterations, cfg.seed,
                           psnr(u, truth), ssim(u, truth), statistics.median(times))
    if write and cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_image(u, out / "recon.pgm", (0.0, float(truth.max())))
        write_csv(out / "metrics.csv", METRICS_HEADER, [record.row()])
        write_csv(out / "timing.csv", TIMING_HEADER, [record.timing_row()])
        write_history(out / "history.csv", result.history)
    return record, u, result.history


def write_case_data(cfg: ExperimentConfig, out) -> SimulatedData:
    """Write phantom pair (PGM) and simulated data (CSV sinogram or PGM)."""
    sim = simulate(cfg)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    pair = sim.phantom
    write_image(pair.u_true, out / "u_true.pgm", (0.0, float(pair.u_true.max())))
    write_image(pair.v, out / "v.pgm", (float(pair.v.min()), float(pair.v.max())))
    if cfg.case == "x-ray":
        write_sinogram(out / "sinogram.csv", sim.data, sim.operator.geometry)
    else:
        write_image(sim.data, out / "data.pgm", (float(sim.data.min()), float(sim.data.max())))
    return sim


# -- sweeps and tuning ---------------------------------------------------------------

def sweep(cfg: ExperimentConfig, parameter: str, values: Sequence[float]):
    """One :func:`run_case` per value of ``parameter``; shared phantom and seed.

    Returns the list of records and, with ``cfg.out`` set, writes
    ``sweep_<parameter>.csv`` and an image strip ``sweep_<parameter>.pgm``.
    """
    if parameter not in SWEEPABLE:
        raise ValueError(f"cannot sweep {parameter!r}; choose from {SWEEPABLE}")
    values = list(values)
    if not values:
        raise ValueError("empty value list")
    records, images = [], []
    for val in values:
        sub_out = None if cfg.out is None else str(Path(cfg.out) / f"{parameter}={val:g}")
        rec, u, _ = run_case(cfg.with_(**{parameter: val}, out=sub_out))
        records.append(rec)
        images.append(u)
    if cfg.out:
        out = Path(cfg.out)
        write_csv(out / f"sweep_{parameter}.csv", METRICS_HEADER, [r.row() for r in records])
        strip = np.concatenate(images, axis=1)
        truth_max = float(simulate(cfg).phantom.u_true.max())
        write_image(strip, out / f"sweep_{parameter}.pgm", (0.0, truth_max))
    return records


def alpha_grid(case: str, kind: str, points: int = 7, decades: float = 2.0) -> np.ndarray:
    """Logarithmic grid of ``points`` values spanning ``decades`` around the
    case/family centre."""
    centre = ALPHA_CENTRES[(case, family(kind))]
    return centre * np.logspace(-decades / 2, decades / 2, points)


def tune_alpha(cfg: ExperimentConfig, values: Sequence[float] | None = None):
    """Best-PSNR record over an alpha grid, plus all records."""
    if values is None:
        values = alpha_grid(cfg.case, cfg.reg)
    records = [run_case(cfg.with_(alpha=float(a), out=None), write=False)[0] for a in values]
    best = max(records, key=lambda r: r.psnr)
    return best, records


def total_variation(u: np.ndarray, grid: Grid) -> float:
    """Isotropic discrete TV with the pixel-area weight."""
    return grid.cell_area * float(np.sum(np.linalg.norm(diffops.gradient(u, grid.h), axis=-1)))


FAMILIES = {
    "H1": ("H1", "wH1", "dH1"),
    "TV": ("TV", "wTV", "dTV"),
    "TGV": ("TGV", "wTGV", "dTGV"),
}


def tuned_table(base: ExperimentConfig, kinds: Sequence[str] | None = None) -> dict:
    """Best-PSNR record per regulariser under the tuned-alpha protocol."""
    if kinds is None:
        kinds = [k for fam in FAMILIES.values() for k in fam]
    return {k: tune_alpha(base.with_(reg=k))[0] for k in kinds}
