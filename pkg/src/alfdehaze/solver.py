"""Alternating minimisation of the dehazing energy.

Each outer iteration evaluates the airlight, takes one gradient step on the
transmission, one on the latent image, then refits the airlight weights in
closed form.  Gradient steps are Jacobi sweeps: every pixel reads the
previous iterate only, so splitting the image into row bands across worker
threads gives bit-identical results.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import EPS_AIRLIGHT, AirlightField, BasisSet, combine_members
from .energy import (
    ENERGY_CSV_HEADER,
    DegenerateUpdateError,
    EnergyBreakdown,
    Hyperparameters,
    energy_terms,
    grad_J,
    grad_t,
    solve_weights,
    update_constant_airlight,
    update_weights,
)
from .raster import as_raster

log = logging.getLogger(__name__)

MODES = ("alf", "cbr")
WEIGHT_UPDATES = ("joint", "coordinate")
CONVERGENCE_PATIENCE = 3


class NonFiniteEnergyError(FloatingPointError):
    """The energy became NaN/inf; ``pixel`` is the first offending (row, col)."""

    def __init__(self, iteration: int, pixel: tuple[int, int] | None):
        self.iteration = iteration
        self.pixel = pixel
        super().__init__(f"non-finite energy at iteration {iteration}, first bad pixel (row, col) = {pixel}")


@dataclass(frozen=True)
class SolverConfig:
    hp: Hyperparameters = field(default_factory=Hyperparameters)
    mode: str = "alf"
    basis_order: int = 2
    include_cross_terms: bool = False
    step_size: float = 0.1
    step_size_J: float | None = None   # defaults to step_size
    max_iters: int = 200
    convergence_tol: float = 1e-5
    clamp_iterates: bool = True
    weight_update: str = "joint"       # "joint" normal equations or "coordinate"-wise

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.basis_order < 0:
            raise ValueError("basis_order must be non-negative")
        if not self.step_size > 0 or (self.step_size_J is not None and not self.step_size_J > 0):
            raise ValueError("step sizes must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if not self.convergence_tol >= 0:
            raise ValueError("convergence_tol must be non-negative")

    @property
    def basis(self) -> BasisSet:
        if self.mode == "cbr":
            return BasisSet(0)
        return BasisSet(self.basis_order, self.include_cross_terms)

    def replace(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class SolverResult:
    transmission: np.ndarray
    dehazed: np.ndarray
    airlight: AirlightField
    energy_trace: list[EnergyBreakdown]
    iterations_run: int
    converged: bool


def _banded(func, arrays, workers: int) -> np.ndarray:
    """Evaluate a per-pixel 4-neighbour stencil ``func`` over row bands.

    Each band carries a one-row halo so neighbour reads match the full-image
    evaluation exactly.
    """
    height = arrays[0].shape[0]
    if workers <= 1 or height < 2 * workers:
        return func(*arrays)
    edges = np.linspace(0, height, workers + 1).astype(int)

    def band(k):
        lo, hi = edges[k], edges[k + 1]
        a, b = max(lo - 1, 0), min(hi + 1, height)
        out = func(*(arr[a:b] for arr in arrays))
        return out[lo - a: lo - a + (hi - lo)]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(band, range(workers)))
    return np.concatenate(parts, axis=0)


def _first_bad_pixel(*arrays) -> tuple[int, int] | None:
    bad = np.zeros(arrays[0].shape[:2], dtype=bool)
    for arr in arrays:
        finite = np.isfinite(arr)
        bad |= ~(finite.all(axis=2) if finite.ndim == 3 else finite)
    hits = np.argwhere(bad)
    return tuple(int(v) for v in hits[0]) if len(hits) else None


def run(I, config: SolverConfig | None = None, workers: int = 1) -> SolverResult:
    """Jointly estimate transmission, haze-free image and airlight from ``I``.

    Starts from ``t = 0``, ``J = I`` and all-zero weights.  Stops after
    ``max_iters`` iterations or once the relative change of the total energy
    stays below ``convergence_tol`` for three consecutive iterations.
    """
    config = config or SolverConfig()
    hp = config.hp
    I = as_raster(I, "hazy image")
    height, width = I.shape[:2]
    basis = config.basis
    g = basis.on_grid(height, width)
    step_t = config.step_size
    step_j = config.step_size_J if config.step_size_J is not None else config.step_size

    t = np.zeros((height, width))
    J = I.copy()
    w = np.zeros((3, len(basis)))

    def airlight(weights):
        return np.clip(combine_members(weights, g), EPS_AIRLIGHT, 1.0)

    A = airlight(w)
    trace = [energy_terms(I, t, J, A, w, hp)]
    calm = 0
    converged = False
    iterations = 0
    for k in range(1, config.max_iters + 1):
        gt = _banded(lambda i_, t_, j_, a_: grad_t(i_, t_, j_, a_, hp), (I, t, J, A), workers)
        t = t - step_t * gt
        if config.clamp_iterates:
            t = np.clip(t, 0.0, 1.0)
        gj = _banded(lambda i_, t_, j_, a_: grad_J(i_, t_, j_, a_, hp), (I, t, J, A), workers)
        J = J - step_j * gj
        if config.clamp_iterates:
            J = np.clip(J, 0.0, 1.0)
        if not (np.isfinite(t).all() and np.isfinite(J).all()):
            raise NonFiniteEnergyError(k, _first_bad_pixel(t, J))

        if config.mode == "cbr":
            try:
                w = update_constant_airlight(I, t, J).reshape(3, 1)
            except DegenerateUpdateError as exc:
                warnings.warn(f"iteration {k}: {exc}; keeping previous airlight", RuntimeWarning)
        else:
            fit = solve_weights if config.weight_update == "joint" else update_weights
            w = fit(I, t, J, g, hp.lambda4, previous=w)
        A = airlight(w)

        energy = energy_terms(I, t, J, A, w, hp)
        iterations = k
        if not np.isfinite(energy.total):
            raise NonFiniteEnergyError(k, _first_bad_pixel(t, J, A))
        prev = trace[-1].total
        trace.append(energy)
        change = abs(prev - energy.total) / max(abs(prev), np.finfo(float).tiny)
        calm = calm + 1 if change < config.convergence_tol else 0
        if calm >= CONVERGENCE_PATIENCE:
            converged = True
            break

    log.debug("solver stopped after %d iterations (converged=%s)", iterations, converged)
    return SolverResult(
        transmission=t,
        dehazed=J,
        airlight=AirlightField(w, basis, height, width),
        energy_trace=trace,
        iterations_run=iterations,
        converged=converged,
    )


def energy_trace_csv(result: SolverResult, path) -> None:
    """One CSV row per trace entry, starting with the initial energy as iteration 0."""
    with open(path, "w", newline="") as fh:
        fh.write(ENERGY_CSV_HEADER + "\n")
        for k, e in enumerate(result.energy_trace):
            fh.write(e.csv_row(k) + "\n")
