"""Procedural ground-truth scenes for exercising the solver.

Nothing here is needed to dehaze a photograph; these helpers build clear
images, transmission maps and airlight fields with known answers so the
solver can be checked against truth.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .basis import AirlightField, BasisSet, coordinate_grid
from .scatter import SyntheticSceneSpec, synthesize

# every colour has one channel at 0 and one at 1, which pins the airlight
# from both sides once haze is added
PALETTE = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [1.0, 0.5, 0.0],
    [0.0, 0.5, 1.0],
])


def clear_scene(height: int, width: int, seed: int = 0, cell: int = 8) -> np.ndarray:
    """Piecewise-constant clear image: a Voronoi tiling of palette colours.

    ``cell`` is the approximate tile size in pixels.
    """
    rng = np.random.default_rng(seed)
    n = max(1, (height * width) // (cell * cell))
    centers = rng.uniform(0, 1, size=(n, 2)) * (height, width)
    tree = cKDTree(centers)
    ys, xs = np.mgrid[0:height, 0:width]
    _, label = tree.query(np.column_stack([ys.ravel(), xs.ravel()]))
    colours = PALETTE[rng.integers(0, len(PALETTE), size=n)]
    return colours[label.reshape(height, width)]


def smooth_transmission(height: int, width: int, lo: float = 0.3, hi: float = 0.9,
                        seed: int = 0) -> np.ndarray:
    """Smooth random transmission map spanning exactly ``[lo, hi]``."""
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=(height, width))
    field_ = ndimage.gaussian_filter(noise, sigma=max(height, width) / 8, mode="reflect")
    u, v = coordinate_grid(height, width)
    field_ = field_ / (np.ptp(field_) + 1e-12) + 0.5 * v  # brighter haze towards the top
    field_ = (field_ - field_.min()) / np.ptp(field_)
    return lo + (hi - lo) * field_


def depth_with_sky(height: int, width: int, sky_rows: float = 0.3,
                   near: float = 1.0, far: float = 6.0, sky_depth: float = 40.0) -> np.ndarray:
    """Ground plane receding towards the horizon with a sky band on top."""
    ys = np.arange(height, dtype=np.float64)
    horizon = int(round(sky_rows * height))
    depth = np.empty(height)
    depth[:horizon] = sky_depth
    ground = ys[horizon:]
    frac = (ground - horizon) / max(height - 1 - horizon, 1)
    depth[horizon:] = far + (near - far) * frac
    return np.repeat(depth[:, None], width, axis=1)


def linear_airlight(height: int, width: int, base=(0.75, 0.75, 0.75),
                    slope_u=(0.1, 0.08, 0.06), slope_v=(0.0, 0.0, 0.0),
                    order: int = 2) -> AirlightField:
    """Airlight varying linearly across the image, expressed in an order-``order`` basis."""
    basis = BasisSet(order)
    w = np.zeros((3, len(basis)))
    w[:, 0] = base
    w[:, basis.degrees.index((1, 0))] = slope_u
    w[:, basis.degrees.index((0, 1))] = slope_v
    return AirlightField(w, basis, height, width)


@dataclass
class Scene:
    hazy: np.ndarray
    clear: np.ndarray
    transmission: np.ndarray
    airlight: AirlightField


def make_scene(height: int, width: int, airlight: AirlightField | None = None,
               transmission: np.ndarray | None = None, depth: np.ndarray | None = None,
               beta: float | None = None, noise_sigma: float = 0.0, quantize: bool = False,
               seed: int = 0) -> Scene:
    """Clear image + haze in one call; defaults to constant airlight 0.8 and smooth t."""
    clear = clear_scene(height, width, seed)
    if airlight is None:
        airlight = AirlightField.constant((0.8, 0.8, 0.8), height, width)
    if transmission is None and depth is None:
        transmission = smooth_transmission(height, width, seed=seed)
    spec = SyntheticSceneSpec(clear=clear, airlight=airlight, depth=depth, transmission=transmission,
                              beta=beta, noise_sigma=noise_sigma, quantize=quantize, seed=seed)
    hazy, t = synthesize(spec)
    return Scene(hazy, clear, t, airlight)
