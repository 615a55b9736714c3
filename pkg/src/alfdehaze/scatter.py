"""Atmospheric scattering forward model, direct inverse and dark-channel baseline."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .basis import EPS_AIRLIGHT, AirlightField, BasisSet
from .raster import as_raster, as_scalar_map, load_image, load_scalar_map, quantize

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

DEFAULT_OMEGA = 0.95
DEFAULT_PATCH = 15
DEFAULT_T0 = 0.1


class SceneSpecError(ValueError):
    """A synthetic scene description is inconsistent or incomplete."""


@dataclass
class SyntheticSceneSpec:
    """Inputs of the forward hazing model.

    Exactly one of ``depth`` (with ``beta > 0``) or ``transmission`` must be
    given.  Noise is additive Gaussian per channel drawn from ``seed``.
    """

    clear: np.ndarray
    airlight: AirlightField
    depth: np.ndarray | None = None
    transmission: np.ndarray | None = None
    beta: float | None = None
    noise_sigma: float = 0.0
    quantize: bool = False
    seed: int = 0
    sources: dict = field(default_factory=dict)   # file paths the spec was read from

    def validate(self) -> None:
        clear = as_raster(self.clear, "clear image")
        if (self.depth is None) == (self.transmission is None):
            raise SceneSpecError("give exactly one of depth or transmission")
        if self.depth is not None:
            as_scalar_map(self.depth, clear.shape[:2], "depth")
            if self.beta is None or not self.beta > 0:
                raise SceneSpecError("beta must be positive when depth is given")
        else:
            t = as_scalar_map(self.transmission, clear.shape[:2], "transmission")
            if t.min() < 0 or t.max() > 1:
                raise SceneSpecError("transmission must lie in [0, 1]")
        if (self.airlight.height, self.airlight.width) != clear.shape[:2]:
            raise SceneSpecError("airlight field dimensions do not match the clear image")
        if self.noise_sigma < 0:
            raise SceneSpecError("noise_sigma must be non-negative")

    def transmission_map(self) -> np.ndarray:
        if self.transmission is not None:
            return np.asarray(self.transmission, dtype=np.float64)
        return np.exp(-self.beta * np.asarray(self.depth, dtype=np.float64))


def synthesize(spec: SyntheticSceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """Haze a clear image: ``I = t J + (1 - t) A`` per channel.

    Returns ``(hazy, true_transmission)``.  Noise (if any) is added and then
    clamped to [0, 1]; quantization rounds to 8-bit levels last.
    """
    try:
        spec.validate()
    except ValueError as exc:
        if isinstance(exc, SceneSpecError):
            raise
        raise SceneSpecError(str(exc)) from exc
    clear = np.asarray(spec.clear, dtype=np.float64)
    t = spec.transmission_map()
    tt = t[..., None]
    hazy = tt * clear + (1.0 - tt) * spec.airlight.values()
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        hazy = hazy + rng.normal(0.0, spec.noise_sigma, size=hazy.shape)
    hazy = np.clip(hazy, 0.0, 1.0)
    if spec.quantize:
        hazy = quantize(hazy)
    return hazy, t


def recover_direct(hazy, t, airlight: AirlightField, t0: float = DEFAULT_T0, clip: bool = True) -> np.ndarray:
    """Invert the scattering model by division: ``J = (I - A) / max(t, t0) + A``."""
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    hazy = np.asarray(hazy, dtype=np.float64)
    t = as_scalar_map(t, hazy.shape[:2], "transmission")
    a = airlight.values()
    out = (hazy - a) / np.maximum(t, t0)[..., None] + a
    return np.clip(out, 0.0, 1.0) if clip else out


def min_ratio(hazy, airlight_values) -> np.ndarray:
    """Per-pixel ``min_c I^c / A^c``."""
    return np.min(np.asarray(hazy) / np.maximum(airlight_values, EPS_AIRLIGHT), axis=2)


def dark_channel_t(hazy, airlight: AirlightField, omega: float = DEFAULT_OMEGA,
                   patch: int = DEFAULT_PATCH) -> np.ndarray:
    """Dark-channel transmission estimate ``1 - omega * min_window min_c I^c/A^c``.

    The square window of side ``patch`` is intersected with the image at the
    borders (no padding values are invented).
    """
    if not 0 < omega <= 1:
        raise ValueError("omega must lie in (0, 1]")
    if patch < 1 or patch % 2 == 0:
        raise ValueError("patch must be a positive odd integer")
    hazy = np.asarray(hazy, dtype=np.float64)
    ratio = min_ratio(hazy, airlight.values())
    # edge replication only repeats pixels already inside the clipped window
    dark = ndimage.minimum_filter(ratio, size=patch, mode="nearest")
    return np.clip(1.0 - omega * dark, 0.0, 1.0)


def estimate_constant_airlight(hazy, patch: int = DEFAULT_PATCH, fraction: float = 0.001) -> np.ndarray:
    """Constant airlight for the baseline: mean colour of the haziest pixels.

    Pixels are ranked by their windowed dark channel; the brightest
    ``fraction`` of them (at least one) are averaged.
    """
    hazy = np.asarray(hazy, dtype=np.float64)
    dark = ndimage.minimum_filter(hazy.min(axis=2), size=patch, mode="nearest")
    n = max(1, int(dark.size * fraction))
    idx = np.argsort(dark.ravel(), kind="stable")[-n:]
    return hazy.reshape(-1, 3)[idx].mean(axis=0)


def _resolve(base: Path, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _airlight_from_config(cfg: dict, height: int, width: int) -> AirlightField:
    mode = cfg.get("mode", "constant")
    if mode in ("constant", "cbr"):
        value = cfg.get("value")
        if value is None:
            raise SceneSpecError("airlight.value is required for a constant airlight")
        value = np.broadcast_to(np.asarray(value, dtype=np.float64), (3,))
        return AirlightField.constant(value, height, width)
    if mode in ("field", "alf"):
        basis = BasisSet(int(cfg.get("order", 2)), bool(cfg.get("cross_terms", False)))
        weights = np.asarray(cfg.get("weights"), dtype=np.float64)
        if weights.shape != (3, len(basis)):
            raise SceneSpecError(f"airlight.weights must be 3 rows of {len(basis)} values")
        return AirlightField(weights, basis, height, width)
    raise SceneSpecError(f"unknown airlight.mode {mode!r}")


def load_scene_config(path) -> SyntheticSceneSpec:
    """Read a TOML scene description.

    Keys: ``clear`` (image path), ``depth`` (map path) with ``beta``, or
    ``t_map`` (map path or a constant number), ``airlight.mode``
    (``constant``/``field``), ``airlight.value``, ``airlight.order``,
    ``airlight.cross_terms``, ``airlight.weights``, ``noise_sigma``,
    ``quantize``, ``seed``.  Relative paths resolve against the file's folder.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise SceneSpecError(f"{path}: {exc}") from exc
    base = path.parent
    if "clear" not in cfg:
        raise SceneSpecError("scene config needs a 'clear' image")
    sources = {"clear": _resolve(base, cfg["clear"])}
    clear = load_image(sources["clear"])
    h, w = clear.shape[:2]
    depth = transmission = None
    if "depth" in cfg:
        sources["depth"] = _resolve(base, cfg["depth"])
        depth = load_scalar_map(sources["depth"])
    if "t_map" in cfg:
        tm = cfg["t_map"]
        if isinstance(tm, (int, float)):
            transmission = np.full((h, w), float(tm))
        else:
            sources["t_map"] = _resolve(base, tm)
            transmission = load_scalar_map(sources["t_map"])
    for arr, name in ((depth, "depth"), (transmission, "t_map")):
        if arr is not None and arr.shape != (h, w):
            raise SceneSpecError(f"{name} shape {arr.shape} does not match clear image {(h, w)}")
    spec = SyntheticSceneSpec(
        clear=clear,
        airlight=_airlight_from_config(cfg.get("airlight", {}), h, w),
        depth=depth,
        transmission=transmission,
        beta=cfg.get("beta"),
        noise_sigma=float(cfg.get("noise_sigma", 0.0)),
        quantize=bool(cfg.get("quantize", False)),
        seed=int(cfg.get("seed", 0)),
        sources=sources,
    )
    try:
        spec.validate()
    except SceneSpecError:
        raise
    except ValueError as exc:
        raise SceneSpecError(str(exc)) from exc
    return spec
