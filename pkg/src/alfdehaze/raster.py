"""Image and scalar-map containers plus PNG/PPM/PFM file I/O.

Rasters are float64 arrays of shape (H, W, 3) with channels in [0, 1].
Scalar maps are float64 arrays of shape (H, W).  Intensities are used as
stored; no gamma or colour-management transform is ever applied.
"""
from __future__ import annotations

import os
import warnings
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


class ImageFormatError(ValueError):
    """The file is not a PNG/PPM image (or the extension is unsupported)."""


class CorruptImageError(ValueError):
    """The file claims a supported format but its content cannot be decoded."""


class ClampWarning(UserWarning):
    """Values outside [0, 1] were clamped on export."""


def as_raster(data, name: str = "raster") -> np.ndarray:
    """Validate and return ``data`` as a float64 (H, W, 3) raster."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must contain at least one pixel")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def as_scalar_map(data, shape: tuple[int, int] | None = None, name: str = "map") -> np.ndarray:
    """Validate and return ``data`` as a float64 (H, W) map.

    If ``shape`` is given the map must match it exactly.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.size < 1:
        raise ValueError(f"{name} must have shape (H, W), got {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def check_same_shape(raster: np.ndarray, smap: np.ndarray) -> None:
    if raster.shape[:2] != smap.shape:
        raise ValueError(
            f"dimension mismatch: raster {raster.shape[:2]} vs map {smap.shape}"
        )


def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG or binary PPM (P6) file as a raster in [0, 1].

    Grayscale PNGs are replicated to three channels; alpha is dropped.

    Raises:
        FileNotFoundError: ``path`` does not exist.
        ImageFormatError: not a PNG or PPM file.
        CorruptImageError: the header is recognised but decoding fails.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        img = Image.open(path)
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a PNG or PPM image") from exc
    with img:
        if img.format not in ("PNG", "PPM"):
            raise ImageFormatError(f"{path}: unsupported format {img.format}")
        if img.mode not in ("L", "LA", "RGB", "RGBA", "P"):
            raise ImageFormatError(f"{path}: unsupported pixel mode {img.mode}")
        try:
            img.load()
        except (OSError, SyntaxError, ValueError) as exc:
            raise CorruptImageError(f"{path}: corrupt image data ({exc})") from exc
        rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return rgb.astype(np.float64) / 255.0


def _to_bytes(values: np.ndarray) -> np.ndarray:
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        warnings.warn("values outside [0, 1] clamped on export", ClampWarning, stacklevel=3)
    clamped = np.clip(values, 0.0, 1.0)
    # round half up
    return np.floor(clamped * 255.0 + 0.5).astype(np.uint8)


def quantize(values: np.ndarray) -> np.ndarray:
    """Round values to the nearest 8-bit level (half up), back in [0, 1]."""
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5) / 255.0


def save_image(raster, path) -> None:
    """Write a raster as an 8-bit RGB PNG.

    Channels are clamped to [0, 1] (warning with :class:`ClampWarning` if any
    value was out of range), scaled by 255 and rounded half up.
    """
    arr = np.asarray(raster, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"raster must have shape (H, W, 3), got {arr.shape}")
    Image.fromarray(_to_bytes(arr), mode="RGB").save(Path(path), format="PNG")


def save_scalar_map(smap, path) -> None:
    """Write a scalar map as PFM (``.pfm``, lossless float32) or grayscale PNG (``.png``)."""
    arr = as_scalar_map(smap)
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".pfm":
        write_pfm(arr, path)
    elif ext == ".png":
        Image.fromarray(_to_bytes(arr), mode="L").save(Path(path), format="PNG")
    else:
        raise ImageFormatError(f"unsupported scalar-map extension {ext!r} (use .pfm or .png)")


def write_pfm(smap, path) -> None:
    """Write a grayscale little-endian PFM (``Pf``, scale -1.0).

    PFM stores rows bottom-to-top; values are stored as float32.
    """
    arr = np.asarray(smap)
    if arr.ndim != 2:
        raise ValueError("PFM writer only handles single-channel maps")
    height, width = arr.shape
    body = np.flipud(arr).astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(b"Pf\n%d %d\n-1.0\n" % (width, height))
        fh.write(body)


def read_pfm(path) -> np.ndarray:
    """Read a PFM file written by :func:`write_pfm` (``Pf`` or ``PF``, either endianness).

    Returns float64 of shape (H, W) for ``Pf`` and (H, W, 3) for ``PF``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such PFM file: {path}")
    with open(path, "rb") as fh:
        tag = fh.readline().strip()
        if tag not in (b"Pf", b"PF"):
            raise ImageFormatError(f"{path}: not a PFM file")
        try:
            width, height = (int(v) for v in fh.readline().split())
            scale = float(fh.readline().strip())
        except ValueError as exc:
            raise CorruptImageError(f"{path}: malformed PFM header") from exc
        channels = 1 if tag == b"Pf" else 3
        dtype = "<f4" if scale < 0 else ">f4"
        count = width * height * channels
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size != count:
        raise CorruptImageError(f"{path}: expected {count} floats, found {data.size}")
    shape = (height, width) if channels == 1 else (height, width, 3)
    return np.flipud(data.reshape(shape)).astype(np.float64)


def load_scalar_map(path) -> np.ndarray:
    """Load a scalar map from PFM or from a grayscale/RGB PNG (first channel)."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".pfm":
        arr = read_pfm(path)
        return arr if arr.ndim == 2 else arr[..., 0]
    return load_image(path)[..., 0].copy()

