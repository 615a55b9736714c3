"""Full-reference quality metrics for checking dehazing against ground truth."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

PSNR_CAP_DB = 99.0
_MSE_FLOOR = 1e-10


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b) -> float:
    """PSNR in dB for peak value 1.0, capped at 99 dB for (near-)identical inputs."""
    err = mse(a, b)
    if err < _MSE_FLOOR:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / err))


def mae(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def masked_variance(img, mask) -> float:
    """Mean over channels of the population variance of the masked pixels."""
    img = np.asarray(img, dtype=np.float64)
    mask = np.asarray(mask)
    if mask.shape != img.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match image {img.shape[:2]}")
    sel = mask > 0.5
    if not sel.any():
        raise ValueError("mask selects no pixels")
    pixels = img[sel]
    return float(np.mean(pixels.var(axis=0)))


@dataclass
class EvalReport:
    mse: float
    psnr: float
    t_mae: float | None = None
    a_mae: float | None = None
    sky_variance: float | None = None

    HEADER = "mse,psnr,t_mae,a_mae,sky_variance"

    def csv_line(self) -> str:
        return ",".join("" if v is None else repr(float(v)) for v in asdict(self).values())

    def table(self) -> str:
        rows = []
        for f in fields(self):
            v = getattr(self, f.name)
            rows.append(f"{f.name:<14}{'-' if v is None else format(v, '.6g')}")
        return "\n".join(rows)


def evaluate(pred, truth, t_pred=None, t_truth=None, a_pred=None, a_truth=None, mask=None) -> EvalReport:
    """Collect every metric whose inputs are available."""
    return EvalReport(
        mse=mse(pred, truth),
        psnr=psnr(pred, truth),
        t_mae=mae(t_pred, t_truth) if t_pred is not None and t_truth is not None else None,
        a_mae=mae(a_pred, a_truth) if a_pred is not None and a_truth is not None else None,
        sky_variance=masked_variance(pred, mask) if mask is not None else None,
    )
