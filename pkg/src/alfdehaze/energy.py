"""Dehazing energy: data term, SAD smoothness, haze-level prior, gradients and
closed-form airlight updates.

All image-sized quantities are numpy arrays: ``I`` and ``J`` are (H, W, 3),
``t`` is (H, W), airlight values are (H, W, 3).  Neighbourhoods are
4-connected; border pixels only see the neighbours that exist.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np

from .basis import EPS_AIRLIGHT, AirlightField, BasisSet

#: denominators of the least-squares updates below this are treated as singular
EPS_DENOMINATOR = 1e-9

RESIDUAL_VARIANTS = ("eq13", "eq14")
ENERGY_CSV_HEADER = "iter,data,smooth_t,smooth_J,haze_level,weight_penalty,total"


class DegenerateUpdateError(ArithmeticError):
    """The least-squares denominator vanished (e.g. ``t == 1`` everywhere)."""


class DegenerateUpdateWarning(RuntimeWarning):
    """Some airlight weights could not be updated and kept their old value."""


@dataclass(frozen=True)
class Hyperparameters:
    lambda1: float = 0.1      # transmission smoothness
    lambda2: float = 0.0001   # image smoothness
    lambda3: float = 1.0      # haze-level prior
    lambda4: float = 0.1      # penalty on non-constant airlight weights
    residual: str = "eq14"

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if self.residual not in RESIDUAL_VARIANTS:
            raise ValueError(f"residual must be one of {RESIDUAL_VARIANTS}")


@dataclass(frozen=True)
class EnergyBreakdown:
    data: float
    smooth_t: float
    smooth_J: float
    haze_level: float
    weight_penalty: float
    total: float

    def csv_row(self, iteration: int) -> str:
        values = [repr(float(getattr(self, f.name))) for f in fields(self)]
        return ",".join([str(iteration)] + values)

    def as_dict(self) -> dict:
        return asdict(self)


def airlight_values(airlight, shape) -> np.ndarray:
    """Clamped airlight as an (H, W, 3) array from a field, an array or an RGB triple."""
    if isinstance(airlight, AirlightField):
        return airlight.values()
    a = np.asarray(airlight, dtype=np.float64)
    return np.clip(np.broadcast_to(a, tuple(shape[:2]) + (3,)), EPS_AIRLIGHT, 1.0)


def _channel_sum(x) -> np.ndarray:
    # explicit adds are much faster than a reduction over a length-3 last axis
    return x[..., 0] + x[..., 1] + x[..., 2]


# --- smoothness -------------------------------------------------------------

def sad_map(u) -> np.ndarray:
    """Sum of absolute differences to the 4-neighbours at every pixel.

    ``u`` is (H, W) or (H, W, C); the extra axis is treated channel-wise.
    """
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    dx = np.abs(u[:, 1:] - u[:, :-1])
    dy = np.abs(u[1:] - u[:-1])
    out[:, :-1] += dx
    out[:, 1:] += dx
    out[:-1] += dy
    out[1:] += dy
    return out


def sad_rho(u, x: int, y: int) -> float | np.ndarray:
    """SAD smoothness at a single pixel (column ``x``, row ``y``)."""
    u = np.asarray(u, dtype=np.float64)
    h, w = u.shape[:2]
    total = np.zeros(u.shape[2:])
    for yy, xx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
        if 0 <= yy < h and 0 <= xx < w:
            total = total + np.abs(u[y, x] - u[yy, xx])
    return float(total) if total.ndim == 0 else total


def sign_sum(u) -> np.ndarray:
    """``sum_{y in N_x} sgn(u(x) - u(y))`` at every pixel, with ``sgn(0) = 0``."""
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    sx = np.sign(u[:, 1:] - u[:, :-1])
    sy = np.sign(u[1:] - u[:-1])
    out[:, 1:] += sx
    out[:, :-1] -= sx
    out[1:] += sy
    out[:-1] -= sy
    return out


# --- haze-level prior -------------------------------------------------------

def _prior_ratio(I, A, variant: str) -> np.ndarray:
    I = np.asarray(I, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if variant == "eq13":
        return I / A
    if variant == "eq14":
        lo = np.minimum(np.minimum(I[..., 0], I[..., 1]), I[..., 2])
        return lo[..., None] / A
    raise ValueError(f"unknown residual variant {variant!r}")


def haze_residual(t, I, A, variant: str = "eq14") -> np.ndarray:
    """Per-channel haze-level residual ``t - 1 + ratio``.

    ``eq13`` uses each channel's own ``I^c / A^c``; ``eq14`` uses
    ``min_c I^c / A^c`` (the minimum taken over the numerator only).
    Works for a single pixel (``I``, ``A`` of shape (3,)) or whole images.
    """
    return np.asarray(t, dtype=np.float64)[..., None] - 1.0 + _prior_ratio(I, A, variant)


def optimal_t_prior(I, A, variant: str = "eq14"):
    """Transmission minimising the haze-level cost alone, clamped to [0, 1].

    ``sum_c (t - 1 + q_c)^2`` is minimised by ``t = 1 - mean_c q_c``.
    """
    t = np.clip(1.0 - _prior_ratio(I, A, variant).mean(axis=-1), 0.0, 1.0)
    return float(t) if np.ndim(t) == 0 else t


# --- energy and gradients ---------------------------------------------------

def data_residual(I, t, J, A) -> np.ndarray:
    """``I - t J - (1 - t) A`` per channel."""
    tt = np.asarray(t)[..., None]
    return I - tt * J - (1.0 - tt) * A


def data_term(I, t, J, A) -> float:
    r = data_residual(I, t, J, A)
    return float(np.sum(r * r))


def weight_penalty(weights) -> float:
    w = np.asarray(weights, dtype=np.float64)
    return float(np.sum(w[:, 1:] ** 2))


def energy_terms(I, t, J, A, weights, hp: Hyperparameters) -> EnergyBreakdown:
    """Energy with precomputed (clamped) airlight values ``A``."""
    data = data_term(I, t, J, A)
    smooth_t = float(np.sum(sad_map(t)))
    smooth_j = float(np.sum(sad_map(J)))
    r = haze_residual(t, I, A, hp.residual)
    haze = float(np.sum(r * r))
    penalty = weight_penalty(weights) if weights is not None else 0.0
    total = (data + hp.lambda1 * smooth_t + hp.lambda2 * smooth_j
             + hp.lambda3 * haze + hp.lambda4 * penalty)
    return EnergyBreakdown(data, smooth_t, smooth_j, haze, penalty, total)


def energy_density(I, t, J, airlight, hp: Hyperparameters | None = None) -> np.ndarray:
    """Per-pixel contributions to the energy, shape (H, W), excluding the weight penalty.

    ``density.sum() + lambda4 * penalty`` equals the total energy.  Differencing
    two densities before summing avoids the cancellation error of differencing
    two large totals, which matters for finite-difference checks.
    """
    hp = hp or Hyperparameters()
    I = np.asarray(I, dtype=np.float64)
    A = airlight_values(airlight, I.shape)
    r = data_residual(I, t, J, A)
    q = haze_residual(t, I, A, hp.residual)
    return (_channel_sum(r * r) + hp.lambda1 * sad_map(t) + hp.lambda2 * _channel_sum(sad_map(J))
            + hp.lambda3 * _channel_sum(q * q))


def total_energy(I, t, J, airlight, hp: Hyperparameters | None = None) -> EnergyBreakdown:
    """Full energy of an iterate ``(t, J, airlight)`` given the hazy image ``I``.

    ``airlight`` may be an :class:`AirlightField` (its non-constant weights
    are penalised) or plain values/an RGB triple (no weight penalty).
    """
    hp = hp or Hyperparameters()
    I = np.asarray(I, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    J = np.asarray(J, dtype=np.float64)
    if I.shape != J.shape or I.shape[:2] != t.shape:
        raise ValueError(f"dimension mismatch: I {I.shape}, t {t.shape}, J {J.shape}")
    A = airlight_values(airlight, I.shape)
    weights = airlight.weights if isinstance(airlight, AirlightField) else None
    return energy_terms(I, t, J, A, weights, hp)


def grad_t(I, t, J, airlight, hp: Hyperparameters | None = None) -> np.ndarray:
    """Gradient of the energy w.r.t. every ``t(x)``, shape (H, W)."""
    hp = hp or Hyperparameters()
    A = airlight_values(airlight, np.shape(I))
    r = data_residual(I, t, J, A)
    g = 2.0 * _channel_sum(r * (A - J))
    if hp.lambda1:
        g += 2.0 * hp.lambda1 * sign_sum(t)
    if hp.lambda3:
        g += 2.0 * hp.lambda3 * _channel_sum(haze_residual(t, I, A, hp.residual))
    return g


def grad_J(I, t, J, airlight, hp: Hyperparameters | None = None) -> np.ndarray:
    """Gradient of the energy w.r.t. every ``J^c(x)``, shape (H, W, 3)."""
    hp = hp or Hyperparameters()
    A = airlight_values(airlight, np.shape(I))
    r = data_residual(I, t, J, A)
    g = 2.0 * r * (-np.asarray(t)[..., None])
    if hp.lambda2:
        g += 2.0 * hp.lambda2 * sign_sum(J)
    return g


# --- closed-form airlight updates -------------------------------------------

def update_constant_airlight(I, t, J) -> np.ndarray:
    """Least-squares constant airlight for fixed ``t`` and ``J``, clamped to [eps, 1].

    Raises:
        DegenerateUpdateError: ``sum (1 - t)^2`` is (numerically) zero.
    """
    omt = 1.0 - np.asarray(t, dtype=np.float64)
    r = np.asarray(I) - np.asarray(t)[..., None] * np.asarray(J)
    den = np.sum(omt ** 2)
    if not den > EPS_DENOMINATOR:
        raise DegenerateUpdateError("sum (1 - t)^2 vanishes; airlight is unobservable")
    num = np.sum(r * omt[..., None], axis=(0, 1))
    return np.clip(num / den, EPS_AIRLIGHT, 1.0)


def update_weights(I, t, J, basis, lambda4: float, previous=None) -> np.ndarray:
    """Coordinate-wise least-squares airlight weights, shape (3, M).

    Each weight is computed on its own, as if the other members were absent::

        w_i = sum (I - tJ)(1 - t) g_i / (sum (1 - t)^2 g_i^2 + lambda4 [i > 0])

    This equals the joint least-squares solution only when the
    ``(1 - t)^2``-weighted Gram matrix of the basis is diagonal.  Weights
    with a vanishing denominator keep their ``previous`` value (zero if none)
    and a :class:`DegenerateUpdateWarning` is emitted.

    ``basis`` is a :class:`BasisSet` or precomputed values of shape (M, H, W).
    """
    I = np.asarray(I, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    g = basis.on_grid(*t.shape) if isinstance(basis, BasisSet) else np.asarray(basis)
    m = g.shape[0]
    omt = 1.0 - t
    r = I - t[..., None] * np.asarray(J)
    ro = r * omt[..., None]
    omt2 = omt ** 2
    out = np.zeros((3, m)) if previous is None else np.array(previous, dtype=np.float64)
    bad = []
    for i in range(m):
        den = np.sum(omt2 * g[i] ** 2) + (lambda4 if i else 0.0)
        if not den > EPS_DENOMINATOR:
            bad.append(i)
            continue
        out[:, i] = np.sum(ro * g[i][..., None], axis=(0, 1)) / den
    if bad:
        warnings.warn(f"airlight weights {bad} left unchanged: singular denominator",
                      DegenerateUpdateWarning, stacklevel=2)
    return out


def solve_weights(I, t, J, basis, lambda4: float, previous=None) -> np.ndarray:
    """Joint least-squares airlight weights for fixed ``t`` and ``J``, shape (3, M).

    Minimises ``sum_x,c (I - tJ - (1 - t) A)^2 + lambda4 * sum_c sum_{i>0} w_i^2``
    exactly by solving the M x M normal equations.  Every coordinate of the
    result therefore minimises its own 1D slice of that objective.  It
    coincides with :func:`update_weights` when the weighted Gram matrix is
    diagonal, and is computed with identical arithmetic when ``M == 1``.
    """
    t = np.asarray(t, dtype=np.float64)
    g = basis.on_grid(*t.shape) if isinstance(basis, BasisSet) else np.asarray(basis)
    m = g.shape[0]
    if m == 1:
        return update_weights(I, t, J, g, lambda4, previous)
    omt = 1.0 - t
    r = np.asarray(I, dtype=np.float64) - t[..., None] * np.asarray(J)
    gw = g * omt                                   # (M, H, W)
    gw = gw.reshape(m, -1)
    gram = gw @ gw.T
    gram[1:, 1:] += lambda4 * np.eye(m - 1)
    rhs = (gw @ r.reshape(-1, 3)).T               # (3, M)
    if not gram[0, 0] > EPS_DENOMINATOR or np.linalg.cond(gram) > 1e12:
        warnings.warn("airlight normal equations are singular; weights left unchanged",
                      DegenerateUpdateWarning, stacklevel=2)
        return np.zeros((3, m)) if previous is None else np.array(previous, dtype=np.float64)
    return np.linalg.solve(gram, rhs.T).T
