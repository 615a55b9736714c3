"""2D Legendre basis over normalized image coordinates and the airlight field.

The airlight of channel ``c`` at pixel ``x`` is ``sum_i w[c, i] * g_i(u, v)``
where each ``g_i`` is a product ``P_a(u) P_b(v)`` of 1D Legendre polynomials
and ``(u, v)`` are pixel coordinates mapped corner-to-corner onto [-1, 1]^2.
A constant airlight is the one-member case ``g_0 = 1``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

#: lower clamp applied to evaluated airlight before it is used as a divisor
EPS_AIRLIGHT = 1e-3

WEIGHTS_CSV_HEADER = ("channel", "index", "degree_u", "degree_v", "weight")
CHANNELS = ("r", "g", "b")


def legendre_1d(k: int, u):
    """Legendre polynomial ``P_k(u)`` by Bonnet's recurrence.

    ``u`` may be a scalar or an array; values outside [-1, 1] are allowed.
    """
    if k < 0:
        raise ValueError("degree must be non-negative")
    u = np.asarray(u, dtype=np.float64)
    p_prev = np.ones_like(u)
    if k == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = u.copy()
    for n in range(1, k):
        p_prev, p = p, ((2 * n + 1) * u * p - n * p_prev) / (n + 1)
    return p if p.ndim else float(p)


def legendre_1d_deriv(k: int, u):
    """Derivative ``P_k'(u)`` using ``P'_{n+1} = P'_{n-1} + (2n+1) P_n``."""
    u = np.asarray(u, dtype=np.float64)
    d = [np.zeros_like(u), np.ones_like(u)]
    for n in range(1, k):
        d.append(d[n - 1] + (2 * n + 1) * legendre_1d(n, u))
    out = d[k]
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BasisSet:
    """Ordered family of products ``P_a(u) P_b(v)`` with ``a + b <= order``.

    Members are sorted by total degree, then by u-degree descending, so the
    constant member always comes first.  Without cross terms only the pure
    ``P_a(u)`` and ``P_b(v)`` members are kept (``M = 2n + 1``); with them
    every product of total degree ``<= n`` is used (``M = (n+1)(n+2)/2``).
    """

    order: int
    include_cross_terms: bool = False
    degrees: tuple[tuple[int, int], ...] = field(init=False)

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("basis order must be non-negative")
        degrees = []
        for total in range(self.order + 1):
            for a in range(total, -1, -1):
                b = total - a
                if self.include_cross_terms or a == 0 or b == 0:
                    degrees.append((a, b))
        object.__setattr__(self, "degrees", tuple(degrees))

    def __len__(self) -> int:
        return len(self.degrees)

    def evaluate(self, u, v) -> np.ndarray:
        """Evaluate every member at ``(u, v)``; result has a leading axis of size M."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        pu = [legendre_1d(a, u) for a in range(self.order + 1)]
        pv = [legendre_1d(b, v) for b in range(self.order + 1)]
        return np.stack([np.asarray(pu[a] * pv[b], dtype=np.float64) for a, b in self.degrees])

    def evaluate_grad(self, u, v) -> tuple[np.ndarray, np.ndarray]:
        """Partial derivatives of every member w.r.t. ``u`` and ``v``."""
        du = np.stack([legendre_1d_deriv(a, u) * legendre_1d(b, v) for a, b in self.degrees])
        dv = np.stack([legendre_1d(a, u) * legendre_1d_deriv(b, v) for a, b in self.degrees])
        return du, dv

    def on_grid(self, height: int, width: int) -> np.ndarray:
        """Basis values on a pixel grid, shape (M, H, W)."""
        u, v = coordinate_grid(height, width)
        return self.evaluate(u, v)


def build_basis(order: int, include_cross_terms: bool = False) -> BasisSet:
    return BasisSet(order, include_cross_terms)


def normalize_coords(x, y, width: int, height: int):
    """Map pixel column/row to ``[-1, 1]``; a 1-pixel dimension maps to 0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    u = 2.0 * x / (width - 1) - 1.0 if width > 1 else np.zeros_like(x)
    v = 2.0 * y / (height - 1) - 1.0 if height > 1 else np.zeros_like(y)
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


def coordinate_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized ``(u, v)`` arrays of shape (H, W)."""
    ys, xs = np.mgrid[0:height, 0:width]
    return normalize_coords(xs, ys, width, height)


def combine_members(weights, members) -> np.ndarray:
    """``sum_i w_i^c g_i`` for (3, M) weights and (M, H, W) member values -> (H, W, 3)."""
    m, h, w = members.shape
    return (np.asarray(weights) @ members.reshape(m, -1)).T.reshape(h, w, 3)


@dataclass(frozen=True, eq=False)
class AirlightField:
    """Airlight as per-channel weights over a shared basis on an image grid.

    ``weights`` has shape (3, M).  A constant (CBR) airlight is an order-0
    basis with ``weights[:, 0]`` holding the RGB triple.
    """

    weights: np.ndarray
    basis: BasisSet
    height: int
    width: int

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.shape != (3, len(self.basis)):
            raise ValueError(f"weights must have shape (3, {len(self.basis)}), got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def constant(cls, rgb, height: int, width: int) -> "AirlightField":
        rgb = np.asarray(rgb, dtype=np.float64).reshape(3, 1)
        return cls(rgb, BasisSet(0), height, width)

    @property
    def is_constant(self) -> bool:
        return self.basis.order == 0

    @cached_property
    def basis_values(self) -> np.ndarray:
        return self.basis.on_grid(self.height, self.width)

    def raw(self) -> np.ndarray:
        """Unclamped field values, shape (H, W, 3)."""
        return combine_members(self.weights, self.basis_values)

    def values(self) -> np.ndarray:
        """Field values clamped to ``[EPS_AIRLIGHT, 1]``, shape (H, W, 3)."""
        return np.clip(self.raw(), EPS_AIRLIGHT, 1.0)

    def at(self, x: int, y: int, channel: int) -> float:
        return eval_field(self, x, y, channel)


def eval_field(airlight: AirlightField, x: int, y: int, channel) -> float:
    """Clamped airlight value of one channel at pixel column ``x``, row ``y``."""
    if not (0 <= x < airlight.width and 0 <= y < airlight.height):
        raise IndexError(f"pixel ({x}, {y}) outside {airlight.width}x{airlight.height} image")
    c = CHANNELS.index(channel) if isinstance(channel, str) else int(channel)
    u, v = normalize_coords(x, y, airlight.width, airlight.height)
    g = airlight.basis.evaluate(u, v)
    value = float(np.dot(airlight.weights[c], g))
    return min(max(value, EPS_AIRLIGHT), 1.0)


def write_weights_csv(airlight: AirlightField, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(WEIGHTS_CSV_HEADER)
        for c, name in enumerate(CHANNELS):
            for i, (a, b) in enumerate(airlight.basis.degrees):
                writer.writerow([name, i, a, b, repr(float(airlight.weights[c, i]))])


def read_weights_csv(path, height: int, width: int) -> AirlightField:
    """Rebuild a field from a weights CSV; the basis is inferred from the degrees."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != WEIGHTS_CSV_HEADER:
        raise ValueError(f"{path}: expected header {','.join(WEIGHTS_CSV_HEADER)}")
    degrees = []
    for row in rows:
        d = (int(row["degree_u"]), int(row["degree_v"]))
        if d not in degrees:
            degrees.append(d)
    order = max(a + b for a, b in degrees)
    cross = any(a and b for a, b in degrees)
    basis = BasisSet(order, cross)
    if tuple(degrees) != basis.degrees:
        raise ValueError(f"{path}: degrees do not form a supported basis")
    weights = np.zeros((3, len(basis)))
    for row in rows:
        weights[CHANNELS.index(row["channel"]), int(row["index"])] = float(row["weight"])
    return AirlightField(weights, basis, height, width)
