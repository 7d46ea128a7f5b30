"""Scalar activation primitives: Gaussian RBF bases, Swish, input normalizers.

Every learnable activation in this package is a weighted sum of Gaussian
bumps centered on a fixed uniform grid over [-1, 1], plus an optional Swish
term with its own weight.  Layer inputs are squashed into (-1, 1) by a
normalizer first so the grid covers the whole reachable range.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

__all__ = [
    "ActivationWeights",
    "GridSpec",
    "Normalizer",
    "activation_eval",
    "activation_grad",
    "normalize",
    "normalize_deriv",
    "rbf_eval",
    "sigmoid",
    "swish",
    "swish_deriv",
]


class Normalizer(enum.Enum):
    """Squashing function applied to a layer's input before its activations."""

    TANH = "tanh"
    SOFTSIGN = "softsign"
    NONE = "none"


def sigmoid(x):
    """Logistic function (overflow-safe for any argument)."""
    return expit(np.asarray(x, dtype=np.float64))


def swish(x):
    """swish(x) = x * sigmoid(x)."""
    x = np.asarray(x, dtype=np.float64)
    return x * sigmoid(x)


def swish_deriv(x):
    x = np.asarray(x, dtype=np.float64)
    s = sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


def normalize(x, kind: Normalizer):
    x = np.asarray(x, dtype=np.float64)
    if kind is Normalizer.TANH:
        return np.tanh(x)
    if kind is Normalizer.SOFTSIGN:
        return x / (1.0 + np.abs(x))
    if kind is Normalizer.NONE:
        return x
    raise ValueError(f"unknown normalizer {kind!r}")


def normalize_deriv(x, kind: Normalizer):
    x = np.asarray(x, dtype=np.float64)
    if kind is Normalizer.TANH:
        t = np.tanh(x)
        return 1.0 - t * t
    if kind is Normalizer.SOFTSIGN:
        d = 1.0 + np.abs(x)
        return 1.0 / (d * d)
    if kind is Normalizer.NONE:
        return np.ones_like(x)
    raise ValueError(f"unknown normalizer {kind!r}")


def normalize_deriv_from_output(y, kind: Normalizer):
    """Derivative of the normalizer expressed through its own output value.

    tanh' = 1 - tanh^2 and softsign' = (1 - |softsign|)^2, so the training
    path can reuse the cached normalized input instead of recomputing the
    transcendental.
    """
    y = np.asarray(y, dtype=np.float64)
    if kind is Normalizer.TANH:
        return 1.0 - y * y
    if kind is Normalizer.SOFTSIGN:
        d = 1.0 - np.abs(y)
        return d * d
    if kind is Normalizer.NONE:
        return np.ones_like(y)
    raise ValueError(f"unknown normalizer {kind!r}")


def rbf_eval(r, width: float):
    """Gaussian bump exp(-r^2 / (2 width^2)) at radial distance r."""
    if width <= 0:
        raise ValueError(f"width must be positive, got {width}")
    r = np.asarray(r, dtype=np.float64)
    return np.exp(-(r * r) / (2.0 * width * width))


@dataclass(frozen=True)
class GridSpec:
    """Fixed RBF grid: center locations plus the shared bump width.

    Centers are uniform on [-1, 1] with width equal to the center spacing;
    a single-center grid degenerates to {0} with width 1.
    """

    n_points: int
    centers: tuple[float, ...]
    width: float
    # contiguous copy of `centers` so hot loops skip the tuple conversion
    _centers_arr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError(f"grid needs at least one center, got {self.n_points}")
        if len(self.centers) != self.n_points:
            raise ValueError(
                f"grid declares {self.n_points} centers but lists {len(self.centers)}"
            )
        if not self.width > 0:
            raise ValueError(f"grid width must be positive, got {self.width}")
        c = np.asarray(self.centers, dtype=np.float64)
        if self.n_points > 1:
            gaps = np.diff(c)
            if np.any(gaps <= 0):
                raise ValueError("grid centers must be strictly increasing")
            if np.max(np.abs(gaps - self.width)) > 1e-12:
                raise ValueError("grid centers must be evenly spaced by the width")
            if c[0] != -1.0 or c[-1] != 1.0:
                raise ValueError("multi-point grids must span [-1, 1] exactly")
        object.__setattr__(self, "_centers_arr", c)

    @classmethod
    def uniform(cls, n_points: int) -> "GridSpec":
        """n_points centers uniform on [-1, 1]; width = spacing = 2/(n-1)."""
        if n_points < 1:
            raise ValueError(f"grid needs at least one center, got {n_points}")
        if n_points == 1:
            return cls(1, (0.0,), 1.0)
        centers = tuple(np.linspace(-1.0, 1.0, n_points))
        return cls(n_points, centers, 2.0 / (n_points - 1))


@dataclass
class ActivationWeights:
    """Weights of a single activation: one per RBF center plus the base term."""

    rbf: np.ndarray
    base: float = 0.0

    def __post_init__(self):
        self.rbf = np.asarray(self.rbf, dtype=np.float64)
        if self.rbf.ndim != 1:
            raise ValueError(f"rbf weights must be a vector, got shape {self.rbf.shape}")


def activation_eval(x_norm, weights: ActivationWeights, grid: GridSpec, base_on: bool = True):
    """Value of one activation at an already-normalized scalar input."""
    if weights.rbf.shape[0] != grid.n_points:
        raise ValueError(
            f"{weights.rbf.shape[0]} rbf weights for a grid of {grid.n_points} centers"
        )
    psi = rbf_eval(np.abs(x_norm - grid._centers_arr), grid.width)
    out = float(weights.rbf @ psi)
    if base_on:
        out += weights.base * float(swish(x_norm))
    return out


def activation_grad(x_norm, weights: ActivationWeights, grid: GridSpec, base_on: bool = True):
    """Exact derivatives of one activation.

    Returns (d_dx, d_dw) where d_dw stacks the per-center RBF weight
    derivatives followed by the base weight derivative when base_on.
    """
    if weights.rbf.shape[0] != grid.n_points:
        raise ValueError(
            f"{weights.rbf.shape[0]} rbf weights for a grid of {grid.n_points} centers"
        )
    diff = x_norm - grid._centers_arr
    psi = rbf_eval(diff, grid.width)
    dpsi = psi * (-diff / (grid.width * grid.width))
    d_dx = float(weights.rbf @ dpsi)
    if base_on:
        d_dx += weights.base * float(swish_deriv(x_norm))
        d_dw = np.concatenate([psi, [float(swish(x_norm))]])
    else:
        d_dw = psi.copy()
    return d_dx, d_dw
