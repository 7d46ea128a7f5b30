"""Synthetic pairwise-product regression data.

Four inputs, four targets: z = [x1*x2, x3*x4, x1*x2, x3*x4].  A single
layer with the right multiplicative wiring can represent half of these
outputs exactly and has no way to represent the other half, which makes
the dataset a clean probe of which output nodes multiply.
"""

from __future__ import annotations

import io

import numpy as np

from kankit.layers import Add, Lean, LayerKind, Mult
from kankit.training import Dataset

__all__ = ["generate_toy", "learnable_outputs", "toy_targets"]

N_TRAIN = 150
N_TEST = 50


def toy_targets(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 4:
        raise ValueError(f"expected inputs of shape (n, 4), got {x.shape}")
    p12 = x[:, 0] * x[:, 1]
    p34 = x[:, 2] * x[:, 3]
    return np.column_stack([p12, p34, p12, p34])


def generate_toy(seed=0) -> tuple[Dataset, Dataset]:
    """150 train / 50 test samples, inputs uniform on [0, 1]^4.

    One generator seeds both splits (train drawn first), so a fixed seed
    reproduces the exact same arrays.
    """
    rng = np.random.default_rng(seed)
    x_train = rng.uniform(0.0, 1.0, size=(N_TRAIN, 4))
    x_test = rng.uniform(0.0, 1.0, size=(N_TEST, 4))
    return Dataset(x_train, toy_targets(x_train)), Dataset(x_test, toy_targets(x_test))


def learnable_outputs(kind: LayerKind, n_in: int = 4, n_out: int = 4) -> frozenset[int]:
    """Which target outputs (1-based) a single layer of `kind` can represent.

    Defined for the 4 -> 4 layers this dataset is built for:

    * Lean(n_mul=2): every output is phi(x1)*phi(x2) plus an additive tail;
      the tail can vanish, so the x1*x2 targets (1 and 3) are representable
      and the x3*x4 targets are not.
    * Mult(n_add=2, order=2): nodes 1-2 are additive (cannot form products),
      nodes 3-4 each multiply two full-input sums and can realize either
      pairwise product.
    * Add: sums of univariate functions cannot represent any product.
    """
    if (n_in, n_out) != (4, 4):
        raise ValueError(
            f"learnable outputs are only defined for 4 -> 4 layers, got {n_in} -> {n_out}"
        )
    if isinstance(kind, Add):
        return frozenset()
    if isinstance(kind, Lean):
        if kind.n_mul == 2:
            return frozenset({1, 3})
        raise ValueError(f"no static answer for Lean(n_mul={kind.n_mul})")
    if isinstance(kind, Mult):
        if kind.n_add == 2 and kind.order == 2:
            return frozenset({3, 4})
        raise ValueError(f"no static answer for Mult(n_add={kind.n_add}, order={kind.order})")
    raise TypeError(f"unknown layer kind {kind!r}")


def dataset_to_csv(data: Dataset, path) -> None:
    n_in = data.inputs.shape[1]
    n_out = data.targets.shape[1]
    buf = io.StringIO()
    header = [f"x{i + 1}" for i in range(n_in)] + [f"z{i + 1}" for i in range(n_out)]
    buf.write(",".join(header) + "\n")
    for xi, zi in zip(data.inputs, data.targets):
        buf.write(",".join(repr(float(v)) for v in (*xi, *zi)) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
