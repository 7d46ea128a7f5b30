"""Full-batch gradient training: MSE loss, Adam, and the regression loop.

Runs are deterministic for a fixed seed; every epoch does one forward and
one backward pass over the whole training set.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from kankit.errors import NumericalAbort

__all__ = [
    "AdamState",
    "Dataset",
    "EpochRecord",
    "LossTrace",
    "adam_step",
    "mse_and_grad",
    "train_regression",
]


@dataclass
class Dataset:
    """Paired inputs and targets, row per sample."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise ValueError("inputs and targets must be 2-D arrays")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"{self.inputs.shape[0]} input rows vs {self.targets.shape[0]} target rows"
            )
        if not (np.isfinite(self.inputs).all() and np.isfinite(self.targets).all()):
            raise ValueError("dataset contains non-finite values")

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, n_params: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        return cls(np.zeros(n_params), np.zeros(n_params), 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray):
    """One Adam update with bias correction.  Returns (state, new_params);
    the input arrays are not mutated."""
    if grad.shape != params.shape or grad.shape != state.m.shape:
        raise ValueError(
            f"shape mismatch: params {params.shape}, grad {grad.shape}, state {state.m.shape}"
        )
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)
    return new_state, new_params


def mse_and_grad(net, data: Dataset):
    """Mean squared error over all samples and outputs, its gradient in the
    flat parameter layout, and the per-output error vector."""
    pred, caches = net.forward(data.inputs)
    resid = pred - data.targets
    per_output = (resid * resid).mean(axis=0)
    loss = float(per_output.mean())
    z_bar = resid * (2.0 / resid.size)
    _, grad = net.vjp(caches, z_bar)
    return loss, grad, per_output


def mse_only(net, data: Dataset):
    pred = net.predict(data.inputs)
    resid = pred - data.targets
    per_output = (resid * resid).mean(axis=0)
    return float(per_output.mean()), per_output


@dataclass
class EpochRecord:
    epoch: int
    train_mse: float
    test_mse: float | None = None
    per_output_train: np.ndarray | None = None


@dataclass
class LossTrace:
    """Loss history of one run; epoch 0 is the untouched initialization."""

    records: list[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord):
        self.records.append(record)

    @property
    def final(self) -> EpochRecord:
        return self.records[-1]

    def final_test_mse(self) -> float | None:
        for rec in reversed(self.records):
            if rec.test_mse is not None:
                return rec.test_mse
        return None

    def to_csv(self, path) -> None:
        n_out = 0
        for rec in self.records:
            if rec.per_output_train is not None:
                n_out = len(rec.per_output_train)
                break
        buf = io.StringIO()
        header = ["epoch", "train_mse", "test_mse"]
        header += [f"out{i + 1}_train" for i in range(n_out)]
        buf.write(",".join(header) + "\n")
        for rec in self.records:
            row = [str(rec.epoch), repr(rec.train_mse)]
            row.append("" if rec.test_mse is None else repr(rec.test_mse))
            if n_out:
                row += [repr(float(v)) for v in rec.per_output_train]
            buf.write(",".join(row) + "\n")
        with open(path, "w") as fh:
            fh.write(buf.getvalue())


def train_regression(net, train: Dataset, test: Dataset | None, epochs: int, lr: float, seed=None):
    """Fit `net` to `train` with full-batch Adam.

    When `seed` is given the weights are re-initialized from it first.
    Returns (net, trace) where trace holds epochs + 1 records.  Aborts with
    NumericalAbort naming the epoch if the loss stops being finite.
    """
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if seed is not None:
        net = type(net).initialize(net.specs, seed=seed)
    theta = net.flatten()
    net = net.with_flat(theta)
    state = AdamState.init(theta.shape[0], lr)
    trace = LossTrace()

    loss, grad, per_out = mse_and_grad(net, train)
    test_mse = mse_only(net, test)[0] if test is not None else None
    _check_finite(loss, 0)
    trace.append(EpochRecord(0, loss, test_mse, per_out))

    for epoch in range(1, epochs + 1):
        state, theta = adam_step(state, theta, grad)
        net = net.with_flat(theta)
        if epoch < epochs:
            loss, grad, per_out = mse_and_grad(net, train)
        else:
            loss, per_out = mse_only(net, train)
        _check_finite(loss, epoch)
        test_mse = mse_only(net, test)[0] if test is not None else None
        trace.append(EpochRecord(epoch, loss, test_mse, per_out))
    return net, trace


def _check_finite(loss: float, epoch: int):
    if not np.isfinite(loss):
        raise NumericalAbort(f"training loss became non-finite at epoch {epoch}")
