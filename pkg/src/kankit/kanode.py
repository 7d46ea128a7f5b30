"""Fitting networks as ODE right-hand sides.

The state is rolled out with classical fixed-step RK4 from the first data
row, the loss is the mean squared mismatch against the data at its sample
times (linearly interpolated between rollout nodes when a time falls off
the step grid), and the gradient comes from a discrete adjoint: the exact
reverse sweep of the RK4 recursion, so it matches finite differences of
the rolled-out loss to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from kankit.errors import NumericalAbort
from kankit.training import AdamState, EpochRecord, LossTrace, adam_step

__all__ = [
    "KanOdeConfig",
    "OdeProblem",
    "Trajectory",
    "generate_lv_data",
    "generate_schrodinger_data",
    "kanode_loss",
    "kanode_loss_and_grad",
    "lv_rhs",
    "perturb_lv_data",
    "rk4_integrate",
    "rollout",
    "train_kanode",
]


@dataclass
class OdeProblem:
    """du/dt = rhs(t, u) on t_span, integrated at fixed step dt."""

    rhs: Callable
    u0: np.ndarray
    t_span: tuple[float, float]
    dt: float

    def __post_init__(self):
        self.u0 = np.asarray(self.u0, dtype=np.float64)
        if self.u0.ndim != 1:
            raise ValueError(f"u0 must be a vector, got shape {self.u0.shape}")
        t0, t1 = self.t_span
        if not t1 > t0:
            raise ValueError(f"t_span must be increasing, got {self.t_span}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass
class Trajectory:
    """Sampled states: times[p] goes with states[p]."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.times.ndim != 1 or self.states.ndim != 2:
            raise ValueError("times must be 1-D and states 2-D")
        if self.times.shape[0] != self.states.shape[0]:
            raise ValueError(
                f"{self.times.shape[0]} times vs {self.states.shape[0]} state rows"
            )
        if self.times.shape[0] < 1:
            raise ValueError("a trajectory needs at least one sample")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def window(self, t_lo: float, t_hi: float) -> "Trajectory":
        keep = (self.times >= t_lo - 1e-9) & (self.times <= t_hi + 1e-9)
        return Trajectory(self.times[keep], self.states[keep])

    def at_times(self, wanted, tol: float = 1e-9) -> "Trajectory":
        """Subset at the given times, matched within tol."""
        wanted = np.asarray(wanted, dtype=np.float64)
        idx = []
        for t in wanted:
            hits = np.nonzero(np.abs(self.times - t) <= tol)[0]
            if hits.size == 0:
                raise ValueError(f"time {t} is not a sample time of this trajectory")
            idx.append(hits[0])
        return Trajectory(self.times[idx], self.states[idx])


def rk4_integrate(problem: OdeProblem) -> Trajectory:
    """Classical RK4 at fixed step; the span must be a whole number of steps
    (within rounding).  Aborts if the state stops being finite."""
    t0, t1 = problem.t_span
    steps_f = (t1 - t0) / problem.dt
    n_steps = int(round(steps_f))
    if n_steps < 1 or abs(steps_f - n_steps) > 1e-6:
        raise ValueError(
            f"t_span {problem.t_span} is not a whole number of steps of dt={problem.dt}"
        )
    dt = problem.dt
    dim = problem.u0.shape[0]
    states = np.empty((n_steps + 1, dim))
    states[0] = problem.u0
    u = problem.u0
    rhs = problem.rhs
    for i in range(n_steps):
        t = t0 + i * dt
        k1 = rhs(t, u)
        k2 = rhs(t + dt / 2, u + (dt / 2) * k1)
        k3 = rhs(t + dt / 2, u + (dt / 2) * k2)
        k4 = rhs(t + dt, u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(u).all():
            raise NumericalAbort(f"integration blew up at t={t + dt:g}")
        states[i + 1] = u
    times = t0 + np.arange(n_steps + 1) * dt
    return Trajectory(times, states)


# ---------------------------------------------------------------------------
# data generators


def lv_rhs(alpha=1.5, beta=1.0, gamma=1.0, delta=3.0) -> Callable:
    """Predator-prey right-hand side: prey grows and is eaten, predators
    grow by eating and die off."""

    def rhs(t, u):
        x, y = u
        return np.array([alpha * x - beta * x * y, gamma * x * y - delta * y])

    return rhs


def generate_lv_data(
    alpha=1.5,
    beta=1.0,
    gamma=1.0,
    delta=3.0,
    u0=(1.0, 1.0),
    t_train=3.5,
    t_end=14.0,
    dt=0.1,
    dt_internal=0.001,
):
    """Predator-prey reference data.

    Integrates finely, samples every `dt`, and splits into a training window
    [0, t_train] and a test window [t_train, t_end] that share the boundary
    sample.  Returns (train, test).
    """
    stride = int(round(dt / dt_internal))
    if stride < 1 or abs(dt / dt_internal - stride) > 1e-9:
        raise ValueError(f"dt={dt} must be a whole multiple of dt_internal={dt_internal}")
    fine = rk4_integrate(
        OdeProblem(lv_rhs(alpha, beta, gamma, delta), np.asarray(u0, float), (0.0, t_end), dt_internal)
    )
    states = fine.states[::stride]
    times = np.arange(states.shape[0]) * dt
    split = int(round(t_train / dt))
    if abs(t_train / dt - split) > 1e-9 or not 0 < split < states.shape[0]:
        raise ValueError(f"t_train={t_train} must be an interior multiple of dt={dt}")
    train = Trajectory(times[: split + 1], states[: split + 1])
    test = Trajectory(times[split:], states[split:])
    return train, test


def perturb_lv_data(
    traj: Trajectory,
    n_samples: int = 35,
    noise_frac: float = 0.05,
    seed=None,
    sample_times=None,
) -> Trajectory:
    """Sparse noisy observations of a trajectory.

    Draws `n_samples` sample times uniformly over the trajectory window
    (re-drawing any duplicates), linearly interpolates the states there, and
    applies multiplicative noise u * (1 + noise_frac * U(-1, 1)) per
    component.  Passing `sample_times` skips the random draw.  The same seed
    reproduces the exact same dataset.
    """
    rng = np.random.default_rng(seed)
    if sample_times is None:
        if n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {n_samples}")
        t_lo, t_hi = traj.times[0], traj.times[-1]
        times = np.sort(rng.uniform(t_lo, t_hi, size=n_samples))
        while np.unique(times).size < n_samples:
            times = np.unique(times)
            extra = rng.uniform(t_lo, t_hi, size=n_samples - times.size)
            times = np.sort(np.concatenate([times, extra]))
    else:
        times = np.sort(np.asarray(sample_times, dtype=np.float64))
    states = np.column_stack(
        [np.interp(times, traj.times, traj.states[:, d]) for d in range(traj.dim)]
    )
    if noise_frac:
        states = states * (1.0 + noise_frac * rng.uniform(-1.0, 1.0, size=states.shape))
    return Trajectory(times, states)


def generate_schrodinger_data(
    n_x: int = 33,
    x_span=(-5.0, 5.0),
    t_end=math.pi / 2,
    dt_out=0.01,
    dt_internal=None,
):
    """Bright-soliton wave packet under the focusing cubic nonlinear
    Schrodinger equation i u_t + u_xx / 2 + |u|^2 u = 0.

    Periodic domain discretized at n_x grid points including both endpoints
    (which coincide by periodicity; the simulation runs on the n_x - 1
    unique points and the output duplicates the first of them at the far
    edge).  Each output row stacks the real parts then the imaginary parts,
    giving 2 * n_x values.  Total squared magnitude is conserved; a drift
    beyond 10% aborts rather than returning garbage.
    """
    if n_x < 9:
        raise ValueError(f"n_x must be at least 9, got {n_x}")
    x_lo, x_hi = x_span
    m = n_x - 1
    dx = (x_hi - x_lo) / m
    x = x_lo + np.arange(m) * dx
    u = (1.0 / np.cosh(x)).astype(np.complex128)

    if dt_internal is None:
        dt_internal = dt_out / math.ceil(dt_out / (0.1 * dx * dx))
    sub = int(round(dt_out / dt_internal))
    if sub < 1 or abs(dt_out / dt_internal - sub) > 1e-9:
        raise ValueError("dt_out must be a whole multiple of dt_internal")
    dti = dt_out / sub

    inv_dx2 = 1.0 / (dx * dx)

    def rhs(u):
        lap = (np.roll(u, -1) - 2.0 * u + np.roll(u, 1)) * inv_dx2
        return 1j * (0.5 * lap + np.abs(u) ** 2 * u)

    n_out = int(math.floor(t_end / dt_out + 1e-9))
    states = np.empty((n_out + 1, 2 * n_x))

    def emit(row, u):
        full = np.concatenate([u, u[:1]])
        states[row, :n_x] = full.real
        states[row, n_x:] = full.imag

    emit(0, u)
    mass0 = float((np.abs(u) ** 2).sum() * dx)
    for i in range(n_out):
        for _ in range(sub):
            k1 = rhs(u)
            k2 = rhs(u + (dti / 2) * k1)
            k3 = rhs(u + (dti / 2) * k2)
            k4 = rhs(u + dti * k3)
            u = u + (dti / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        mass = float((np.abs(u) ** 2).sum() * dx)
        if not np.isfinite(mass) or abs(mass - mass0) > 0.10 * mass0:
            raise NumericalAbort(
                f"wave-packet norm drifted {abs(mass - mass0) / mass0:.2%} by "
                f"t={(i + 1) * dt_out:g}; use a smaller dt_internal"
            )
        emit(i + 1, u)
    times = np.arange(n_out + 1) * dt_out
    return Trajectory(times, states)


# ---------------------------------------------------------------------------
# loss and discrete adjoint


def _sample_plan(times, t0: float, dt: float):
    """Map data times onto rollout nodes.

    Returns (n_steps, node_idx, lo_idx, weight): exact node hits where the
    time sits on the step grid (weight entries are -1 there), otherwise
    linear interpolation between lo_idx and lo_idx + 1 with the given
    right-hand weight.
    """
    s = (np.asarray(times, dtype=np.float64) - t0) / dt
    if np.any(s < -1e-9):
        raise ValueError("data times precede the rollout start")
    node = np.rint(s)
    exact = np.abs(s - node) <= 1e-6
    node_idx = np.where(exact, node, -1).astype(int)
    lo = np.floor(s).astype(int)
    w = s - lo
    lo_idx = np.where(exact, 0, lo)
    weight = np.where(exact, -1.0, w)
    n_steps = int(max(node_idx.max(initial=0), (lo_idx + 1).max(initial=0)))
    return max(n_steps, 1), node_idx, lo_idx, weight


def _rollout_states(net, u0, n_steps: int, dt: float, keep_caches: bool):
    """RK4 rollout of du/dt = net(u).  Returns (node_states, step_caches);
    node_states[i] has shape (1, dim)."""
    u = np.asarray(u0, dtype=np.float64).reshape(1, -1)
    nodes = [u]
    caches = [] if keep_caches else None
    for i in range(n_steps):
        k1, c1 = net.forward(u)
        k2, c2 = net.forward(u + (dt / 2.0) * k1)
        k3, c3 = net.forward(u + (dt / 2.0) * k2)
        k4, c4 = net.forward(u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(u).all():
            raise NumericalAbort(f"rollout blew up at step {i + 1} of {n_steps}")
        nodes.append(u)
        if keep_caches:
            caches.append((c1, c2, c3, c4))
    return nodes, caches


def _gather_predictions(nodes, node_idx, lo_idx, weight):
    preds = np.empty((len(node_idx), nodes[0].shape[1]))
    for p, (ni, lo, w) in enumerate(zip(node_idx, lo_idx, weight)):
        if w < 0:
            preds[p] = nodes[ni][0]
        else:
            preds[p] = (1.0 - w) * nodes[lo][0] + w * nodes[lo + 1][0]
    return preds


def kanode_loss(net, data: Trajectory, dt: float) -> float:
    """Rollout MSE of the network-driven ODE against `data`, starting from
    the first data row."""
    n_steps, node_idx, lo_idx, weight = _sample_plan(data.times, data.times[0], dt)
    nodes, _ = _rollout_states(net, data.states[0], n_steps, dt, keep_caches=False)
    preds = _gather_predictions(nodes, node_idx, lo_idx, weight)
    resid = preds - data.states
    return float((resid * resid).mean())


def kanode_loss_and_grad(net, data: Trajectory, dt: float):
    """Loss plus its exact gradient in the flat parameter layout."""
    n_steps, node_idx, lo_idx, weight = _sample_plan(data.times, data.times[0], dt)
    nodes, caches = _rollout_states(net, data.states[0], n_steps, dt, keep_caches=True)
    preds = _gather_predictions(nodes, node_idx, lo_idx, weight)
    resid = preds - data.states
    loss = float((resid * resid).mean())

    # scatter dL/dpred back onto the rollout nodes
    node_bar = np.zeros((n_steps + 1, data.dim))
    g = resid * (2.0 / resid.size)
    for p, (ni, lo, w) in enumerate(zip(node_idx, lo_idx, weight)):
        if w < 0:
            node_bar[ni] += g[p]
        else:
            node_bar[lo] += (1.0 - w) * g[p]
            node_bar[lo + 1] += w * g[p]

    grads = net.new_grad_layers()
    lam = node_bar[n_steps : n_steps + 1].copy()
    sixth = dt / 6.0
    third = dt / 3.0
    half = dt / 2.0
    for i in range(n_steps - 1, -1, -1):
        c1, c2, c3, c4 = caches[i]
        k4_bar = sixth * lam
        a4_bar = net.vjp_into(c4, k4_bar, grads)
        k3_bar = third * lam + dt * a4_bar
        a3_bar = net.vjp_into(c3, k3_bar, grads)
        k2_bar = third * lam + half * a3_bar
        a2_bar = net.vjp_into(c2, k2_bar, grads)
        k1_bar = sixth * lam + half * a2_bar
        a1_bar = net.vjp_into(c1, k1_bar, grads)
        lam = lam + a1_bar + a2_bar + a3_bar + a4_bar
        lam += node_bar[i : i + 1]
    return loss, net.flatten_grads(grads)


def predict_at(net, data: Trajectory, dt: float) -> np.ndarray:
    """Rollout predictions at the data's own sample times (interpolating
    between step nodes where needed), starting from the first data row."""
    n_steps, node_idx, lo_idx, weight = _sample_plan(data.times, data.times[0], dt)
    nodes, _ = _rollout_states(net, data.states[0], n_steps, dt, keep_caches=False)
    return _gather_predictions(nodes, node_idx, lo_idx, weight)


def rollout(net, u0, t0: float, t_end: float, dt: float) -> Trajectory:
    """Integrate du/dt = net(u) and return the node trajectory."""
    steps_f = (t_end - t0) / dt
    n_steps = int(round(steps_f))
    if n_steps < 1 or abs(steps_f - n_steps) > 1e-6:
        raise ValueError(f"window ({t0}, {t_end}) is not a whole number of steps of dt={dt}")
    nodes, _ = _rollout_states(net, u0, n_steps, dt, keep_caches=False)
    times = t0 + np.arange(n_steps + 1) * dt
    return Trajectory(times, np.vstack([n[0] for n in nodes]))


# ---------------------------------------------------------------------------
# training loop


@dataclass
class KanOdeConfig:
    """Knobs of one ODE fit.

    test_stride controls how often the test-window rollout loss is computed:
    every `test_stride` epochs, 0 for final epoch only.  sample_times, when
    given, restricts the training loss to that subset of the data times.
    """

    epochs: int
    lr: float
    dt: float
    sample_times: np.ndarray | None = None
    test_stride: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.test_stride < 0:
            raise ValueError(f"test_stride must be >= 0, got {self.test_stride}")


def train_kanode(net, train: Trajectory, test: Trajectory | None, config: KanOdeConfig):
    """Fit `net` as the right-hand side of the system that produced `train`.

    Returns (net, trace).  The test loss is a fresh rollout over the test
    window from its own first state.  Raises NumericalAbort naming the epoch
    if the rollout or loss stops being finite.
    """
    if config.seed is not None:
        net = type(net).initialize(net.specs, seed=config.seed)
    if config.sample_times is not None:
        train = train.at_times(config.sample_times)
    theta = net.flatten()
    net = net.with_flat(theta)
    state = AdamState.init(theta.shape[0], config.lr)
    trace = LossTrace()

    def test_now(epoch):
        if test is None:
            return False
        if epoch == config.epochs:
            return True
        if config.test_stride == 0:
            return False
        return epoch % config.test_stride == 0

    def eval_test(net):
        return kanode_loss(net, test, config.dt)

    try:
        loss, grad = kanode_loss_and_grad(net, train, config.dt)
        _check(loss)
        trace.append(EpochRecord(0, loss, eval_test(net) if test_now(0) else None))
        for epoch in range(1, config.epochs + 1):
            state, theta = adam_step(state, theta, grad)
            net = net.with_flat(theta)
            if epoch < config.epochs:
                loss, grad = kanode_loss_and_grad(net, train, config.dt)
            else:
                loss = kanode_loss(net, train, config.dt)
            _check(loss)
            trace.append(
                EpochRecord(epoch, loss, eval_test(net) if test_now(epoch) else None)
            )
    except NumericalAbort as exc:
        raise NumericalAbort(f"{exc} (epoch {len(trace.records)})") from None
    return net, trace


def _check(loss: float):
    if not np.isfinite(loss):
        raise NumericalAbort("training loss became non-finite")
