"""Finite-difference verification of the analytic gradients.

Each case builds a seeded random configuration, a random linear probe of
the output, and compares the analytic gradient of that scalar against
central differences.  The error metric is the max-norm difference scaled
by the larger gradient magnitude, so near-zero components do not inflate
the ratio with finite-difference roundoff noise.
"""

from __future__ import annotations

import numpy as np

from kankit.basis import GridSpec, Normalizer
from kankit.kanode import KanOdeConfig, Trajectory, kanode_loss, kanode_loss_and_grad
from kankit.layers import Add, LayerSpec, Lean, Mult, layer_forward, layer_vjp
from kankit.network import Network, template_layer_specs

__all__ = ["GradCase", "default_cases", "fd_gradient", "rel_error", "run_gradcheck"]

FD_STEP = 1e-6


def fd_gradient(fun, x, step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        bumped = x.copy()
        bumped[i] = x[i] + step
        hi = fun(bumped)
        bumped[i] = x[i] - step
        lo = fun(bumped)
        grad[i] = (hi - lo) / (2.0 * step)
    return grad


def rel_error(analytic, numeric) -> float:
    """Scale-normalized max-norm disagreement between two gradients."""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-12)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


class GradCase:
    """One named gradient comparison; run() returns the relative error."""

    def __init__(self, name: str, runner):
        self.name = name
        self._runner = runner

    def run(self) -> float:
        return self._runner()


def _layer_case(seed: int, kind, n_in: int, n_out: int, grid_n=4,
                normalizer=Normalizer.TANH, base_on=True):
    rng = np.random.default_rng(seed)
    spec = LayerSpec(kind, n_in, n_out, GridSpec.uniform(grid_n),
                     normalizer=normalizer, base_on=base_on)
    net = Network.initialize([spec], seed=seed)
    x = rng.uniform(-2.0, 2.0, size=(3, n_in))
    probe = rng.normal(size=(3, n_out))

    z, cache = layer_forward(spec, net.layers[0][1], x)
    x_bar, g_rbf, g_base = layer_vjp(spec, net.layers[0][1], cache, probe)
    analytic = np.concatenate([x_bar.ravel(), net.flatten_grads([(g_rbf, g_base)])])

    theta0 = net.flatten()
    n_x = x.size

    def scalar(joint):
        xt = joint[:n_x].reshape(x.shape)
        nt = net.with_flat(joint[n_x:])
        zt, _ = layer_forward(spec, nt.layers[0][1], xt)
        return float((zt * probe).sum())

    joint = np.concatenate([x.ravel(), theta0])
    numeric = fd_gradient(scalar, joint)
    return rel_error(analytic, numeric)


def _network_case(seed: int, specs):
    rng = np.random.default_rng(seed)
    net = Network.initialize(specs, seed=seed)
    x = rng.uniform(-2.0, 2.0, size=(2, net.n_in))
    probe = rng.normal(size=(2, net.n_out))

    z, caches = net.forward(x)
    x_bar, grad = net.vjp(caches, probe)

    theta0 = net.flatten()
    n_x = x.size

    def scalar(joint):
        zt, _ = net.with_flat(joint[n_x:]).forward(joint[:n_x].reshape(x.shape))
        return float((zt * probe).sum())

    joint = np.concatenate([x.ravel(), theta0])
    numeric = fd_gradient(scalar, joint)
    return rel_error(np.concatenate([x_bar.ravel(), grad]), numeric)


def _kanode_case(seed: int, specs, n_times=5, dt=0.1):
    rng = np.random.default_rng(seed)
    net = Network.initialize(specs, seed=seed)
    dim = net.n_in
    times = np.arange(n_times) * dt * 1.5  # off the step grid after the first
    states = rng.uniform(0.5, 1.5, size=(n_times, dim))
    data = Trajectory(times, states)

    loss, grad = kanode_loss_and_grad(net, data, dt)
    theta0 = net.flatten()

    def scalar(theta):
        return kanode_loss(net.with_flat(theta), data, dt)

    numeric = fd_gradient(scalar, theta0, step=1e-5)
    return rel_error(grad, numeric)


def default_cases() -> list[GradCase]:
    """The standard battery: single layers of every kind (degenerate wiring
    included), both two-layer templates, and the rollout path."""
    g2 = GridSpec.uniform(2)

    cases = [
        ("add-3x3", lambda: _layer_case(11, Add(), 3, 3)),
        ("add-2x4-softsign", lambda: _layer_case(12, Add(), 2, 4, normalizer=Normalizer.SOFTSIGN)),
        ("add-4x2-nobase", lambda: _layer_case(13, Add(), 4, 2, base_on=False)),
        ("add-3x3-grid1", lambda: _layer_case(14, Add(), 3, 3, grid_n=1)),
        ("mult-3x3", lambda: _layer_case(21, Mult(n_add=1, order=2), 3, 3)),
        ("mult-2x4-order3", lambda: _layer_case(22, Mult(n_add=1, order=3), 2, 4)),
        ("mult-3x2-allprod", lambda: _layer_case(23, Mult(n_add=0, order=2), 3, 2)),
        ("mult-3x3-passthrough", lambda: _layer_case(24, Mult(n_add=3, order=2), 3, 3)),
        ("mult-2x3-nobase", lambda: _layer_case(25, Mult(n_add=1, order=2), 2, 3, base_on=False)),
        ("lean-4x3", lambda: _layer_case(31, Lean(n_mul=2), 4, 3)),
        ("lean-3x2-allmul", lambda: _layer_case(32, Lean(n_mul=3), 3, 2)),
        ("lean-3x4-nomul", lambda: _layer_case(33, Lean(n_mul=0), 3, 4)),
        ("lean-4x2-softsign", lambda: _layer_case(34, Lean(n_mul=3), 4, 2, normalizer=Normalizer.SOFTSIGN)),
        ("lean-3x3-nobase", lambda: _layer_case(35, Lean(n_mul=1), 3, 3, base_on=False)),
        ("lean-2x2-none-norm", lambda: _layer_case(36, Lean(n_mul=1), 2, 2, normalizer=Normalizer.NONE)),
        ("net-mult-first", lambda: _network_case(
            41, template_layer_specs("mult-first", 2, 2, hidden=4, grid_n=3, n_add=2))),
        ("net-lean-second", lambda: _network_case(
            42, template_layer_specs("lean-second", 2, 2, hidden=5, grid_n=3, n_mul=3))),
        ("net-add-add", lambda: _network_case(
            43, template_layer_specs("add", 3, 3, hidden=4, grid_n=2))),
        ("net-lean-second-softsign", lambda: _network_case(
            44, template_layer_specs("lean-second", 4, 4, hidden=3, grid_n=3, n_mul=2,
                                     normalizer=Normalizer.SOFTSIGN))),
        ("ode-add", lambda: _kanode_case(
            51, [LayerSpec(Add(), 2, 2, g2)])),
        ("ode-lean", lambda: _kanode_case(
            52, [LayerSpec(Lean(n_mul=1), 2, 2, g2)])),
        ("ode-mult-first", lambda: _kanode_case(
            53, template_layer_specs("mult-first", 2, 2, hidden=3, grid_n=2, n_add=1))),
        ("ode-lean-second", lambda: _kanode_case(
            54, template_layer_specs("lean-second", 2, 2, hidden=3, grid_n=2, n_mul=2))),
    ]
    return [GradCase(name, runner) for name, runner in cases]


def run_gradcheck(tol: float = 1e-5, cases=None, corrupt: bool = False):
    """Run every case and return (report_text, worst_error, all_passed).

    `corrupt` deliberately biases each comparison, for exercising the
    failure path end to end.
    """
    if cases is None:
        cases = default_cases()
    lines = []
    worst = 0.0
    all_ok = True
    for case in cases:
        err = case.run()
        if corrupt:
            err += 1.0
        ok = err < tol
        all_ok &= ok
        worst = max(worst, err)
        lines.append(f"{'PASS' if ok else 'FAIL'}  {case.name:28s} rel_err={err:.3e}")
    lines.append(
        f"{'PASS' if all_ok else 'FAIL'}  worst case rel_err={worst:.3e} (tol {tol:g})"
    )
    return "\n".join(lines), worst, all_ok
