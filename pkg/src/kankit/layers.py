"""KAN layer variants and their exact reverse-mode derivatives.

Three layer kinds share one edge parameterization (an RBF-basis activation
per input/output pair, optional Swish base term) and differ in how edge
values reduce to node outputs:

* ``Add``  - every output node sums its incoming activations.
* ``Mult`` - an enlarged additive sublayer is computed first; its first
  ``n_add`` entries pass through unchanged and the remaining entries are
  grouped into consecutive blocks of ``order`` values whose products form
  the remaining output nodes.
* ``Lean`` - the first ``n_mul`` inputs reach each output node through the
  product of their edge activations, the remaining inputs through a sum,
  and the node emits the sum of the two reductions.

Forward functions take a batch ``x`` of shape (n_samples, n_in) and return
``(z, cache)``; the cache carries exactly the intermediates the matching
VJP needs.  The ODE training loop calls these with batch size 1 many
thousands of times per fit, so the hot paths lean on flattened matmuls and
avoid per-call reshapes of the weight arrays (see ``_ops``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from kankit.basis import GridSpec, Normalizer

__all__ = [
    "Add",
    "LayerParams",
    "LayerSpec",
    "Lean",
    "Mult",
    "count_activations",
    "count_parameters",
    "init_layer_params",
    "layer_forward",
    "layer_vjp",
]


@dataclass(frozen=True)
class Add:
    """Purely additive output nodes."""


@dataclass(frozen=True)
class Mult:
    """Product-node layer: n_add passthrough nodes, then products of `order`
    consecutive sublayer entries."""

    n_add: int
    order: int = 2


@dataclass(frozen=True)
class Lean:
    """Split-input layer: the first n_mul inputs multiply into each output,
    the rest add."""

    n_mul: int


LayerKind = Add | Mult | Lean


@dataclass(frozen=True)
class LayerSpec:
    """Shape and wiring of one layer; holds no weights."""

    kind: LayerKind
    n_in: int
    n_out: int
    grid: GridSpec
    normalizer: Normalizer = Normalizer.TANH
    base_on: bool = True

    def __post_init__(self):
        if self.n_in < 1 or self.n_out < 1:
            raise ValueError(f"layer needs n_in, n_out >= 1, got {self.n_in}, {self.n_out}")
        k = self.kind
        if isinstance(k, Mult):
            if k.order < 2:
                raise ValueError(f"product order must be >= 2, got {k.order}")
            if not 0 <= k.n_add <= self.n_out:
                raise ValueError(
                    f"n_add must lie in [0, n_out={self.n_out}], got {k.n_add}"
                )
        elif isinstance(k, Lean):
            if not 0 <= k.n_mul <= self.n_in:
                raise ValueError(
                    f"n_mul must lie in [0, n_in={self.n_in}], got {k.n_mul}"
                )
        elif not isinstance(k, Add):
            raise TypeError(f"unknown layer kind {k!r}")

    @property
    def n_sub(self) -> int:
        """Width of the additive sublayer actually parameterized by edges."""
        if isinstance(self.kind, Mult):
            return self.kind.n_add + self.kind.order * (self.n_out - self.kind.n_add)
        return self.n_out


def count_activations(spec: LayerSpec) -> int:
    """Number of learnable edge activations: one per input/sublayer pair."""
    return spec.n_in * spec.n_sub


def count_parameters(spec: LayerSpec) -> int:
    """Scalar parameters: each activation has one weight per grid center plus
    the base-term weight when the base branch is on."""
    per_edge = spec.grid.n_points + (1 if spec.base_on else 0)
    return count_activations(spec) * per_edge


class LayerParams:
    """Weight arrays of one layer.

    w_rbf[s, j, i] scales grid basis i on the edge from input j to sublayer
    node s; w_base[s, j] scales the Swish term of that edge (None when the
    layer spec has base_on=False).  Treat instances as read-only: derived
    matmul operands are cached on first use.
    """

    __slots__ = ("w_rbf", "w_base", "_ops")

    def __init__(self, w_rbf, w_base=None):
        self.w_rbf = np.asarray(w_rbf, dtype=np.float64)
        if self.w_rbf.ndim != 3:
            raise ValueError(f"w_rbf must be (n_sub, n_in, grid), got {self.w_rbf.shape}")
        if w_base is None:
            self.w_base = None
        else:
            self.w_base = np.asarray(w_base, dtype=np.float64)
            if self.w_base.shape != self.w_rbf.shape[:2]:
                raise ValueError(
                    f"w_base shape {self.w_base.shape} does not match "
                    f"w_rbf leading dims {self.w_rbf.shape[:2]}"
                )
        self._ops = None


def init_layer_params(spec: LayerSpec, rng: np.random.Generator) -> LayerParams:
    """Seeded uniform init: rbf weights ~ U(-1/sqrt(grid), 1/sqrt(grid)),
    base weights ~ U(-0.5, 0.5).  Draw order is fixed (rbf block first)."""
    n_sub, n_in, n = spec.n_sub, spec.n_in, spec.grid.n_points
    scale = 1.0 / np.sqrt(n)
    w_rbf = rng.uniform(-scale, scale, size=(n_sub, n_in, n))
    w_base = rng.uniform(-0.5, 0.5, size=(n_sub, n_in)) if spec.base_on else None
    return LayerParams(w_rbf, w_base)


class _Ops:
    """Contiguous matmul operands derived from one (spec, params) pair."""

    __slots__ = (
        "w_flat", "w_flat_t", "w_cont", "w_base", "w_base_t",
        "wm_fwd", "wm_bwd", "wb_m", "wa_flat", "wa_flat_t", "wb_a", "wb_a_t",
    )


def _build_ops(spec: LayerSpec, params: LayerParams) -> _Ops:
    _check_params(spec, params)
    n_sub, n_in, n = params.w_rbf.shape
    ops = _Ops()
    w_cont = np.ascontiguousarray(params.w_rbf)
    ops.w_cont = w_cont
    ops.w_flat = w_cont.reshape(n_sub, n_in * n)
    ops.w_flat_t = ops.w_flat.T
    if params.w_base is not None:
        ops.w_base = np.ascontiguousarray(params.w_base)
        ops.w_base_t = np.ascontiguousarray(params.w_base.T)
    else:
        ops.w_base = ops.w_base_t = None
    if isinstance(spec.kind, Lean):
        m = spec.kind.n_mul
        # product half, laid out for batched matmul over the input axis
        ops.wm_fwd = np.ascontiguousarray(w_cont[:, :m].transpose(1, 2, 0))  # (m, n, S)
        ops.wm_bwd = np.ascontiguousarray(w_cont[:, :m].transpose(1, 0, 2))  # (m, S, n)
        ops.wb_m = ops.w_base[:, :m] if ops.w_base is not None else None
        # additive half, flattened like the Add fast path
        wa = np.ascontiguousarray(w_cont[:, m:])
        ops.wa_flat = wa.reshape(n_sub, (n_in - m) * n)
        ops.wa_flat_t = ops.wa_flat.T
        if ops.w_base is not None:
            ops.wb_a = np.ascontiguousarray(ops.w_base[:, m:])
            ops.wb_a_t = np.ascontiguousarray(ops.wb_a.T)
        else:
            ops.wb_a = ops.wb_a_t = None
    return ops


def _get_ops(spec: LayerSpec, params: LayerParams) -> _Ops:
    cached = params._ops
    if cached is not None and cached[0] is spec:
        return cached[1]
    ops = _build_ops(spec, params)
    params._ops = (spec, ops)
    return ops


class LayerCache:
    """Forward intermediates consumed by layer_vjp."""

    __slots__ = ("spec", "x_norm", "diff", "psi", "sig", "sw", "sub_tail", "edge_mult")

    def __init__(self, spec, x_norm, diff, psi, sig, sw, sub_tail=None, edge_mult=None):
        self.spec = spec
        self.x_norm = x_norm
        self.diff = diff
        self.psi = psi        # (B, n_in, grid) basis values
        self.sig = sig        # sigmoid(x_norm), None when base off
        self.sw = sw          # swish(x_norm), None when base off
        self.sub_tail = sub_tail    # Mult: (B, n_mult, order) sublayer blocks
        self.edge_mult = edge_mult  # Lean: (B, n_out, n_mul) per-edge products


def _check_input(spec: LayerSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.n_in:
        raise ValueError(
            f"expected input of shape (batch, {spec.n_in}), got {x.shape}"
        )
    return x


def _edge_pieces(spec: LayerSpec, x):
    """Normalized input, center offsets, basis values, and base-term pieces."""
    if spec.normalizer is Normalizer.TANH:
        xh = np.tanh(x)
    elif spec.normalizer is Normalizer.SOFTSIGN:
        xh = x / (1.0 + np.abs(x))
    else:
        xh = x
    grid = spec.grid
    diff = xh[:, :, None] - grid._centers_arr
    t = diff * diff
    t *= -0.5 / (grid.width * grid.width)
    psi = np.exp(t, out=t)
    if spec.base_on:
        sig = expit(xh)
        sw = xh * sig
    else:
        sig = sw = None
    return xh, diff, psi, sig, sw


def _sublayer_forward(ops: _Ops, psi, sw, base_on: bool):
    batch = psi.shape[0]
    psi_flat = psi.reshape(batch, -1)
    y = psi_flat @ ops.w_flat_t
    if base_on:
        y += sw @ ops.w_base_t
    return y


def layer_forward(spec: LayerSpec, params: LayerParams, x):
    """Apply one layer to a batch.  Returns (z, cache) with z of shape
    (batch, n_out)."""
    x = _check_input(spec, x)
    ops = _get_ops(spec, params)  # validates params against spec on first use
    xh, diff, psi, sig, sw = _edge_pieces(spec, x)
    kind = spec.kind

    if isinstance(kind, Add):
        z = _sublayer_forward(ops, psi, sw, spec.base_on)
        return z, LayerCache(spec, xh, diff, psi, sig, sw)

    if isinstance(kind, Mult):
        y = _sublayer_forward(ops, psi, sw, spec.base_on)
        n_add = kind.n_add
        n_mult = spec.n_out - n_add
        z = np.empty((x.shape[0], spec.n_out))
        z[:, :n_add] = y[:, :n_add]
        tail = y[:, n_add:].reshape(x.shape[0], n_mult, kind.order)
        if n_mult:
            z[:, n_add:] = np.multiply.reduce(tail, axis=2)
        return z, LayerCache(spec, xh, diff, psi, sig, sw, sub_tail=tail)

    # Lean
    m = kind.n_mul
    batch = x.shape[0]
    if m:
        # edge_mult[b, s, j] = value of edge activation j -> s for j < n_mul
        pm = np.matmul(psi[:, :m].transpose(1, 0, 2), ops.wm_fwd)  # (m, B, S)
        edge_mult = np.ascontiguousarray(pm.transpose(1, 2, 0))     # (B, S, m)
        if spec.base_on:
            edge_mult += sw[:, None, :m] * ops.wb_m
        z = np.multiply.reduce(edge_mult, axis=2)
    else:
        edge_mult = None
        z = np.zeros((batch, spec.n_out))
    if m < spec.n_in:
        psi_a = np.ascontiguousarray(psi[:, m:]).reshape(batch, -1)
        z = z + psi_a @ ops.wa_flat_t
        if spec.base_on:
            z += sw[:, m:] @ ops.wb_a_t
    return z, LayerCache(spec, xh, diff, psi, sig, sw, edge_mult=edge_mult)


def _check_params(spec: LayerSpec, params: LayerParams):
    expected = (spec.n_sub, spec.n_in, spec.grid.n_points)
    if params.w_rbf.shape != expected:
        raise ValueError(f"w_rbf shape {params.w_rbf.shape} does not match spec {expected}")
    if spec.base_on and params.w_base is None:
        raise ValueError("spec has base_on=True but params carry no base weights")
    if not spec.base_on and params.w_base is not None:
        raise ValueError("spec has base_on=False but params carry base weights")


def _swish_deriv_cached(sig, sw):
    # swish' = sig + swish * (1 - sig), reusing forward intermediates
    t = 1.0 - sig
    t *= sw
    t += sig
    return t


def _norm_deriv(spec: LayerSpec, xh):
    if spec.normalizer is Normalizer.TANH:
        return 1.0 - xh * xh
    if spec.normalizer is Normalizer.SOFTSIGN:
        d = 1.0 - np.abs(xh)
        return d * d
    return None


def _sublayer_vjp(spec, ops, cache, y_bar):
    """VJP of the additive sublayer map for cotangent y_bar of shape (B, n_sub).

    Returns (xh_bar, g_rbf, g_base) where xh_bar is the cotangent at the
    normalized input, before the normalizer derivative is applied.
    """
    batch = y_bar.shape[0]
    n_sub, n_in, n = ops.w_cont.shape
    psi_flat = cache.psi.reshape(batch, -1)
    g_rbf = (y_bar.T @ psi_flat).reshape(n_sub, n_in, n)
    t = (y_bar @ ops.w_flat).reshape(batch, n_in, n)
    t = t * cache.psi
    t *= cache.diff
    xh_bar = np.add.reduce(t, axis=2)
    xh_bar *= -1.0 / (spec.grid.width * spec.grid.width)
    if spec.base_on:
        g_base = y_bar.T @ cache.sw
        u = y_bar @ ops.w_base
        u *= _swish_deriv_cached(cache.sig, cache.sw)
        xh_bar += u
    else:
        g_base = None
    return xh_bar, g_rbf, g_base


def _leave_one_out(values, axis_size):
    """Products over the last axis with one factor left out at a time.

    values has shape (..., axis_size); built from exclusive prefix and
    suffix running products rather than division, so exact zeros are fine.
    """
    if axis_size == 1:
        return np.ones_like(values)
    if axis_size == 2:
        return values[..., ::-1].copy()
    pre = np.multiply.accumulate(values, axis=-1)
    suf = np.multiply.accumulate(values[..., ::-1], axis=-1)[..., ::-1]
    out = np.empty_like(values)
    out[..., 0] = suf[..., 1]
    out[..., -1] = pre[..., -2]
    out[..., 1:-1] = pre[..., :-2] * suf[..., 2:]
    return out


def layer_vjp(spec: LayerSpec, params: LayerParams, cache: LayerCache, z_bar):
    """Pull the cotangent z_bar back through one layer.

    Returns (x_bar, g_rbf, g_base); g_base is None when the base branch is
    off.  The cache must come from layer_forward with the same spec.
    """
    if cache.spec is not spec and cache.spec != spec:
        raise ValueError("cache was produced by a different layer spec")
    z_bar = np.asarray(z_bar, dtype=np.float64)
    batch = cache.psi.shape[0]
    if z_bar.shape != (batch, spec.n_out):
        raise ValueError(
            f"expected cotangent of shape ({batch}, {spec.n_out}), got {z_bar.shape}"
        )
    ops = _get_ops(spec, params)
    kind = spec.kind

    if isinstance(kind, Add):
        xh_bar, g_rbf, g_base = _sublayer_vjp(spec, ops, cache, z_bar)
    elif isinstance(kind, Mult):
        n_add = kind.n_add
        n_mult = spec.n_out - n_add
        y_bar = np.empty((batch, spec.n_sub))
        y_bar[:, :n_add] = z_bar[:, :n_add]
        if n_mult:
            loo = _leave_one_out(cache.sub_tail, kind.order)
            loo *= z_bar[:, n_add:, None]
            y_bar[:, n_add:] = loo.reshape(batch, n_mult * kind.order)
        xh_bar, g_rbf, g_base = _sublayer_vjp(spec, ops, cache, y_bar)
    else:
        xh_bar, g_rbf, g_base = _lean_vjp(spec, ops, cache, z_bar)

    nd = _norm_deriv(spec, cache.x_norm)
    if nd is None:
        x_bar = xh_bar
    else:
        x_bar = xh_bar * nd
    return x_bar, g_rbf, g_base


def _lean_vjp(spec, ops, cache, z_bar):
    kind = spec.kind
    m = kind.n_mul
    n_sub, n_in, n = ops.w_cont.shape
    batch = z_bar.shape[0]
    grid = spec.grid
    # every element of these falls in exactly one of the two slices below
    g_rbf = np.empty((n_sub, n_in, n))
    g_base = np.empty((n_sub, n_in)) if spec.base_on else None
    xh_bar = np.empty((batch, n_in))

    if m:
        # cotangent at each multiplicative edge: z_bar times the product of
        # the other edges feeding the same node
        pb = _leave_one_out(cache.edge_mult, m)
        pb *= z_bar[:, :, None]                                     # (B, S, m)
        psi_m = cache.psi[:, :m]
        g_m = np.matmul(pb.transpose(2, 1, 0), psi_m.transpose(1, 0, 2))  # (m, S, n)
        g_rbf[:, :m] = g_m.transpose(1, 0, 2)
        t = np.matmul(pb.transpose(2, 0, 1), ops.wm_bwd)            # (m, B, n)
        t = t.transpose(1, 0, 2) * psi_m
        t *= cache.diff[:, :m]
        xm = np.add.reduce(t, axis=2)
        xm *= -1.0 / (grid.width * grid.width)
        if spec.base_on:
            sw_m = cache.sw[:, :m]
            g_base[:, :m] = np.add.reduce(pb * sw_m[:, None, :], axis=0)
            u = np.add.reduce(pb * ops.wb_m, axis=1)
            u *= _swish_deriv_cached(cache.sig[:, :m], sw_m)
            xm += u
        xh_bar[:, :m] = xm

    if m < n_in:
        psi_a = np.ascontiguousarray(cache.psi[:, m:]).reshape(batch, -1)
        g_rbf[:, m:] = (z_bar.T @ psi_a).reshape(n_sub, n_in - m, n)
        t = (z_bar @ ops.wa_flat).reshape(batch, n_in - m, n)
        t = t * cache.psi[:, m:]
        t *= cache.diff[:, m:]
        xa = np.add.reduce(t, axis=2)
        xa *= -1.0 / (grid.width * grid.width)
        if spec.base_on:
            sw_a = cache.sw[:, m:]
            g_base[:, m:] = z_bar.T @ sw_a
            u = z_bar @ ops.wb_a
            u *= _swish_deriv_cached(cache.sig[:, m:], sw_a)
            xa += u
        xh_bar[:, m:] = xa

    return xh_bar, g_rbf, g_base
