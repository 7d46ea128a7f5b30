"""Stacked KAN layers with a flat parameter vector and a text model format.

The flat layout is layer-major; within a layer the order is sublayer node,
then input, then the per-edge block of grid weights followed by the base
weight (when present).  ``with_flat`` returns a network whose weight arrays
view the given vector, so an optimizer can update the vector in place of
rebuilding arrays.
"""

from __future__ import annotations

import io

import numpy as np

from kankit.basis import GridSpec, Normalizer
from kankit.errors import ModelFormatError
from kankit.layers import (
    Add,
    LayerParams,
    LayerSpec,
    Lean,
    Mult,
    count_parameters,
    init_layer_params,
    layer_forward,
    layer_vjp,
)

__all__ = ["Network", "load_model", "save_model", "template_layer_specs"]

FORMAT_MAGIC = "kanmodel"
FORMAT_VERSION = 1


class Network:
    """A sequence of layers applied left to right."""

    def __init__(self, layers):
        layers = list(layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for spec, params in layers:
            expected = (spec.n_sub, spec.n_in, spec.grid.n_points)
            if params.w_rbf.shape != expected:
                raise ValueError(
                    f"layer params of shape {params.w_rbf.shape} do not match spec {expected}"
                )
            if spec.base_on != (params.w_base is not None):
                raise ValueError("layer params disagree with spec about the base branch")
        for (a, _), (b, _) in zip(layers, layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(
                    f"layer widths do not chain: {a.n_out} outputs feed {b.n_in} inputs"
                )
        self.layers = layers

    @classmethod
    def initialize(cls, specs, seed=None) -> "Network":
        """Build a network with seeded uniform weights, layer by layer."""
        rng = np.random.default_rng(seed)
        return cls([(spec, init_layer_params(spec, rng)) for spec in specs])

    @property
    def specs(self):
        return [spec for spec, _ in self.layers]

    @property
    def n_in(self) -> int:
        return self.layers[0][0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1][0].n_out

    @property
    def param_count(self) -> int:
        return sum(count_parameters(spec) for spec, _ in self.layers)

    def forward(self, x):
        """Returns (z, caches); caches feed vjp."""
        caches = []
        h = x
        for spec, params in self.layers:
            h, cache = layer_forward(spec, params, h)
            caches.append(cache)
        return h, caches

    def predict(self, x):
        z, _ = self.forward(x)
        return z

    def new_grad_layers(self):
        """Zeroed per-layer gradient accumulators matching the weight arrays."""
        out = []
        for _, params in self.layers:
            g_base = None if params.w_base is None else np.zeros_like(params.w_base)
            out.append((np.zeros_like(params.w_rbf), g_base))
        return out

    def vjp_into(self, caches, z_bar, grad_layers):
        """Accumulate parameter cotangents into grad_layers; returns x_bar."""
        if len(caches) != len(self.layers):
            raise ValueError(
                f"{len(caches)} caches for a network of {len(self.layers)} layers"
            )
        b = z_bar
        for i in range(len(self.layers) - 1, -1, -1):
            spec, params = self.layers[i]
            b, g_rbf, g_base = layer_vjp(spec, params, caches[i], b)
            acc_rbf, acc_base = grad_layers[i]
            acc_rbf += g_rbf
            if g_base is not None:
                acc_base += g_base
        return b

    def vjp(self, caches, z_bar):
        """Pull a cotangent on the output back to (x_bar, flat param grad)."""
        grads = self.new_grad_layers()
        x_bar = self.vjp_into(caches, z_bar, grads)
        return x_bar, self.flatten_grads(grads)

    def flatten(self) -> np.ndarray:
        """Current weights as one float64 vector in the documented layout."""
        parts = []
        for _, params in self.layers:
            if params.w_base is not None:
                block = np.concatenate([params.w_rbf, params.w_base[:, :, None]], axis=2)
            else:
                block = params.w_rbf
            parts.append(block.ravel())
        return np.concatenate(parts)

    @staticmethod
    def flatten_grads(grad_layers) -> np.ndarray:
        parts = []
        for g_rbf, g_base in grad_layers:
            if g_base is not None:
                block = np.concatenate([g_rbf, g_base[:, :, None]], axis=2)
            else:
                block = g_rbf
            parts.append(block.ravel())
        return np.concatenate(parts)

    def with_flat(self, vec) -> "Network":
        """New network whose weight arrays view `vec` (no copies)."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != self.param_count:
            raise ValueError(
                f"expected a flat vector of {self.param_count} weights, got shape {vec.shape}"
            )
        layers = []
        offset = 0
        for spec, _ in self.layers:
            n_sub, n_in, n = spec.n_sub, spec.n_in, spec.grid.n_points
            width = n + (1 if spec.base_on else 0)
            size = n_sub * n_in * width
            block = vec[offset : offset + size].reshape(n_sub, n_in, width)
            offset += size
            if spec.base_on:
                layers.append((spec, LayerParams(block[:, :, :n], block[:, :, n])))
            else:
                layers.append((spec, LayerParams(block)))
        return Network(layers)


def template_layer_specs(
    template: str,
    n_in: int,
    n_out: int,
    hidden: int,
    grid_n: int,
    n_mul=None,
    n_add=None,
    order: int = 2,
    normalizer: Normalizer = Normalizer.TANH,
    base_on: bool = True,
):
    """Two-layer architectures used throughout the experiments.

    mult-first:  product-node layer n_in -> hidden, then Add hidden -> n_out
    lean-second: Add n_in -> hidden, then split-input layer hidden -> n_out
    add:         Add n_in -> hidden, then Add hidden -> n_out
    """
    grid = GridSpec.uniform(grid_n)

    def spec(kind, a, b):
        return LayerSpec(kind, a, b, grid, normalizer=normalizer, base_on=base_on)

    if template == "mult-first":
        if n_add is None:
            raise ValueError("mult-first template needs n_add")
        return [spec(Mult(n_add=n_add, order=order), n_in, hidden), spec(Add(), hidden, n_out)]
    if template == "lean-second":
        if n_mul is None:
            raise ValueError("lean-second template needs n_mul")
        return [spec(Add(), n_in, hidden), spec(Lean(n_mul=n_mul), hidden, n_out)]
    if template == "add":
        return [spec(Add(), n_in, hidden), spec(Add(), hidden, n_out)]
    raise ValueError(f"unknown template {template!r}")


def _kind_tokens(kind) -> list[str]:
    if isinstance(kind, Add):
        return ["add"]
    if isinstance(kind, Mult):
        return ["mult", "n_add", str(kind.n_add), "order", str(kind.order)]
    if isinstance(kind, Lean):
        return ["lean", "n_mul", str(kind.n_mul)]
    raise TypeError(f"unknown layer kind {kind!r}")


def save_model(net: Network, path) -> None:
    """Write a network to the text model format (round-trips exactly)."""
    buf = io.StringIO()
    buf.write(f"{FORMAT_MAGIC} {FORMAT_VERSION}\n")
    buf.write(f"layers {len(net.layers)}\n")
    for spec, _ in net.layers:
        tokens = ["layer", *_kind_tokens(spec.kind)]
        tokens += ["in", str(spec.n_in), "out", str(spec.n_out)]
        tokens += ["grid", str(spec.grid.n_points)]
        tokens += ["normalizer", spec.normalizer.value]
        tokens += ["base", "on" if spec.base_on else "off"]
        buf.write(" ".join(tokens) + "\n")
    flat = net.flatten()
    buf.write(f"weights {flat.shape[0]}\n")
    for value in flat:
        buf.write(repr(float(value)) + "\n")
    buf.write("end\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def _parse_fields(tokens, line_no):
    if len(tokens) % 2:
        raise ModelFormatError(f"line {line_no}: dangling field name {tokens[-1]!r}")
    fields = {}
    for name, value in zip(tokens[::2], tokens[1::2]):
        if name in fields:
            raise ModelFormatError(f"line {line_no}: duplicate field {name!r}")
        fields[name] = value
    return fields


def _field_int(fields, name, line_no):
    if name not in fields:
        raise ModelFormatError(f"line {line_no}: missing field {name!r}")
    try:
        return int(fields.pop(name))
    except ValueError:
        raise ModelFormatError(f"line {line_no}: field {name!r} is not an integer") from None


def load_model(path) -> Network:
    """Read a network written by save_model.  Raises ModelFormatError on any
    malformed, truncated, or unknown content."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise ModelFormatError("file ends unexpectedly")
        pos += 1
        return lines[pos - 1].strip(), pos

    header, line_no = next_line()
    parts = header.split()
    if len(parts) != 2 or parts[0] != FORMAT_MAGIC:
        raise ModelFormatError(f"line {line_no}: bad magic, expected {FORMAT_MAGIC!r}")
    if parts[1] != str(FORMAT_VERSION):
        raise ModelFormatError(f"unsupported format version {parts[1]!r}")

    decl, line_no = next_line()
    parts = decl.split()
    if len(parts) != 2 or parts[0] != "layers":
        raise ModelFormatError(f"line {line_no}: expected 'layers <count>'")
    try:
        n_layers = int(parts[1])
    except ValueError:
        raise ModelFormatError(f"line {line_no}: layer count {parts[1]!r} is not an integer") from None
    if n_layers < 1:
        raise ModelFormatError(f"line {line_no}: layer count must be positive")

    specs = []
    for _ in range(n_layers):
        line, line_no = next_line()
        tokens = line.split()
        if len(tokens) < 2 or tokens[0] != "layer":
            raise ModelFormatError(f"line {line_no}: expected a 'layer' declaration")
        kind_name = tokens[1]
        fields = _parse_fields(tokens[2:], line_no)
        if kind_name == "add":
            kind = Add()
        elif kind_name == "mult":
            kind = Mult(
                n_add=_field_int(fields, "n_add", line_no),
                order=_field_int(fields, "order", line_no),
            )
        elif kind_name == "lean":
            kind = Lean(n_mul=_field_int(fields, "n_mul", line_no))
        else:
            raise ModelFormatError(f"line {line_no}: unknown layer kind {kind_name!r}")
        n_in = _field_int(fields, "in", line_no)
        n_out = _field_int(fields, "out", line_no)
        grid_n = _field_int(fields, "grid", line_no)
        if "normalizer" not in fields:
            raise ModelFormatError(f"line {line_no}: missing field 'normalizer'")
        norm_name = fields.pop("normalizer")
        try:
            normalizer = Normalizer(norm_name)
        except ValueError:
            raise ModelFormatError(
                f"line {line_no}: unknown normalizer {norm_name!r}"
            ) from None
        if "base" not in fields:
            raise ModelFormatError(f"line {line_no}: missing field 'base'")
        base = fields.pop("base")
        if base not in ("on", "off"):
            raise ModelFormatError(f"line {line_no}: base must be 'on' or 'off', got {base!r}")
        if fields:
            raise ModelFormatError(
                f"line {line_no}: unknown field {sorted(fields)[0]!r}"
            )
        try:
            specs.append(
                LayerSpec(
                    kind,
                    n_in,
                    n_out,
                    GridSpec.uniform(grid_n),
                    normalizer=normalizer,
                    base_on=(base == "on"),
                )
            )
        except ValueError as exc:
            raise ModelFormatError(f"line {line_no}: {exc}") from None

    decl, line_no = next_line()
    parts = decl.split()
    if len(parts) != 2 or parts[0] != "weights":
        raise ModelFormatError(f"line {line_no}: expected 'weights <count>'")
    try:
        n_weights = int(parts[1])
    except ValueError:
        raise ModelFormatError(f"line {line_no}: weight count {parts[1]!r} is not an integer") from None

    expected = sum(count_parameters(spec) for spec in specs)
    if n_weights != expected:
        raise ModelFormatError(
            f"layer shapes imply {expected} weights but the file declares {n_weights}"
        )
    values = np.empty(n_weights)
    for i in range(n_weights):
        line, line_no = next_line()
        try:
            values[i] = float(line)
        except ValueError:
            raise ModelFormatError(
                f"line {line_no}: weight {i} is not a number: {line!r}"
            ) from None
    sentinel, line_no = next_line()
    if sentinel != "end":
        raise ModelFormatError(f"line {line_no}: expected 'end', got {sentinel!r}")

    try:
        skeleton = Network.initialize(specs, seed=0)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None
    return skeleton.with_flat(values)
