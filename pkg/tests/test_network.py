"""Network composition, the flat weight vector, and the text model format."""

import numpy as np
import pytest

from kankit import (
    Add,
    GridSpec,
    Lean,
    LayerSpec,
    Mult,
    Network,
    Normalizer,
    load_model,
    save_model,
)
from kankit.errors import ModelFormatError
from kankit.layers import count_parameters, layer_forward
from kankit.network import template_layer_specs


def _toy_specs():
    g = GridSpec.uniform(3)
    return [
        LayerSpec(Mult(n_add=1, order=2), 2, 3, g),
        LayerSpec(Lean(n_mul=1), 3, 2, g, Normalizer.SOFTSIGN),
    ]


class TestNetwork:
    def test_forward_composes_layers(self):
        net = Network.initialize(_toy_specs(), seed=1)
        x = np.random.default_rng(2).uniform(-1, 1, size=(6, 2))
        z, caches = net.forward(x)
        assert z.shape == (6, 2)
        assert len(caches) == 2
        h = x
        for spec, params in net.layers:
            h, _ = layer_forward(spec, params, h)
        np.testing.assert_array_equal(z, h)
        np.testing.assert_array_equal(net.predict(x), z)

    def test_initialize_deterministic(self):
        a = Network.initialize(_toy_specs(), seed=5)
        b = Network.initialize(_toy_specs(), seed=5)
        np.testing.assert_array_equal(a.flatten(), b.flatten())
        c = Network.initialize(_toy_specs(), seed=6)
        assert not np.array_equal(a.flatten(), c.flatten())

    def test_param_count(self):
        net = Network.initialize(_toy_specs(), seed=0)
        assert net.param_count == sum(count_parameters(s) for s in net.specs)
        assert net.flatten().shape == (net.param_count,)
        assert net.n_in == 2 and net.n_out == 2

    def test_rejects_unchained_layers(self):
        g = GridSpec.uniform(3)
        specs = [LayerSpec(Add(), 2, 3, g), LayerSpec(Add(), 4, 2, g)]
        with pytest.raises(ValueError):
            Network.initialize(specs, seed=0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Network([])


class TestFlatVector:
    def test_round_trip(self):
        net = Network.initialize(_toy_specs(), seed=3)
        flat = net.flatten()
        again = net.with_flat(flat.copy())
        np.testing.assert_array_equal(again.flatten(), flat)
        x = np.random.default_rng(0).uniform(-1, 1, size=(4, 2))
        np.testing.assert_array_equal(net.predict(x), again.predict(x))

    def test_views_not_copies(self):
        net = Network.initialize(_toy_specs(), seed=3)
        vec = net.flatten()
        alias = net.with_flat(vec)
        vec[0] = 123.0
        assert alias.layers[0][1].w_rbf[0, 0, 0] == 123.0

    def test_single_entry_maps_to_single_weight(self):
        # flipping one flat entry changes exactly one stored weight
        net = Network.initialize(_toy_specs(), seed=4)
        flat = net.flatten()
        rng = np.random.default_rng(7)
        for idx in rng.integers(0, flat.size, size=12):
            bumped = flat.copy()
            bumped[idx] = 2.0
            got = net.with_flat(bumped).flatten()
            assert got[idx] == 2.0
            changed = np.nonzero(got != flat)[0]
            np.testing.assert_array_equal(changed, [idx])

    def test_grad_layout_matches_weight_layout(self):
        # a cotangent through vjp lands at the same offsets flatten() uses
        net = Network.initialize(_toy_specs(), seed=8)
        x = np.random.default_rng(9).uniform(-1, 1, size=(3, 2))
        z, caches = net.forward(x)
        z_bar = np.ones_like(z)
        _, flat_grad = net.vjp(caches, z_bar)
        assert flat_grad.shape == (net.param_count,)

        def total(vec):
            zz = net.with_flat(vec).predict(x)
            return float(np.sum(zz))

        flat = net.flatten()
        eps = 1e-6
        for idx in (0, 5, flat.size // 2, flat.size - 1):
            fp = flat.copy(); fp[idx] += eps
            fm = flat.copy(); fm[idx] -= eps
            fd = (total(fp) - total(fm)) / (2 * eps)
            assert abs(flat_grad[idx] - fd) < 1e-6 * max(1.0, abs(fd))

    def test_rejects_wrong_length(self):
        net = Network.initialize(_toy_specs(), seed=0)
        with pytest.raises(ValueError):
            net.with_flat(np.zeros(net.param_count + 1))

    def test_vjp_into_accumulates(self):
        net = Network.initialize(_toy_specs(), seed=10)
        x = np.random.default_rng(11).uniform(-1, 1, size=(2, 2))
        z, caches = net.forward(x)
        grads = net.new_grad_layers()
        net.vjp_into(caches, np.ones_like(z), grads)
        once = Network.flatten_grads(grads)
        net.vjp_into(caches, np.ones_like(z), grads)
        np.testing.assert_allclose(Network.flatten_grads(grads), 2 * once, rtol=1e-15)


class TestTemplates:
    def test_mult_first(self):
        specs = template_layer_specs("mult-first", 2, 2, hidden=4, grid_n=5, n_add=2)
        assert isinstance(specs[0].kind, Mult) and specs[0].kind.n_add == 2
        assert isinstance(specs[1].kind, Add)
        assert (specs[0].n_in, specs[0].n_out) == (2, 4)
        assert (specs[1].n_in, specs[1].n_out) == (4, 2)
        assert specs[0].grid.n_points == 5

    def test_lean_second(self):
        specs = template_layer_specs("lean-second", 3, 2, hidden=5, grid_n=4, n_mul=2)
        assert isinstance(specs[0].kind, Add)
        assert isinstance(specs[1].kind, Lean) and specs[1].kind.n_mul == 2
        assert (specs[1].n_in, specs[1].n_out) == (5, 2)

    def test_plain_add(self):
        specs = template_layer_specs("add", 2, 66, hidden=10, grid_n=5,
                                     normalizer=Normalizer.SOFTSIGN)
        assert all(isinstance(s.kind, Add) for s in specs)
        assert specs[1].n_out == 66
        assert all(s.normalizer is Normalizer.SOFTSIGN for s in specs)

    def test_missing_arch_args(self):
        with pytest.raises(ValueError):
            template_layer_specs("mult-first", 2, 2, hidden=4, grid_n=3)
        with pytest.raises(ValueError):
            template_layer_specs("lean-second", 2, 2, hidden=4, grid_n=3)
        with pytest.raises(ValueError):
            template_layer_specs("two-tower", 2, 2, hidden=4, grid_n=3)


class TestModelFormat:
    def test_round_trip_exact(self, tmp_path):
        net = Network.initialize(_toy_specs(), seed=12)
        path = tmp_path / "model.kan"
        save_model(net, path)
        back = load_model(path)
        np.testing.assert_array_equal(back.flatten(), net.flatten())
        assert back.specs == net.specs
        x = np.random.default_rng(1).uniform(-2, 2, size=(5, 2))
        np.testing.assert_array_equal(back.predict(x), net.predict(x))

    def test_save_is_deterministic(self, tmp_path):
        net = Network.initialize(_toy_specs(), seed=13)
        p1, p2 = tmp_path / "a.kan", tmp_path / "b.kan"
        save_model(net, p1)
        save_model(net, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_extreme_values_survive(self, tmp_path):
        net = Network.initialize([LayerSpec(Add(), 1, 1, GridSpec.uniform(2))], seed=0)
        flat = net.flatten()
        flat[:] = [1e-300, -0.1, 1 + 2**-52]
        net = net.with_flat(flat)
        path = tmp_path / "m.kan"
        save_model(net, path)
        np.testing.assert_array_equal(load_model(path).flatten(), flat)

    def _write(self, tmp_path, text):
        path = tmp_path / "bad.kan"
        path.write_text(text)
        return path

    def _lines(self, tmp_path, seed=14):
        net = Network.initialize(_toy_specs(), seed=seed)
        path = tmp_path / "good.kan"
        save_model(net, path)
        return path.read_text().splitlines()

    def test_rejects_bad_magic(self, tmp_path):
        lines = self._lines(tmp_path)
        lines[0] = "notamodel 1"
        with pytest.raises(ModelFormatError, match="magic"):
            load_model(self._write(tmp_path, "\n".join(lines)))

    def test_rejects_future_version(self, tmp_path):
        lines = self._lines(tmp_path)
        lines[0] = "kanmodel 99"
        with pytest.raises(ModelFormatError, match="version"):
            load_model(self._write(tmp_path, "\n".join(lines)))

    def test_rejects_unknown_kind(self, tmp_path):
        lines = self._lines(tmp_path)
        lines[2] = lines[2].replace("layer mult", "layer conv")
        with pytest.raises(ModelFormatError, match="unknown layer kind"):
            load_model(self._write(tmp_path, "\n".join(lines)))

    def test_rejects_unknown_field(self, tmp_path):
        lines = self._lines(tmp_path)
        lines[2] += " stride 2"
        with pytest.raises(ModelFormatError, match="unknown field 'stride'"):
            load_model(self._write(tmp_path, "\n".join(lines)))

    def test_rejects_duplicate_field(self, tmp_path):
        lines = self._lines(tmp_path)
        lines[2] += " in 2"
        with pytest.raises(ModelFormatError, match="duplicate field"):
            load_model(self._write(tmp_path, "\n".join(lines)))

    def test_rejects_unknown_normalizer(self, tmp_path):
        lines = self._lines(tmp_path)
        lines[2] = lines[2].replace("normalizer tanh", "normalizer relu")
        with pytest.raises(ModelFormatError, match="unknown normalizer"):
            load_model(self._write(tmp_path, "\n".join(lines)))

    def test_rejects_weight_count_mismatch(self, tmp_path):
        lines = self._lines(tmp_path)
        i = next(k for k, l in enumerate(lines) if l.startswith("weights "))
        lines[i] = "weights 7"
        with pytest.raises(ModelFormatError, match="declares 7"):
            load_model(self._write(tmp_path, "\n".join(lines)))

    def test_rejects_non_numeric_weight(self, tmp_path):
        lines = self._lines(tmp_path)
        i = next(k for k, l in enumerate(lines) if l.startswith("weights "))
        lines[i + 3] = "banana"
        with pytest.raises(ModelFormatError, match="weight 2 is not a number"):
            load_model(self._write(tmp_path, "\n".join(lines)))

    def test_rejects_truncation(self, tmp_path):
        lines = self._lines(tmp_path)
        with pytest.raises(ModelFormatError, match="ends unexpectedly"):
            load_model(self._write(tmp_path, "\n".join(lines[:10])))

    def test_rejects_missing_end(self, tmp_path):
        lines = self._lines(tmp_path)
        assert lines[-1] == "end"
        lines[-1] = "fin"
        with pytest.raises(ModelFormatError, match="expected 'end'"):
            load_model(self._write(tmp_path, "\n".join(lines)))

    def test_rejects_unchained_layers(self, tmp_path):
        text = "\n".join([
            "kanmodel 1",
            "layers 2",
            "layer add in 2 out 3 grid 2 normalizer tanh base off",
            "layer add in 4 out 1 grid 2 normalizer tanh base off",
            "weights 20",
            *(["0.0"] * 20),
            "end",
        ])
        with pytest.raises(ModelFormatError, match="chain"):
            load_model(self._write(tmp_path, text))

    def test_rejects_invalid_layer_shape(self, tmp_path):
        text = "\n".join([
            "kanmodel 1",
            "layers 1",
            "layer lean n_mul 5 in 2 out 1 grid 2 normalizer tanh base off",
            "weights 4",
            *(["0.0"] * 4),
            "end",
        ])
        with pytest.raises(ModelFormatError, match="n_mul"):
            load_model(self._write(tmp_path, text))

    def test_blank_lines_tolerated(self, tmp_path):
        lines = self._lines(tmp_path)
        spaced = "\n\n".join(lines)
        back = load_model(self._write(tmp_path, spaced))
        assert back.param_count == Network.initialize(_toy_specs(), seed=14).param_count
