"""Config-driven experiment harness.

A JSON config names one experiment, an architecture, and the training
knobs; unknown keys are rejected so a typo cannot silently fall back to a
default.  Each run writes run.json, loss.csv, model.kan, and a
reconstruction table into the output directory; multi-seed configs write
one subdirectory per seed plus summary.json with median aggregates.

Outputs are deterministic for a fixed config: rerunning produces
byte-identical files except for the wall_time_s field of run.json.
"""

from __future__ import annotations

import io
import json
import os
import time

import numpy as np

from kankit.basis import Normalizer
from kankit.datagen import dataset_to_csv, generate_toy, learnable_outputs
from kankit.errors import ConfigError
from kankit.kanode import (
    KanOdeConfig,
    Trajectory,
    generate_lv_data,
    generate_schrodinger_data,
    perturb_lv_data,
    predict_at,
    train_kanode,
)
from kankit.layers import Add, LayerSpec, Lean, Mult, count_activations, count_parameters
from kankit.network import Network, save_model, template_layer_specs
from kankit.training import train_regression

__all__ = ["audit_rows", "load_config", "run_experiment", "run_sweep"]

SCHEMA_VERSION = 1

EXPERIMENTS = ("toy", "lv-rapid", "lv-converged", "lv-noisy", "schrodinger", "lv-sweep")

# keys accepted per experiment; anything else is an error
_COMMON = {"schema_version", "experiment", "architecture", "epochs", "lr", "grid",
           "normalizer", "base_on", "seeds", "seed"}
_ALLOWED = {
    "toy": _COMMON | {"data_seed"},
    "lv-rapid": _COMMON | {"dt_solver", "test_stride"},
    "lv-converged": _COMMON | {"dt_solver", "test_stride"},
    "lv-noisy": _COMMON | {"dt_solver", "test_stride", "noise_frac", "n_samples", "data_seed"},
    "schrodinger": _COMMON | {"dt_solver", "test_stride", "n_x"},
    "lv-sweep": {"schema_version", "experiment", "rows", "fit_rows", "epochs", "lr",
                 "seeds", "seed", "dt_solver", "test_stride"},
}

_DEFAULTS = {
    "toy": {"epochs": 3000, "lr": 1e-3, "grid": 4, "normalizer": "tanh",
            "base_on": True, "data_seed": 0},
    "lv-rapid": {"epochs": 7000, "lr": 5e-3, "grid": 4, "normalizer": "tanh",
                 "base_on": True, "dt_solver": 0.1, "test_stride": 10},
    "lv-converged": {"epochs": 20000, "lr": 2e-4, "grid": 5, "normalizer": "tanh",
                     "base_on": True, "dt_solver": 0.1, "test_stride": 100},
    "lv-noisy": {"epochs": 10000, "lr": 5e-3, "grid": 10, "normalizer": "tanh",
                 "base_on": True, "dt_solver": 0.05, "test_stride": 100,
                 "noise_frac": 0.05, "n_samples": 35, "data_seed": 0},
    "schrodinger": {"epochs": 2000, "lr": 5e-3, "grid": 5, "normalizer": "softsign",
                    "base_on": True, "dt_solver": 0.05, "test_stride": 0, "n_x": 33},
    "lv-sweep": {"epochs": 20000, "lr": 2e-4, "dt_solver": 0.1, "test_stride": 0,
                 "rows": [
                     {"nodes": 4, "n": 2, "grid": 3},
                     {"nodes": 5, "n": 3, "grid": 5},
                     {"nodes": 6, "n": 3, "grid": 6},
                     {"nodes": 10, "n": 5, "grid": 5},
                 ]},
}

_ARCH_KEYS = {
    "single": {"template", "kind", "n_mul", "n_add", "order"},
    "mult-first": {"template", "hidden", "n_add", "order"},
    "lean-second": {"template", "hidden", "n_mul"},
    "add": {"template", "hidden"},
}


def _expect(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def _as_int(cfg, key, lo=None, hi=None):
    v = cfg[key]
    _expect(isinstance(v, int) and not isinstance(v, bool), f"{key!r} must be an integer")
    if lo is not None:
        _expect(v >= lo, f"{key!r} must be >= {lo}, got {v}")
    if hi is not None:
        _expect(v <= hi, f"{key!r} must be <= {hi}, got {v}")
    return v


def _as_number(cfg, key, positive=False):
    v = cfg[key]
    _expect(isinstance(v, (int, float)) and not isinstance(v, bool), f"{key!r} must be a number")
    if positive:
        _expect(v > 0, f"{key!r} must be positive, got {v}")
    return float(v)


def load_config(path) -> dict:
    """Read, validate, and resolve a config file (defaults applied)."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return resolve_config(raw)


def resolve_config(raw: dict) -> dict:
    _expect("schema_version" in raw, "config is missing 'schema_version'")
    _expect(raw["schema_version"] == SCHEMA_VERSION,
            f"unsupported schema_version {raw['schema_version']!r} (this build reads {SCHEMA_VERSION})")
    _expect("experiment" in raw, "config is missing 'experiment'")
    exp = raw["experiment"]
    _expect(exp in EXPERIMENTS, f"unknown experiment {exp!r}; one of {', '.join(EXPERIMENTS)}")

    allowed = _ALLOWED[exp]
    for key in raw:
        _expect(key in allowed, f"unknown key {key!r} for experiment {exp!r}")

    cfg = dict(_DEFAULTS[exp])
    cfg.update(raw)
    cfg["schema_version"] = SCHEMA_VERSION

    # seeds: scalar form normalizes to a one-element list
    _expect(not ("seed" in raw and "seeds" in raw), "give either 'seed' or 'seeds', not both")
    if "seed" in raw:
        _expect(isinstance(raw["seed"], int) and not isinstance(raw["seed"], bool),
                "'seed' must be an integer")
        cfg["seeds"] = [raw["seed"]]
    elif "seeds" in raw:
        s = raw["seeds"]
        _expect(isinstance(s, list) and s and all(
            isinstance(v, int) and not isinstance(v, bool) for v in s),
            "'seeds' must be a non-empty list of integers")
        _expect(len(set(s)) == len(s), "'seeds' must not repeat")
        cfg["seeds"] = list(s)
    else:
        cfg["seeds"] = [0]
    cfg.pop("seed", None)

    _as_int(cfg, "epochs", lo=0)
    _as_number(cfg, "lr", positive=True)

    if exp == "lv-sweep":
        _validate_sweep(cfg)
        return cfg

    _as_int(cfg, "grid", lo=1)
    _expect(cfg["normalizer"] in ("tanh", "softsign", "none"),
            f"normalizer must be tanh, softsign, or none, got {cfg['normalizer']!r}")
    _expect(isinstance(cfg["base_on"], bool), "'base_on' must be true or false")
    if "data_seed" in cfg:
        _as_int(cfg, "data_seed")
    if exp != "toy":
        _as_number(cfg, "dt_solver", positive=True)
        _as_int(cfg, "test_stride", lo=0)
    if exp == "lv-noisy":
        noise = _as_number(cfg, "noise_frac")
        _expect(0 <= noise < 1, f"noise_frac must lie in [0, 1), got {noise}")
        _as_int(cfg, "n_samples", lo=2)
    if exp == "schrodinger":
        _as_int(cfg, "n_x", lo=9)

    _expect("architecture" in cfg, "config is missing 'architecture'")
    cfg["architecture"] = _validate_arch(cfg["architecture"], exp)
    return cfg


def _validate_arch(arch, exp: str) -> dict:
    _expect(isinstance(arch, dict), "'architecture' must be an object")
    _expect("template" in arch, "architecture is missing 'template'")
    template = arch["template"]
    _expect(template in _ARCH_KEYS,
            f"unknown template {template!r}; one of {', '.join(sorted(_ARCH_KEYS))}")
    _expect(not (exp == "toy") or template == "single",
            "the toy experiment uses single-layer architectures")
    _expect(not (exp != "toy") or template != "single",
            f"experiment {exp!r} uses two-layer templates, not 'single'")
    for key in arch:
        _expect(key in _ARCH_KEYS[template], f"unknown architecture key {key!r} for template {template!r}")

    out = dict(arch)
    if template == "single":
        _expect("kind" in out, "single-layer architecture needs 'kind'")
        kind = out["kind"]
        _expect(kind in ("add", "mult", "lean"), f"kind must be add, mult, or lean, got {kind!r}")
        if kind == "lean":
            _expect("n_mul" in out, "lean layers need 'n_mul'")
            _as_int(out, "n_mul", lo=0)
            _expect("n_add" not in out and "order" not in out,
                    "lean layers take 'n_mul' only")
        elif kind == "mult":
            _expect("n_add" in out, "mult layers need 'n_add'")
            _as_int(out, "n_add", lo=0)
            out.setdefault("order", 2)
            _as_int(out, "order", lo=2)
            _expect("n_mul" not in out, "mult layers take 'n_add' and 'order' only")
        else:
            _expect(len(out) == 2, "add layers take no extra architecture keys")
    else:
        _expect("hidden" in out, f"template {template!r} needs 'hidden'")
        _as_int(out, "hidden", lo=1)
        if template == "mult-first":
            _expect("n_add" in out, "mult-first needs 'n_add'")
            _as_int(out, "n_add", lo=0)
            out.setdefault("order", 2)
            _as_int(out, "order", lo=2)
        elif template == "lean-second":
            _expect("n_mul" in out, "lean-second needs 'n_mul'")
            _as_int(out, "n_mul", lo=0)
    return out


def _validate_sweep(cfg: dict):
    rows = cfg["rows"]
    _expect(isinstance(rows, list) and rows, "'rows' must be a non-empty list")
    for i, row in enumerate(rows):
        _expect(isinstance(row, dict), f"rows[{i}] must be an object")
        for key in row:
            _expect(key in ("nodes", "n", "grid"), f"unknown key {key!r} in rows[{i}]")
        for key in ("nodes", "n", "grid"):
            _expect(key in row, f"rows[{i}] is missing {key!r}")
            v = row[key]
            _expect(isinstance(v, int) and not isinstance(v, bool) and v >= 1,
                    f"rows[{i}].{key} must be a positive integer")
        _expect(row["n"] <= row["nodes"], f"rows[{i}]: n cannot exceed nodes")
    if "fit_rows" in cfg:
        fr = cfg["fit_rows"]
        _expect(isinstance(fr, list) and all(
            isinstance(v, int) and not isinstance(v, bool) and 0 <= v < len(rows) for v in fr),
            "'fit_rows' must list row indices")
        _expect(len(set(fr)) == len(fr), "'fit_rows' must not repeat")
    _as_number(cfg, "dt_solver", positive=True)
    _as_int(cfg, "test_stride", lo=0)


# ---------------------------------------------------------------------------
# architecture construction


def _normalizer(cfg) -> Normalizer:
    return Normalizer(cfg["normalizer"])


def _single_spec(cfg, n_in: int, n_out: int) -> LayerSpec:
    arch = cfg["architecture"]
    kind_name = arch["kind"]
    if kind_name == "add":
        kind = Add()
    elif kind_name == "mult":
        kind = Mult(n_add=arch["n_add"], order=arch["order"])
    else:
        kind = Lean(n_mul=arch["n_mul"])
    from kankit.basis import GridSpec

    try:
        return LayerSpec(kind, n_in, n_out, GridSpec.uniform(cfg["grid"]),
                         normalizer=_normalizer(cfg), base_on=cfg["base_on"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_specs(cfg, n_in: int, n_out: int):
    arch = cfg["architecture"]
    if arch["template"] == "single":
        return [_single_spec(cfg, n_in, n_out)]
    try:
        return template_layer_specs(
            arch["template"], n_in, n_out,
            hidden=arch["hidden"], grid_n=cfg["grid"],
            n_mul=arch.get("n_mul"), n_add=arch.get("n_add"), order=arch.get("order", 2),
            normalizer=_normalizer(cfg), base_on=cfg["base_on"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# output files


def _write_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_record(cfg, seed, net, trace, wall: float, extra=None) -> dict:
    rec = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg["experiment"],
        "config": cfg,
        "seed": seed,
        "parameter_count": net.param_count,
        "activation_count": sum(count_activations(s) for s in net.specs),
        "epochs_run": trace.final.epoch,
        "final_train_mse": trace.final.train_mse,
        "final_test_mse": trace.final_test_mse(),
        "wall_time_s": wall,
    }
    if trace.final.per_output_train is not None:
        rec["per_output_train_mse"] = [float(v) for v in trace.final.per_output_train]
    if extra:
        rec.update(extra)
    return rec


def _reconstruction_csv(path, windows):
    """windows: list of (label, times, data_states, pred_states)."""
    dim = windows[0][2].shape[1]
    buf = io.StringIO()
    header = ["window", "t"]
    header += [f"u{i + 1}_data" for i in range(dim)]
    header += [f"u{i + 1}_pred" for i in range(dim)]
    buf.write(",".join(header) + "\n")
    for label, times, data, pred in windows:
        for p in range(len(times)):
            row = [label, repr(float(times[p]))]
            row += [repr(float(v)) for v in data[p]]
            row += [repr(float(v)) for v in pred[p]]
            buf.write(",".join(row) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def _predictions_csv(path, splits):
    """splits: list of (label, inputs, targets, preds) for regression runs."""
    n_in = splits[0][1].shape[1]
    n_out = splits[0][2].shape[1]
    buf = io.StringIO()
    header = ["split"]
    header += [f"x{i + 1}" for i in range(n_in)]
    header += [f"z{i + 1}_data" for i in range(n_out)]
    header += [f"z{i + 1}_pred" for i in range(n_out)]
    buf.write(",".join(header) + "\n")
    for label, x, z, p in splits:
        for r in range(x.shape[0]):
            row = [label]
            row += [repr(float(v)) for v in x[r]]
            row += [repr(float(v)) for v in z[r]]
            row += [repr(float(v)) for v in p[r]]
            buf.write(",".join(row) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


# ---------------------------------------------------------------------------
# experiment drivers


def _toy_learnable(cfg):
    arch = cfg["architecture"]
    if arch["template"] != "single":
        return None
    spec = _single_spec(cfg, 4, 4)
    try:
        return sorted(learnable_outputs(spec.kind))
    except ValueError:
        return None


def _run_toy(cfg, out_dir, seed):
    train, test = generate_toy(cfg["data_seed"])
    net = Network.initialize(build_specs(cfg, 4, 4), seed=seed)
    t0 = time.perf_counter()
    net, trace = train_regression(net, train, test, cfg["epochs"], cfg["lr"])
    wall = time.perf_counter() - t0
    learnable = _toy_learnable(cfg)
    extra = {"learnable_outputs": learnable}
    _write_run_dir(out_dir, cfg, seed, net, trace, wall, extra)
    _predictions_csv(
        os.path.join(out_dir, "predictions.csv"),
        [
            ("train", train.inputs, train.targets, net.predict(train.inputs)),
            ("test", test.inputs, test.targets, net.predict(test.inputs)),
        ],
    )
    return net, trace, wall


def _lv_windows(cfg):
    if cfg["experiment"] == "lv-noisy":
        fine_train, test = generate_lv_data(dt=0.001)
        # resample the test window at the usual coarse spacing
        test = Trajectory(test.times[::100], test.states[::100])
        train = perturb_lv_data(
            fine_train,
            n_samples=cfg["n_samples"],
            noise_frac=cfg["noise_frac"],
            seed=cfg["data_seed"],
        )
        return train, test
    return generate_lv_data()


def _run_ode(cfg, out_dir, seed, train, test):
    dim = train.dim
    net = Network.initialize(build_specs(cfg, dim, dim), seed=seed)
    ode_cfg = KanOdeConfig(
        epochs=cfg["epochs"], lr=cfg["lr"], dt=cfg["dt_solver"],
        test_stride=cfg["test_stride"],
    )
    t0 = time.perf_counter()
    net, trace = train_kanode(net, train, test, ode_cfg)
    wall = time.perf_counter() - t0
    _write_run_dir(out_dir, cfg, seed, net, trace, wall)
    _reconstruction_csv(
        os.path.join(out_dir, "reconstruction.csv"),
        [
            ("train", train.times, train.states, predict_at(net, train, cfg["dt_solver"])),
            ("test", test.times, test.states, predict_at(net, test, cfg["dt_solver"])),
        ],
    )
    return net, trace, wall


def _schrodinger_windows(cfg):
    full = generate_schrodinger_data(n_x=cfg["n_x"])
    snap_times = np.concatenate([[0.0], np.linspace(0.1, 1.5, 8)])
    train = full.at_times(snap_times)
    return train, full


def _write_run_dir(out_dir, cfg, seed, net, trace, wall, extra=None):
    os.makedirs(out_dir, exist_ok=True)
    _write_json(os.path.join(out_dir, "run.json"), _run_record(cfg, seed, net, trace, wall, extra))
    trace.to_csv(os.path.join(out_dir, "loss.csv"))
    save_model(net, os.path.join(out_dir, "model.kan"))


def run_experiment(cfg: dict, out_dir) -> dict:
    """Run one experiment config; returns the summary dict that is also
    written to disk."""
    exp = cfg["experiment"]
    if exp == "lv-sweep":
        raise ConfigError("lv-sweep configs run through run_sweep")
    seeds = cfg["seeds"]
    os.makedirs(out_dir, exist_ok=True)

    if exp == "toy":
        runner = lambda d, s: _run_toy(cfg, d, s)
    elif exp in ("lv-rapid", "lv-converged", "lv-noisy"):
        train, test = _lv_windows(cfg)
        runner = lambda d, s: _run_ode(cfg, d, s, train, test)
    elif exp == "schrodinger":
        train, test = _schrodinger_windows(cfg)
        runner = lambda d, s: _run_ode(cfg, d, s, train, test)
    else:
        raise ConfigError(f"unknown experiment {exp!r}")

    per_seed = {}
    t0 = time.perf_counter()
    for seed in seeds:
        run_dir = out_dir if len(seeds) == 1 else os.path.join(out_dir, f"seed-{seed}")
        net, trace, wall = runner(run_dir, seed)
        entry = {
            "final_train_mse": trace.final.train_mse,
            "final_test_mse": trace.final_test_mse(),
        }
        if trace.final.per_output_train is not None:
            entry["per_output_train_mse"] = [float(v) for v in trace.final.per_output_train]
        per_seed[str(seed)] = entry
        param_count = net.param_count

    summary = {
        "schema_version": SCHEMA_VERSION,
        "experiment": exp,
        "config": cfg,
        "seeds": seeds,
        "parameter_count": param_count,
        "per_seed": per_seed,
        "median_final_train_mse": float(np.median(
            [per_seed[str(s)]["final_train_mse"] for s in seeds])),
        "wall_time_s": time.perf_counter() - t0,
    }
    test_vals = [per_seed[str(s)]["final_test_mse"] for s in seeds]
    summary["median_final_test_mse"] = (
        None if any(v is None for v in test_vals) else float(np.median(test_vals))
    )
    if len(seeds) > 1:
        _write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


# ---------------------------------------------------------------------------
# the structure sweep


def _sweep_arch_cfg(cfg, row, kind: str) -> dict:
    if kind == "mult-first":
        arch = {"template": "mult-first", "hidden": row["nodes"],
                "n_add": row["nodes"] - row["n"], "order": 2}
    else:
        arch = {"template": "lean-second", "hidden": row["nodes"], "n_mul": row["n"]}
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": "lv-converged",
        "architecture": arch,
        "epochs": cfg["epochs"],
        "lr": cfg["lr"],
        "grid": row["grid"],
        "normalizer": "tanh",
        "base_on": True,
        "dt_solver": cfg["dt_solver"],
        "test_stride": cfg["test_stride"],
        "seeds": cfg["seeds"],
    }


def _sweep_unit(args):
    row_idx, kind, seed, sub_cfg, out_dir = args
    train, test = generate_lv_data()
    net, trace, _ = _run_ode(sub_cfg, out_dir, seed, train, test)
    return row_idx, kind, seed, trace.final.train_mse, trace.final_test_mse(), net.param_count


def run_sweep(cfg: dict, out_dir, threads: int = 1) -> dict:
    """Train both two-layer templates at every row of the structure table and
    tabulate median losses against parameter count."""
    if cfg["experiment"] != "lv-sweep":
        raise ConfigError("run_sweep needs an lv-sweep config")
    os.makedirs(out_dir, exist_ok=True)
    rows = cfg["rows"]
    kinds = ("mult-first", "lean-second")

    units = []
    for i, row in enumerate(rows):
        for kind in kinds:
            sub_cfg = _sweep_arch_cfg(cfg, row, kind)
            for seed in cfg["seeds"]:
                unit_dir = os.path.join(out_dir, "rows", f"r{i}-{kind}", f"seed-{seed}")
                units.append((i, kind, seed, sub_cfg, unit_dir))

    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_unit, units))
    else:
        results = [_sweep_unit(u) for u in units]

    by_cell = {}
    for row_idx, kind, seed, train_mse, test_mse, n_param in results:
        by_cell.setdefault((row_idx, kind), []).append((seed, train_mse, test_mse, n_param))

    table = []
    for i, row in enumerate(rows):
        for kind in kinds:
            cell = sorted(by_cell[(i, kind)])
            train_med = float(np.median([c[1] for c in cell]))
            tests = [c[2] for c in cell]
            test_med = None if any(v is None for v in tests) else float(np.median(tests))
            table.append({
                "row": i, "kind": kind, "nodes": row["nodes"], "n": row["n"],
                "grid": row["grid"], "parameter_count": cell[0][3],
                "median_final_train_mse": train_med,
                "median_final_test_mse": test_med,
            })

    _write_sweep_csv(os.path.join(out_dir, "sweep.csv"), table)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "table": table,
        "slopes": {
            "all": {kind: _fit_slope(table, kind, None) for kind in kinds},
            "flagged": (
                {kind: _fit_slope(table, kind, cfg["fit_rows"]) for kind in kinds}
                if "fit_rows" in cfg else None
            ),
        },
    }
    _write_json(os.path.join(out_dir, "sweep.json"), payload)
    return payload


def _fit_slope(table, kind: str, fit_rows):
    """log-log slope of median train loss vs parameter count; None when
    fewer than two usable points."""
    pts = [
        (r["parameter_count"], r["median_final_train_mse"])
        for r in table
        if r["kind"] == kind and (fit_rows is None or r["row"] in fit_rows)
        and r["median_final_train_mse"] > 0
    ]
    if len(pts) < 2:
        return None
    x = np.log10([p[0] for p in pts])
    y = np.log10([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def _write_sweep_csv(path, table):
    buf = io.StringIO()
    buf.write("row,kind,nodes,n,grid,parameter_count,"
              "median_final_train_mse,median_final_test_mse\n")
    for r in table:
        test = "" if r["median_final_test_mse"] is None else repr(r["median_final_test_mse"])
        buf.write(
            f"{r['row']},{r['kind']},{r['nodes']},{r['n']},{r['grid']},"
            f"{r['parameter_count']},{repr(r['median_final_train_mse'])},{test}\n"
        )
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


# ---------------------------------------------------------------------------
# parameter-count audit


def _audit_specs():
    """Reference architectures whose activation and parameter counts are
    pinned by the studies this package reproduces."""
    from kankit.basis import GridSpec

    def single(kind, n_in, n_out, grid):
        return [LayerSpec(kind, n_in, n_out, GridSpec.uniform(grid))]

    def pair(template, n_in, n_out, hidden, grid, **kw):
        return template_layer_specs(template, n_in, n_out, hidden=hidden, grid_n=grid, **kw)

    rows = [
        ("add 4->3, grid 4", single(Add(), 4, 3, 4), 12, None),
        ("mult 4->3 (n_add 1, order 2), grid 4", single(Mult(1, 2), 4, 3, 4), 20, None),
        ("lean 4->3 (n_mul 2), grid 4", single(Lean(2), 4, 3, 4), 12, None),
        ("toy lean 4->4 (n_mul 2), grid 4", single(Lean(2), 4, 4, 4), 16, 80),
        ("toy mult 4->4 (n_add 2), grid 4", single(Mult(2, 2), 4, 4, 4), 24, 120),
        ("lv mult-first h4 (n_add 2), grid 4", pair("mult-first", 2, 2, 4, 4, n_add=2), 20, 100),
        ("lv lean-second h5 (n_mul 3), grid 4", pair("lean-second", 2, 2, 5, 4, n_mul=3), 20, 100),
        ("lv mult-first h10 (n_add 5), grid 5", pair("mult-first", 2, 2, 10, 5, n_add=5), 50, 300),
        ("lv lean-second h10 (n_mul 5), grid 5", pair("lean-second", 2, 2, 10, 5, n_mul=5), 40, 240),
        ("sweep mult-first h4 (n_add 2), grid 3", pair("mult-first", 2, 2, 4, 3, n_add=2), 20, 80),
        ("sweep lean-second h4 (n_mul 2), grid 3", pair("lean-second", 2, 2, 4, 3, n_mul=2), 16, 64),
        ("sweep mult-first h5 (n_add 2), grid 5", pair("mult-first", 2, 2, 5, 5, n_add=2), 26, 156),
        ("sweep lean-second h5 (n_mul 3), grid 5", pair("lean-second", 2, 2, 5, 5, n_mul=3), 20, 120),
        ("sweep mult-first h6 (n_add 3), grid 6", pair("mult-first", 2, 2, 6, 6, n_add=3), 30, 210),
        ("sweep lean-second h6 (n_mul 3), grid 6", pair("lean-second", 2, 2, 6, 6, n_mul=3), 24, 168),
        ("wave lean-second 402-dim h2 (n_mul 2), grid 5",
         pair("lean-second", 402, 402, 2, 5, n_mul=2), 1608, 9648),
    ]
    return rows


def audit_rows() -> list[dict]:
    """Recompute the pinned counting table.  Each row reports the computed
    activation/parameter counts next to the expected ones."""
    out = []
    for name, specs, want_acts, want_params in _audit_specs():
        acts = sum(count_activations(s) for s in specs)
        params = sum(count_parameters(s) for s in specs)
        ok = acts == want_acts and (want_params is None or params == want_params)
        out.append({
            "name": name,
            "activations": acts,
            "expected_activations": want_acts,
            "parameters": params,
            "expected_parameters": want_params,
            "ok": bool(ok),
        })
    return out
