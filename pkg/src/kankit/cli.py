"""Command-line entry point.

Exit codes: 0 success, 1 numerical failure (a run blew up or a check
failed), 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from kankit.errors import ConfigError, KankitError, NumericalAbort


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kankit",
        description="KAN layer toolkit: train, sweep, and audit experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("--config", required=True, help="path to a JSON config")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None,
                     help="override the config's seed list with one seed")
    run.add_argument("--threads", type=int, default=1, help="worker processes (sweep only)")

    sweep = sub.add_parser("sweep", help="run a structure sweep config")
    sweep.add_argument("--config", required=True, help="path to an lv-sweep JSON config")
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.add_argument("--threads", type=int, default=1, help="worker processes")

    grad = sub.add_parser("gradcheck", help="compare analytic gradients to finite differences")
    grad.add_argument("--tol", type=float, default=1e-5, help="relative error tolerance")
    grad.add_argument("--corrupt", action="store_true",
                      help="deliberately bias every comparison (exercises the failure path)")

    audit = sub.add_parser("audit-params", help="recompute the pinned parameter-count table")
    audit.add_argument("--json", action="store_true", help="emit the table as JSON")
    return parser


def _cmd_run(args) -> int:
    from kankit.experiments import load_config, run_experiment, run_sweep

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seeds"] = [args.seed]
    if cfg["experiment"] == "lv-sweep":
        payload = run_sweep(cfg, args.out, threads=args.threads)
        print(f"sweep finished: {len(payload['table'])} cells -> {args.out}")
        return 0
    summary = run_experiment(cfg, args.out)
    train = summary["median_final_train_mse"]
    test = summary["median_final_test_mse"]
    test_part = "n/a" if test is None else f"{test:.6g}"
    print(
        f"{summary['experiment']}: {len(summary['seeds'])} seed(s), "
        f"{summary['parameter_count']} params, median train mse {train:.6g}, "
        f"median test mse {test_part} -> {args.out}"
    )
    return 0


def _cmd_sweep(args) -> int:
    from kankit.experiments import load_config, run_sweep

    cfg = load_config(args.config)
    if cfg["experiment"] != "lv-sweep":
        raise ConfigError(
            f"the sweep command needs an lv-sweep config, got {cfg['experiment']!r}"
        )
    payload = run_sweep(cfg, args.out, threads=args.threads)
    for row in payload["table"]:
        test = row["median_final_test_mse"]
        test_part = "n/a" if test is None else f"{test:.3e}"
        print(
            f"{row['kind']:12s} nodes={row['nodes']:3d} grid={row['grid']} "
            f"params={row['parameter_count']:4d} train={row['median_final_train_mse']:.3e} "
            f"test={test_part}"
        )
    print(f"slopes: {json.dumps(payload['slopes'])}")
    return 0


def _cmd_gradcheck(args) -> int:
    from kankit.gradcheck import run_gradcheck

    text, worst, ok = run_gradcheck(tol=args.tol, corrupt=args.corrupt)
    print(text)
    return 0 if ok else 1


def _cmd_audit(args) -> int:
    from kankit.experiments import audit_rows

    rows = audit_rows()
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        for row in rows:
            status = "PASS" if row["ok"] else "FAIL"
            params = "-" if row["expected_parameters"] is None else (
                f"{row['parameters']}/{row['expected_parameters']}"
            )
            print(
                f"{status}  {row['name']:48s} activations "
                f"{row['activations']}/{row['expected_activations']}  params {params}"
            )
    return 0 if all(r["ok"] for r in rows) else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "gradcheck": _cmd_gradcheck,
        "audit-params": _cmd_audit,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except KankitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
