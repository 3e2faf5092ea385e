"""Command-line entry point.

Examples::

    visuotactile gen-data --preset desk --seed 0 --out data/desk
    visuotactile train --data data/desk --mode crossmodal --lr 1e-3
    visuotactile eval --data data/desk --checkpoint runs/.../seed0_tCO.ckpt
    visuotactile select-views --data data/desk --mode nvs --target fST
    visuotactile report runs/a/report.json runs/b/report.json --metric r2

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from .. import gradcore as G
from ..crossmodal import CheckpointError
from ..synthsps import DatasetError, generate_dataset, preset
from . import experiment as X
from .config import MODES, UsageError, build_config
from .tables import comparison_table, load_metrics, table_csv_rows

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

CONFIG_FLAGS = ("data", "preset", "data_seed", "mode", "target", "epochs", "lr", "batch_size", "latent_dim",
                "M", "lambda_emb", "lambda_adv", "lambda_cls", "k", "d_pca", "policy_lr", "stage2_iters",
                "seeds", "label", "out")


def _add_data_flags(p):
    p.add_argument("--data", help="dataset directory (default: generate --preset in memory)")
    p.add_argument("--preset", help="generator preset when --data is not given")
    p.add_argument("--data-seed", type=int, help="seed for the in-memory preset")


def _add_experiment_flags(p):
    p.add_argument("--config", help="key = value config file; flags override it")
    _add_data_flags(p)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--target", help="per-property, all-joint, or a property acronym")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--M", type=int, help="views to select (multi-view modes only)")
    p.add_argument("--lambda-emb", type=float)
    p.add_argument("--lambda-adv", type=float)
    p.add_argument("--lambda-cls", type=float)
    p.add_argument("--k", type=int, help="pseudo-label clusters")
    p.add_argument("--d-pca", type=int)
    p.add_argument("--policy-lr", type=float)
    p.add_argument("--stage2-iters", type=int)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--label", help="name used for the run directory and report tables")
    p.add_argument("--out", help="root directory for run outputs (default runs)")


def build_parser():
    parser = argparse.ArgumentParser(prog="visuotactile", description="Visual to tactile estimation experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic dataset directory")
    g.add_argument("--preset", default="desk")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--num-samples", type=int)
    g.add_argument("--image-size", type=int)
    g.add_argument("--num-views", type=int)
    g.add_argument("--sigma-meas", type=float)

    t = sub.add_parser("train", help="train every seed and write a report")
    _add_experiment_flags(t)

    e = sub.add_parser("eval", help="evaluate checkpoints on the val split")
    _add_data_flags(e)
    e.add_argument("--checkpoint", nargs="+", required=True)
    e.add_argument("--out", help="write the metrics JSON here as well as to stdout")

    s = sub.add_parser("select-views", help="run selection stages 1-2 and print q*")
    _add_experiment_flags(s)

    r = sub.add_parser("report", help="build a comparison table from reports")
    r.add_argument("inputs", nargs="+")
    r.add_argument("--metric", choices=("r2", "pct_err"), default="r2")
    r.add_argument("--out", default="reports")
    return parser


def _experiment_config(args):
    text = None
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
    return build_config(text, {k: getattr(args, k, None) for k in CONFIG_FLAGS})


def _eval_dataset(args):
    cfg = build_config(None, {"data": args.data, "preset": args.preset, "data_seed": args.data_seed})
    return X.load_data(cfg)


def cmd_gen_data(args):
    overrides = {k: v for k, v in (("num_samples", args.num_samples), ("image_size", args.image_size),
                                   ("num_views", args.num_views), ("sigma_meas", args.sigma_meas)) if v is not None}
    try:
        gen = preset(args.preset, **overrides)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise DatasetError(f"{out}: exists and is not a directory")
    try:
        path = generate_dataset(gen, args.seed, out)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(path)


def cmd_train(args):
    result = X.run_experiment(_experiment_config(args))
    mean = result["mean"]["aggregates"]
    print(json.dumps({"artifacts": result["artifacts"], "config_hash": result["config_hash"], "mean": mean},
                     sort_keys=True))


def cmd_eval(args):
    dataset = _eval_dataset(args)
    report = X.evaluate_checkpoints(args.checkpoint, dataset)
    text = report.to_json(indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


def cmd_select_views(args):
    cfg = _experiment_config(args)
    if cfg.mode not in ("nvs", "vbnvs"):
        raise UsageError("select-views needs --mode nvs or vbnvs")
    result, out = X.select_only(cfg)
    print(json.dumps({"artifacts": str(out), "q_star": result}, sort_keys=True))


def cmd_report(args):
    named = [load_metrics(p) for p in args.inputs]
    table = comparison_table(named, args.metric)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S")
    out = Path(args.out) / f"table-{args.metric}-{stamp}"
    n = 1
    while out.exists():
        out = Path(f"{out}-{n}")
        n += 1
    out.mkdir(parents=True)
    (out / "table.json").write_text(json.dumps(table, indent=2) + "\n")
    header, rows = table_csv_rows(table)
    X.write_rows_csv(out / "table.csv", header, rows)
    print(out)


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval,
            "select-views": cmd_select_views, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, CheckpointError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except G.NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
