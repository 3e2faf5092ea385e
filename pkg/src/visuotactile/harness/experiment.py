"""Run experiments over seeds and write reports, checkpoints and logs."""

import csv
import json
import logging
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..crossmodal import LossWeights, TrainConfig, TrainedEstimator, load_checkpoint, registry_of
from ..crossmodal import decode_text, train_cross_modal, train_regression_baseline
from ..metrics import aggregate_report, evaluate_predictions, mean_reports
from ..synthsps import DatasetError, generate_arrays, load_dataset, preset
from ..viewselect import MultiViewConfig, MultiViewRun, select_views, train_multiview_baseline, train_three_stage
from ..viewselect import write_selection_log

log = logging.getLogger(__name__)

BASELINE_OF = {"multi-late": "late", "multi-viewpool": "viewpool", "multi-random": "random",
               "multi-equidistant": "equidistant", "multi-trn": "trn"}


def load_data(cfg):
    if cfg.data:
        return load_dataset(cfg.data).to_arrays()
    try:
        return generate_arrays(preset(cfg.preset), cfg.data_seed)
    except ValueError as exc:
        raise DatasetError(str(exc)) from None


def train_config(cfg, seed):
    return TrainConfig(epochs=cfg.epochs, lr=cfg.lr, batch_size=cfg.batch_size, latent_dim=cfg.latent,
                       k=cfg.k, d_pca=cfg.d_pca, seed=seed,
                       weights=LossWeights(cfg.lambda_emb, cfg.lambda_adv, cfg.lambda_cls))


def multiview_config(cfg, seed):
    return MultiViewConfig(M=cfg.M, epochs=cfg.epochs, lr=cfg.lr, batch_size=cfg.batch_size,
                           latent_dim=cfg.latent, policy_lr=cfg.policy_lr, stage2_iters=cfg.stage2_iters,
                           seed=seed)


def train_one(cfg, dataset, seed, outputs):
    """One trained model (single- or multi-view) for one property group."""
    if cfg.mode == "crossmodal":
        return train_cross_modal(dataset, train_config(cfg, seed), outputs)
    if cfg.mode == "regression":
        return train_regression_baseline(dataset, train_config(cfg, seed), outputs)
    mv = multiview_config(cfg, seed)
    if cfg.mode in ("nvs", "vbnvs"):
        return train_three_stage(dataset, mv, cfg.mode, outputs)
    return train_multiview_baseline(dataset, mv, BASELINE_OF[cfg.mode], outputs)


def evaluate_models(models, dataset):
    """Metrics on the val split for models covering disjoint property groups."""
    val = np.asarray(dataset.val_ids)
    train_mean = dataset.targets[np.asarray(dataset.train_ids)].mean(axis=0)
    per = {}
    for m in models:
        pred = m.predict_dataset(dataset, val)
        cols = list(m.outputs)
        acr = [dataset.acronyms[i] for i in cols]
        per.update(evaluate_predictions(dataset.targets[val][:, cols], pred, train_mean[cols], acr))
    return aggregate_report(per, len(val), dataset.acronyms)


def _run_dir(root, cfg):
    stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S")
    base = Path(root) / f"{cfg.label or cfg.mode}-{stamp}-{cfg.hash()}"
    path, n = base, 1
    while path.exists():
        path = Path(f"{base}-{n}")
        n += 1
    path.mkdir(parents=True)
    return path


def _write_csv_with_hash(path, text, digest):
    Path(path).write_text(f"# config_hash={digest}\n" + text)


def _ckpt_name(seed, outputs, acronyms):
    tag = "all" if len(outputs) > 1 else acronyms[outputs[0]]
    return f"seed{seed}_{tag}.ckpt"


def run_experiment(cfg, dataset=None):
    """Train every seed, write artifacts, return the report dict."""
    dataset = dataset if dataset is not None else load_data(cfg)
    digest = cfg.hash()
    out = _run_dir(cfg.out, cfg)
    t0 = time.time()
    per_seed = []
    for seed in cfg.seeds:
        models, ckpts, q_star = [], [], {}
        for outputs in cfg.outputs():
            log.info("mode=%s seed=%d outputs=%s", cfg.mode, seed, outputs)
            model = train_one(cfg, dataset, seed, outputs)
            name = _ckpt_name(seed, outputs, dataset.acronyms)
            model.save(out / name, {"config_hash": digest, "image_size": str(dataset.images.shape[2])})
            ckpts.append(name)
            models.append(model)
            if getattr(model, "q_star", None) is not None:
                q_star[name] = [int(v) for v in model.q_star]
            if getattr(model, "selection_log", None):
                log_path = out / name.replace(".ckpt", "_selection.csv")
                write_selection_log(log_path, model.selection_log, cfg.M)
                text = log_path.read_text()
                _write_csv_with_hash(log_path, text, digest)
        report = evaluate_models(models, dataset)
        _write_csv_with_hash(out / f"metrics_seed{seed}.csv", report.to_csv(), digest)
        per_seed.append({"seed": seed, "metrics": report.to_dict(), "checkpoints": ckpts, "q_star": q_star,
                         "report": report})
    mean = mean_reports([s.pop("report") for s in per_seed])
    _write_csv_with_hash(out / "metrics_mean.csv", mean.to_csv(), digest)
    result = {
        "config": cfg.to_dict(),
        "config_hash": digest,
        "per_seed": per_seed,
        "mean": mean.to_dict(),
        "wall_clock_s": round(time.time() - t0, 3),
        "artifacts": str(out),
    }
    (out / "report.json").write_text(_dumps(result))
    return result


def _dumps(obj):
    def clean(o):
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, float) and not np.isfinite(o):
            return None
        return o
    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- eval

def load_model(path):
    tensors = load_checkpoint(path)
    kind = decode_text(tensors["meta.kind"])
    model = MultiViewRun.from_state(tensors) if kind.startswith("multiview:") else TrainedEstimator.from_state(tensors)
    return model, tensors


def check_compatible(tensors, dataset, path):
    if registry_of(tensors) != tuple(dataset.acronyms):
        raise DatasetError(f"{path}: property registry order differs from the dataset's")
    if "meta.image_size" in tensors and int(decode_text(tensors["meta.image_size"])) != dataset.images.shape[2]:
        raise DatasetError(f"{path}: checkpoint was trained on {decode_text(tensors['meta.image_size'])}px images, "
                           f"dataset has {dataset.images.shape[2]}px")
    if "meta.num_views" in tensors and int(tensors["meta.num_views"][0]) != dataset.num_views:
        raise DatasetError(f"{path}: checkpoint expects {int(tensors['meta.num_views'][0])} views, "
                           f"dataset has {dataset.num_views}")


def evaluate_checkpoints(paths, dataset):
    models = []
    for p in paths:
        model, tensors = load_model(p)
        check_compatible(tensors, dataset, p)
        models.append(model)
    return evaluate_models(models, dataset)


def select_only(cfg, dataset=None):
    """Stages 1-2 per seed; returns {seed: q_star} and writes selection logs."""
    if cfg.mode not in ("nvs", "vbnvs"):
        raise ValueError("select-views needs mode nvs or vbnvs")
    dataset = dataset if dataset is not None else load_data(cfg)
    out = _run_dir(cfg.out, cfg)
    digest = cfg.hash()
    result = {}
    for seed in cfg.seeds:
        for outputs in cfg.outputs():
            q, *_, sel_log, _ = select_views(dataset, multiview_config(cfg, seed), cfg.mode, outputs)
            tag = _ckpt_name(seed, outputs, dataset.acronyms).replace(".ckpt", "")
            path = write_selection_log(out / f"{tag}_selection.csv", sel_log, cfg.M)
            _write_csv_with_hash(path, path.read_text(), digest)
            result[tag] = [int(v) for v in q]
    (out / "selection.json").write_text(_dumps({"config": cfg.to_dict(), "config_hash": digest, "q_star": result}))
    return result, out


def write_rows_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
