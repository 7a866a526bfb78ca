"""Command-line pipeline: gen, train (staged), eval, track, plot.

Every artifact is deterministic for a fixed config and seed (no
timestamps anywhere), so repeated runs are byte-identical. Exit codes:
0 success, 1 validation/configuration, 2 split-protocol violation,
3 training failure.
"""

import argparse
import hashlib
import os
import sys

import numpy as np

from .config import ExperimentConfig, load_config
from .dataset import build_datasets, load_split, save_split
from .encoders import (EncoderBundle, ReductorTrainConfig, VAETrainConfig,
                       build_backbone, load_encoder, save_encoder,
                       train_conv_vae, train_reductor)
from .errors import (ConfigError, ProprioError, ProtocolError, TrainingError,
                     ValidationError)
from .evaluation import (compare_models, compute_metrics, mean_baseline,
                         plot_traces, report_to_csv, trace_from_csv,
                         trace_to_csv, track)
from .kinematics import COMPONENT_NAMES, ArmGeometry, load_geometry
from .pipeline import Pipeline, latents_for_frames
from .regressor import (TrainingConfig, load_regressor, save_regressor,
                        train_regressor, write_training_log)
from .scene import NoiseModel, camera_preset

STAGE_SPLITS = {"vae": "unsupervised", "reductor": "finetune", "regressor": "regression"}


def _load_cfg(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.__post_init__()
    return cfg


def _config_hash(args):
    if not args.config:
        return "-"
    with open(args.config, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]


def _meta(cfg, args):
    return {"seed": cfg.seed, "config_hash": _config_hash(args), "camera": cfg.camera,
            "model": cfg.model_name}


def _data_dir(args):
    return os.path.join(args.out, "data")


def _dataset(args):
    path = _data_dir(args)
    if not os.path.isdir(path):
        raise ValidationError(f"missing dataset at {path}; run 'gen' first")
    return load_split(path)


def _geometry(cfg):
    return load_geometry(cfg.geometry) if cfg.geometry else ArmGeometry()


def _encoder_path(args, cfg):
    return os.path.join(args.out, f"encoder_{cfg.encoder}_{cfg.width}.enc")


def _regressor_path(args, name):
    return os.path.join(args.out, f"regressor_{name}.ckpt")


def _require_stage_split(args, stage):
    mandated = STAGE_SPLITS[stage]
    if args.split and args.split != mandated:
        raise ProtocolError(
            f"stage {stage!r} must train on the {mandated!r} split, not {args.split!r}")
    return mandated


def _encoder_bundle(args, cfg):
    if cfg.encoder == "fiducial":
        return EncoderBundle("fiducial", 128)
    path = _encoder_path(args, cfg)
    if not os.path.exists(path):
        raise ValidationError(
            f"missing encoder checkpoint {path}; run 'train --stage "
            f"{'vae' if cfg.encoder == 'vae' else 'reductor'}' first")
    return load_encoder(path)


def cmd_gen(args):
    cfg = _load_cfg(args)
    noise = NoiseModel(cfg.sigma_px, cfg.dropout, cfg.facing_min)
    split_set = build_datasets(
        geom=_geometry(cfg), camera=camera_preset(cfg.camera), noise=noise,
        sizes=cfg.sizes, seed=cfg.seed, traj_len=cfg.traj_len,
        waypoint_interval=cfg.waypoint_interval, camera_name=cfg.camera)
    save_split(split_set, _data_dir(args))
    for name in ("unsupervised", "finetune", "regression", "test"):
        frames = split_set.splits[name]
        trajs = len({f.traj_id for f in frames})
        print(f"{name}: {len(frames)} frames over {trajs} trajectories")
    print(f"dataset written to {_data_dir(args)}")
    return 0


def cmd_train(args):
    cfg = _load_cfg(args)
    split_name = _require_stage_split(args, args.stage)
    data = _dataset(args)
    frames = data.splits[split_name]
    os.makedirs(args.out, exist_ok=True)
    if args.stage == "vae":
        if cfg.encoder != "vae":
            raise ValidationError(
                f"the vae stage trains image autoencoders; config encoder is {cfg.encoder!r}")
        model, log = train_conv_vae(
            data.images_float(split_name), cfg.width,
            VAETrainConfig(cfg.vae_lr, cfg.vae_batch, cfg.vae_epochs, cfg.vae_beta, cfg.seed))
        save_encoder(_encoder_path(args, cfg), EncoderBundle("vae", cfg.width, vae=model))
        _write_simple_log(os.path.join(args.out, "vae_train.csv"),
                          ("epoch", "recon_mse", "kl"), log)
        print(f"vae encoder written to {_encoder_path(args, cfg)}")
    elif args.stage == "reductor":
        if cfg.encoder != "backbone":
            raise ValidationError(
                f"the reductor stage needs encoder = backbone, got {cfg.encoder!r}")
        lr, batch, wd = cfg.reductor_hyper()
        backbone = build_backbone(cfg.backbone_seed)
        reductor, log = train_reductor(
            backbone, data.images_float(split_name), data.configurations(split_name),
            cfg.width,
            ReductorTrainConfig(cfg.hidden_sizes(), lr, batch, cfg.reductor_epochs, wd, cfg.seed),
            traj_ids=[f.traj_id for f in frames],
            forbidden_traj_ids=data.traj_ids("regression"))
        save_encoder(_encoder_path(args, cfg),
                     EncoderBundle("backbone", cfg.width, backbone=backbone, reductor=reductor))
        _write_simple_log(os.path.join(args.out, "reductor_train.csv"),
                          ("epoch", "surrogate_mse", "val_mse"), log)
        print(f"backbone encoder written to {_encoder_path(args, cfg)}")
    else:
        bundle = _encoder_bundle(args, cfg)
        latents = latents_for_frames(bundle, frames)
        lr, batch, wd = cfg.regressor_hyper()
        model, log = train_regressor(
            latents, data.configurations(split_name),
            TrainingConfig(lr, batch, cfg.regressor_epochs, cfg.regressor_patience,
                           cfg.regressor_val_fraction, wd, cfg.seed,
                           cfg.regressor_standardize),
            traj_ids=[f.traj_id for f in frames])
        save_regressor(_regressor_path(args, cfg.model_name), model)
        write_training_log(os.path.join(args.out, "regressor_train.csv"), log)
        print(f"regressor written to {_regressor_path(args, cfg.model_name)}")
    return 0


def _write_simple_log(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _pipelines(args, cfg, names):
    pipes = {}
    for name in names:
        kind, _, width = name.rpartition("-")
        try:
            sub = ExperimentConfig(seed=cfg.seed, encoder=kind or name, width=int(width or 128))
        except (ConfigError, ValueError):
            raise ValidationError(
                f"unknown model {name!r}; available checkpoints: {_available_regressors(args)}"
            ) from None
        ckpt = _regressor_path(args, sub.model_name)
        if not os.path.exists(ckpt):
            raise ValidationError(
                f"missing regressor checkpoint {ckpt}; available: {_available_regressors(args)}")
        pipes[sub.model_name] = Pipeline(_encoder_bundle(args, sub), load_regressor(ckpt))
    return pipes


def _available_regressors(args):
    if not os.path.isdir(args.out):
        return []
    return sorted(f[len("regressor_"):-len(".ckpt")] for f in os.listdir(args.out)
                  if f.startswith("regressor_") and f.endswith(".ckpt"))


def cmd_eval(args):
    cfg = _load_cfg(args)
    data = _dataset(args)
    names = args.models.split(",") if args.models else [cfg.model_name]
    pipes = _pipelines(args, cfg, names)
    test = data.splits["test"]
    truths = data.configurations("test")
    baseline = mean_baseline(data.configurations("regression"))
    reports = {"baseline": compute_metrics(baseline.predict_frames(test), truths)}
    for name, pipe in pipes.items():
        reports[name] = compute_metrics(pipe.predict_frames(test), truths)
    meta = _meta(cfg, args)
    for name, report in reports.items():
        path = os.path.join(args.out, f"report_{name}.csv")
        with open(path, "w") as fh:
            fh.write(report_to_csv(report, dict(meta, model=name)))
        print(f"report written to {path}")
    cmp_path = os.path.join(args.out, "comparison.csv")
    with open(cmp_path, "w") as fh:
        fh.write(compare_models(reports, meta))
    print(f"comparison written to {cmp_path}")
    return 0


def cmd_track(args):
    cfg = _load_cfg(args)
    data = _dataset(args)
    names = args.models.split(",") if args.models else [cfg.model_name]
    if len(names) > 2:
        raise ValidationError(f"track plots at most 2 models, requested {len(names)}")
    pipes = _pipelines(args, cfg, names)
    trace = track(pipes, data.splits["test"])
    trace_path = os.path.join(args.out, "trace.csv")
    with open(trace_path, "w") as fh:
        fh.write(trace_to_csv(trace))
    print(f"trace written to {trace_path}")
    _emit_charts(args, trace, args.components, names)
    return 0


def cmd_plot(args):
    trace_path = args.trace or os.path.join(args.out, "trace.csv")
    if not os.path.exists(trace_path):
        raise ValidationError(f"missing trace {trace_path}; run 'track' first")
    with open(trace_path) as fh:
        trace = trace_from_csv(fh.read())
    models = args.models.split(",") if args.models else list(trace.preds)
    _emit_charts(args, trace, args.components, models)
    return 0


def _emit_charts(args, trace, components, models):
    comps = components.split(",") if components else list(COMPONENT_NAMES)
    charts = plot_traces(trace, comps, models)
    for comp, svg in charts.items():
        path = os.path.join(args.out, f"trace_{comp}.svg")
        with open(path, "w") as fh:
            fh.write(svg)
        print(f"chart written to {path}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="proprio",
        description="Synthetic visual proprioception benchmark: generate data, "
                    "train encoder/regressor stages, evaluate, and plot tracking traces.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default="", help="experiment config file (key = value)")
        p.add_argument("--out", required=True, help="experiment output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")

    p_gen = sub.add_parser("gen", help="generate the four-way split dataset")
    common(p_gen)
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train", help="train one pipeline stage")
    common(p_train)
    p_train.add_argument("--stage", required=True, choices=sorted(STAGE_SPLITS))
    p_train.add_argument("--split", default="",
                         help="split to consume; anything but the stage's mandated "
                              "split is a protocol error")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="metric reports + comparison table on the test split")
    common(p_eval)
    p_eval.add_argument("--models", default="", help="comma-separated model names")
    p_eval.set_defaults(func=cmd_eval)

    p_track = sub.add_parser("track", help="per-frame tracking trace CSV + SVG charts")
    common(p_track)
    p_track.add_argument("--models", default="", help="comma-separated model names (max 2)")
    p_track.add_argument("--components", default="", help="comma-separated component names")
    p_track.set_defaults(func=cmd_track)

    p_plot = sub.add_parser("plot", help="re-render SVG charts from an existing trace")
    common(p_plot)
    p_plot.add_argument("--trace", default="", help="trace CSV path (default <out>/trace.csv)")
    p_plot.add_argument("--models", default="", help="comma-separated model names (max 2)")
    p_plot.add_argument("--components", default="", help="comma-separated component names")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        os.makedirs(args.out, exist_ok=True)
        return args.func(args)
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 3
    except ProprioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
