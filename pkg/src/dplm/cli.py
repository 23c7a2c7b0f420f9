"""Command-line interface.

Results go to stdout as JSON; progress and diagnostics go to stderr.
Exit codes: 0 success, 2 usage, 3 invalid manifest/config/data,
4 missing file or checkpoint, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import yaml

from .checkpoint import CheckpointError, load_checkpoint
from .config import ExperimentConfig, load_config
from .cues import cue_distance, extract_cues, median_cues
from .evaluate import (
    angular_sweep,
    compare_on_trajectory,
    correlate_ratings,
    load_ratings_csv,
    spearman,
    sweep_spearman,
)
from .geometry import SourceLocation, Trajectory
from .manifest import (
    ManifestError,
    load_brir_manifest,
    load_brirs,
    load_dataset_manifest,
    parse_trajectory,
    resolve_path,
)
from .metric import MetricConfig, deep_feature_distance
from .model import build_model
from .render import mix_noise, render_trajectory, spatialize_brir, spatialize_parametric
from .signal import SAMPLE_RATE, load_binaural, load_mono, save_wav
from .synth import pink_noise
from .train import TrainConfig, evaluate_on_manifest, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_MISSING = 4
EXIT_ERROR = 1


def _emit(obj: dict):
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _log(msg: str):
    print(msg, file=sys.stderr)


def _parse_sets(pairs: Optional[List[str]]) -> Dict[str, object]:
    out: Dict[str, object] = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        out[key.strip()] = yaml.safe_load(raw)
    return out


def _experiment_config(args) -> ExperimentConfig:
    overrides = _parse_sets(getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        overrides.setdefault("train.seed", args.seed)
    if getattr(args, "epochs", None) is not None:
        overrides.setdefault("train.epochs", args.epochs)
    if getattr(args, "variant", None) is not None:
        overrides.setdefault("model.variant", args.variant)
    return load_config(getattr(args, "config", None), overrides)


def _load_trajectory(path: str) -> Trajectory:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return parse_trajectory(obj, ctx=path)


def _source_signal(args, duration_sec: float) -> np.ndarray:
    if getattr(args, "source", None):
        return load_mono(args.source, target_rate=SAMPLE_RATE)
    rng = np.random.default_rng(np.random.SeedSequence([int(getattr(args, "seed", 0) or 0), 7]))
    return pink_noise(int(round(duration_sec * SAMPLE_RATE)), rng)


def _metric_config(args) -> MetricConfig:
    layers = None
    if getattr(args, "layers", None):
        layers = tuple(s.strip() for s in args.layers.split(",") if s.strip())
    return MetricConfig(
        checkpoint=args.checkpoint,
        layer_names=layers,
        alignment=getattr(args, "alignment", "strict_equal_length"),
    )


# --- subcommands -------------------------------------------------------------


def cmd_spatialize(args) -> int:
    src = load_mono(args.source, target_rate=SAMPLE_RATE)
    chosen = [
        args.azimuth is not None,
        args.trajectory is not None,
        args.brir_id is not None,
    ]
    if sum(chosen) != 1:
        raise ValueError("choose exactly one of --azimuth, --trajectory, --brir-id")
    if args.azimuth is not None:
        loc = SourceLocation.from_degrees(args.azimuth, args.elevation)
        sig = spatialize_parametric(src, loc)
    elif args.trajectory is not None:
        traj = _load_trajectory(args.trajectory)
        sig = render_trajectory(src, traj)
    else:
        if not args.brir_manifest:
            raise ValueError("--brir-id needs --brir-manifest")
        records = load_brir_manifest(args.brir_manifest)
        brirs = load_brirs([r for r in records if r.brir_id == args.brir_id])
        if args.brir_id not in brirs:
            raise ValueError(f"brir_id {args.brir_id!r} not in manifest")
        sig = spatialize_brir(src, brirs[args.brir_id])
    if args.noise is not None:
        noise = load_mono(args.noise, target_rate=SAMPLE_RATE)
        reps = int(np.ceil(sig.n_samples / len(noise)))
        noise = np.tile(noise, reps)[: sig.n_samples]
        noise_sig = spatialize_parametric(
            noise, SourceLocation.from_degrees(args.noise_azimuth, 0.0)
        )
        sig = mix_noise(sig, noise_sig, args.snr)
    save_wav(args.out, sig.samples, sig.sample_rate)
    _log(f"wrote {args.out}")
    _emit(
        {
            "out": str(args.out),
            "n_samples": sig.n_samples,
            "duration_sec": sig.duration_sec,
            "sample_rate": sig.sample_rate,
        }
    )
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _experiment_config(args)
    records = load_dataset_manifest(args.manifest)
    brirs = None
    if args.brir_manifest:
        brirs = load_brirs(load_brir_manifest(args.brir_manifest))
    model = build_model(cfg.model, seed=cfg.train.seed)
    _log(
        f"training {cfg.model.variant} model ({model.n_parameters()} parameters) "
        f"on {len(records)} records"
    )
    out_dir = args.out_dir or cfg.out_dir
    result = train(
        model,
        records,
        cfg.train,
        out_dir,
        brirs=brirs,
        manifest_path=args.manifest,
        quiet=args.quiet,
    )
    _emit(
        {
            "checkpoint": str(result.checkpoint_path),
            "metrics": str(result.metrics_path),
            "best_epoch": result.best_epoch,
            "best_val_loss": result.best_val_loss,
            "epochs_run": len(result.history),
            "config_hash": cfg.config_hash,
        }
    )
    return EXIT_OK


def cmd_eval_doa(args) -> int:
    model, _, meta = load_checkpoint(args.checkpoint)
    base = meta.get("train_config")
    tcfg = TrainConfig.from_dict(base) if base else TrainConfig()
    for key, value in _parse_sets(args.set).items():
        if not key.startswith("train."):
            raise ValueError(f"eval-doa overrides must be train.*, got {key!r}")
        tcfg = TrainConfig.from_dict({**tcfg.to_dict(), key[6:]: value})
    records = load_dataset_manifest(args.manifest)
    brirs = None
    if args.brir_manifest:
        brirs = load_brirs(load_brir_manifest(args.brir_manifest))
    report = evaluate_on_manifest(model, records, tcfg, brirs=brirs, split=args.split)
    _emit(report)
    return EXIT_OK


def cmd_dist(args) -> int:
    cfg = _metric_config(args)
    ref = load_binaural(args.reference, target_rate=SAMPLE_RATE)
    results = []
    for test_path in args.tests:
        test = load_binaural(test_path, target_rate=SAMPLE_RATE)
        if args.per_layer:
            d, breakdown = deep_feature_distance(ref, test, cfg, per_layer=True)
            results.append({"test": test_path, "distance": d, "per_layer": breakdown})
        else:
            d = deep_feature_distance(ref, test, cfg)
            results.append({"test": test_path, "distance": d})
    _emit({"reference": args.reference, "alignment": cfg.alignment, "results": results})
    return EXIT_OK


def cmd_cues(args) -> int:
    sig = load_binaural(args.input, target_rate=SAMPLE_RATE)
    frames = extract_cues(sig, frame_size=args.frame_size, hop=args.hop)
    if not frames:
        raise ValueError("no voiced frames in input")
    itd, ild, iacc = median_cues(frames)
    out = {
        "input": args.input,
        "n_voiced_frames": len(frames),
        "median_itd_us": itd * 1e6,
        "median_ild_db": ild,
        "median_iacc": iacc,
    }
    if args.other is not None:
        other = load_binaural(args.other, target_rate=SAMPLE_RATE)
        out["other"] = args.other
        out["cue_distance"] = cue_distance(
            sig, other, frame_size=args.frame_size, hop=args.hop
        )
    _emit(out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _metric_config(args)
    offsets = [float(s) for s in args.offsets.split(",") if s.strip()]
    source = _source_signal(args, args.duration)
    reference = SourceLocation.from_degrees(args.azimuth, 0.0)
    dist_fn = lambda a, b: deep_feature_distance(a, b, cfg)
    points = angular_sweep(source, reference, offsets, SAMPLE_RATE, dist_fn)
    try:
        rho = sweep_spearman(points)
    except ValueError:
        rho = None
    _emit(
        {
            "reference_azimuth_deg": args.azimuth,
            "points": [
                {
                    "offset_deg": p.offset_deg,
                    "separation_deg": p.separation_deg,
                    "distance": p.distance,
                }
                for p in points
            ],
            "spearman_vs_separation": rho,
        }
    )
    return EXIT_OK


def cmd_framewise(args) -> int:
    traj = _load_trajectory(args.trajectory)
    source = _source_signal(args, traj.duration_sec)
    sig = render_trajectory(source, traj)
    moving_model = static_model = None
    if args.moving_checkpoint:
        moving_model, _, _ = load_checkpoint(args.moving_checkpoint)
    if args.static_checkpoint:
        static_model, _, _ = load_checkpoint(args.static_checkpoint)
    report = compare_on_trajectory(
        sig, traj, moving_model=moving_model, static_model=static_model
    )
    _emit(
        {
            "n_frames": len(report.frame_times),
            "n_constant_intervals": len(report.intervals),
            "rmse_moving_deg": report.rmse_moving,
            "rmse_static_deg": report.rmse_static,
            "rmse_static_within_intervals_deg": report.rmse_static_within_intervals,
            "rmse_interval_static_deg": report.rmse_interval_static,
        }
    )
    return EXIT_OK


def cmd_correlate(args) -> int:
    records = load_ratings_csv(args.ratings)
    cfg = _metric_config(args)
    base = Path(args.ratings).parent
    pairs: Dict[str, tuple] = {}
    for rec in records:
        pair = (rec.reference_wav, rec.test_wav)
        if rec.condition_id in pairs and pairs[rec.condition_id] != pair:
            raise ValueError(
                f"condition {rec.condition_id!r} maps to different wav pairs"
            )
        pairs[rec.condition_id] = pair
    distances = {}
    for cid, (ref_raw, test_raw) in sorted(pairs.items()):
        ref = load_binaural(resolve_path(ref_raw, base, cid), target_rate=SAMPLE_RATE)
        test = load_binaural(resolve_path(test_raw, base, cid), target_rate=SAMPLE_RATE)
        distances[cid] = deep_feature_distance(ref, test, cfg)
        _log(f"{cid}: distance {distances[cid]:.6f}")
    by_study = correlate_ratings(records, distances)
    _emit(
        {
            "n_conditions": len(distances),
            "studies": {
                study: {"spearman": rho, "n_conditions": n}
                for study, (rho, n) in by_study.items()
            },
        }
    )
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dplm",
        description="Binaural DOA training and localization-similarity metric",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spatialize", help="render a mono wav to binaural")
    sp.add_argument("source", help="mono source wav")
    sp.add_argument("--out", required=True, help="output binaural wav")
    sp.add_argument("--azimuth", type=float, help="static azimuth in degrees")
    sp.add_argument("--elevation", type=float, default=0.0)
    sp.add_argument("--trajectory", help="trajectory JSON file")
    sp.add_argument("--brir-manifest", help="BRIR manifest (JSONL)")
    sp.add_argument("--brir-id", help="id (path field) of the BRIR to use")
    sp.add_argument("--noise", help="mono noise wav to mix in")
    sp.add_argument("--noise-azimuth", type=float, default=0.0)
    sp.add_argument("--snr", type=float, default=20.0, help="SNR in dB for --noise")
    sp.set_defaults(func=cmd_spatialize)

    tp = sub.add_parser("train", help="train a DOA network from a manifest")
    tp.add_argument("--manifest", required=True)
    tp.add_argument("--brir-manifest")
    tp.add_argument("--out-dir", help="defaults to the configured out_dir")
    tp.add_argument("--config", help="YAML experiment config")
    tp.add_argument("--set", action="append", metavar="KEY=VALUE")
    tp.add_argument("--seed", type=int)
    tp.add_argument("--epochs", type=int)
    tp.add_argument("--variant", choices=("static", "moving"))
    tp.add_argument("--quiet", action="store_true")
    tp.set_defaults(func=cmd_train)

    ep = sub.add_parser("eval-doa", help="evaluate a checkpoint on a manifest split")
    ep.add_argument("--checkpoint", required=True)
    ep.add_argument("--manifest", required=True)
    ep.add_argument("--brir-manifest")
    ep.add_argument("--split", default="test", choices=("train", "test"))
    ep.add_argument("--set", action="append", metavar="KEY=VALUE",
                    help="override the checkpoint's train.* settings")
    ep.set_defaults(func=cmd_eval_doa)

    dp = sub.add_parser("dist", help="deep-feature distance between recordings")
    dp.add_argument("--checkpoint", required=True)
    dp.add_argument("reference", help="reference binaural wav")
    dp.add_argument("tests", nargs="+", help="test binaural wavs")
    dp.add_argument("--alignment", default="strict_equal_length",
                    choices=("strict_equal_length", "time_pooled"))
    dp.add_argument("--layers", help="comma-separated capture layer names")
    dp.add_argument("--per-layer", action="store_true")
    dp.set_defaults(func=cmd_dist)

    cp = sub.add_parser("cues", help="classical ITD/ILD/IACC cues")
    cp.add_argument("input", help="binaural wav")
    cp.add_argument("other", nargs="?", help="optional second wav for cue distance")
    cp.add_argument("--frame-size", type=int, default=512)
    cp.add_argument("--hop", type=int, default=256)
    cp.set_defaults(func=cmd_cues)

    wp = sub.add_parser("sweep", help="metric distance vs angular separation")
    wp.add_argument("--checkpoint", required=True)
    wp.add_argument("--azimuth", type=float, default=0.0, help="reference azimuth (deg)")
    wp.add_argument("--offsets", default="0,2,5,10,15,20,30,45,60,90")
    wp.add_argument("--source", help="mono wav; seeded noise when omitted")
    wp.add_argument("--duration", type=float, default=1.0)
    wp.add_argument("--seed", type=int, default=0)
    wp.add_argument("--alignment", default="strict_equal_length",
                    choices=("strict_equal_length", "time_pooled"))
    wp.add_argument("--layers")
    wp.set_defaults(func=cmd_sweep)

    fp = sub.add_parser("framewise", help="static vs moving decoding on a trajectory")
    fp.add_argument("--trajectory", required=True, help="trajectory JSON file")
    fp.add_argument("--moving-checkpoint")
    fp.add_argument("--static-checkpoint")
    fp.add_argument("--source", help="mono wav; seeded noise when omitted")
    fp.add_argument("--seed", type=int, default=0)
    fp.set_defaults(func=cmd_framewise)

    rp = sub.add_parser("correlate", help="correlate metric distances with ratings")
    rp.add_argument("--ratings", required=True, help="ratings CSV")
    rp.add_argument("--checkpoint", required=True)
    rp.add_argument("--alignment", default="strict_equal_length",
                    choices=("strict_equal_length", "time_pooled"))
    rp.add_argument("--layers")
    rp.set_defaults(func=cmd_correlate)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ManifestError as exc:
        _log(f"manifest error: {exc}")
        return EXIT_INVALID
    except CheckpointError as exc:
        _log(f"checkpoint error: {exc}")
        return EXIT_MISSING
    except FileNotFoundError as exc:
        _log(f"missing file: {exc}")
        return EXIT_MISSING
    except (ValueError, KeyError) as exc:
        _log(f"invalid input: {exc}")
        return EXIT_INVALID
    except Exception as exc:  # pragma: no cover - last resort
        _log(f"error: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
