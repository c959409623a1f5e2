"""Command-line interface.

Verbs: features extract, rotate, augment, emulate, dataset sample-epoch,
dataset kfold, accdoa decode, tta run, eval, pipeline run. Every verb
accepts --seed; verbs that are fully deterministic ignore it. Worker count
for pipeline runs comes from the SELDKIT_WORKERS environment variable.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import accdoa as accdoa_mod
from . import emulate as emulate_mod
from .audio import read_wav, write_wav
from .augment import AugmentConfig, augment_waveform
from .features import FEATURE_CHANNELS, FeatureConfig, extract_features
from .labels import ClipAnnotation, EventLabel, read_labels, write_labels
from .manifest import load_manifest, save_manifest
from .metrics import MetricConfig, class_breakdown, evaluate_stats, finalize
from .pipeline import RunConfig, kfold_split, run_pipeline, write_scores
from .predict import ClipIdentity, make_predictor
from .rotation import apply_to_audio, apply_to_direction, pattern_by_id
from .tensorio import load_tensor, save_tensor
from .tta import TtaConfig, run_tta

_seed_option = click.option("--seed", type=int, default=0, show_default=True, help="RNG seed.")


def _load_json(path):
    with open(path) as f:
        return json.load(f)


@click.group()
def main():
    """Spatial-audio SELD toolkit."""


@main.group()
def features():
    """Feature extraction."""


@features.command("extract")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), help="FeatureConfig JSON.")
@_seed_option
def features_extract(in_path, out_path, config_path, seed):
    """Extract the 7-channel feature tensor of a clip (deterministic; seed unused)."""
    config = FeatureConfig(**_load_json(config_path)) if config_path else FeatureConfig()
    clip = read_wav(in_path)
    tensor = extract_features(clip, config)
    save_tensor(out_path, tensor, channel_names=FEATURE_CHANNELS, config=config.to_dict())
    click.echo(f"wrote {out_path} dims {list(tensor.shape)}")


@main.command()
@click.option("--pattern", type=click.IntRange(0, 15), required=True)
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", type=click.Path(exists=True))
@click.option("--out-prefix", required=True)
@click.option("--n-classes", type=int, default=13, show_default=True)
@_seed_option
def rotate(pattern, in_path, labels_path, out_prefix, n_classes, seed):
    """Apply one rotation pattern to a clip and (optionally) its labels."""
    p = pattern_by_id(pattern)
    write_wav(f"{out_prefix}.wav", apply_to_audio(read_wav(in_path), p))
    outputs = [f"{out_prefix}.wav"]
    if labels_path:
        annotation = read_labels(labels_path, n_classes=n_classes)
        rotated = ClipAnnotation(
            tuple(
                EventLabel(ev.frame, ev.class_id, ev.track_id, apply_to_direction(ev.direction, p))
                for ev in annotation.events
            ),
            n_classes=n_classes,
        )
        write_labels(rotated, f"{out_prefix}.csv")
        outputs.append(f"{out_prefix}.csv")
    click.echo(f"pattern {pattern} ({p.azimuth_map}, elevation x{p.sign_z}) -> " + ", ".join(outputs))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), help="AugmentConfig JSON.")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@_seed_option
def augment(config_path, in_path, out_path, seed):
    """Apply gain/pitch/band-pass augmentation with parameters drawn from config ranges."""
    config = AugmentConfig(**_load_json(config_path)) if config_path else AugmentConfig()
    rng = np.random.default_rng(seed)
    write_wav(out_path, augment_waveform(read_wav(in_path), config, rng))
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--library", "library_path", required=True, type=click.Path(exists=True))
@click.option("--out-prefix", required=True)
@click.option("--srir-config", "srir_path", type=click.Path(exists=True), help="SrirSynthConfig JSON.")
@click.option("--n-classes", type=int, default=13, show_default=True)
@click.option("--seed", type=int, default=None, help="Overrides the scene spec's seed.")
def emulate(spec_path, library_path, out_prefix, srir_path, n_classes, seed):
    """Render a scene spec into a 4-channel WAV plus label CSV."""
    spec = emulate_mod.scene_spec_from_json(_load_json(spec_path))
    if seed is not None:
        spec = emulate_mod.SceneSpec(spec.duration_s, spec.events, spec.snr_db, seed)
    library = emulate_mod.load_library(library_path)
    srir_config = emulate_mod.SrirSynthConfig(**_load_json(srir_path)) if srir_path else None
    clip, annotation = emulate_mod.mix_scene(spec, library, srir_config, n_classes=n_classes)
    write_wav(f"{out_prefix}.wav", clip)
    write_labels(annotation, f"{out_prefix}.csv")
    click.echo(f"wrote {out_prefix}.wav ({clip.duration_s:g}s) and {out_prefix}.csv "
               f"({len(annotation.events)} labels)")


@main.group()
def dataset():
    """Manifest sampling and splitting."""


@dataset.command("sample-epoch")
@click.option("--real", "real_path", required=True, type=click.Path(exists=True))
@click.option("--emulated", "emulated_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@_seed_option
def dataset_sample_epoch(real_path, emulated_path, out_path, seed):
    """Compose one epoch: all real entries plus an equal-size emulated draw."""
    epoch = emulate_mod.sample_epoch(load_manifest(real_path), load_manifest(emulated_path), seed)
    save_manifest(epoch, out_path)
    click.echo(f"wrote {out_path} ({len(epoch)} entries)")


@dataset.command("kfold")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--k", type=int, default=4, show_default=True)
@click.option("--mode", type=click.Choice(["stratified", "room"]), default="stratified", show_default=True)
@click.option("--out-prefix", required=True)
@click.option("--n-classes", type=int, default=13, show_default=True)
@_seed_option
def dataset_kfold(manifest_path, k, mode, out_prefix, n_classes, seed):
    """Split a manifest into k folds (stratified by class, or room-wise)."""
    folds = kfold_split(load_manifest(manifest_path), k=k, mode=mode, seed=seed, n_classes=n_classes)
    for i, fold in enumerate(folds):
        save_manifest(fold, f"{out_prefix}.fold{i}.json")
    click.echo(f"wrote {k} folds with sizes {[len(f) for f in folds]}")


@main.group()
def accdoa():
    """ACCDOA sequence tools."""


@accdoa.command("decode")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--tau", type=float, default=0.5, show_default=True, help="Activity threshold.")
@click.option("--out", "out_path", required=True, type=click.Path())
@_seed_option
def accdoa_decode(in_path, tau, out_path, seed):
    """Decode detections from a stored sequence (deterministic; seed unused)."""
    seq, _ = load_tensor(in_path)
    events = accdoa_mod.decode(seq, tau)
    accdoa_mod.write_events(events, out_path)
    click.echo(f"wrote {out_path} ({len(events)} events)")


@main.group()
def tta():
    """Test-time augmentation."""


@tta.command("run")
@click.option("--model", "models", required=True, multiple=True,
              help="Predictor spec; repeat to ensemble (oracle:<labels.csv>, constant, external:<dir>).")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), help="TtaConfig JSON.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--n-classes", type=int, default=13, show_default=True)
@_seed_option
def tta_run(models, in_path, config_path, out_path, n_classes, seed):
    """Run 16-rotation clustering TTA over one clip."""
    config = TtaConfig(**_load_json(config_path)) if config_path else TtaConfig()
    clip = read_wav(in_path)
    predictors = []
    for spec in models:
        kind, _, arg = spec.partition(":")
        if kind == "oracle":
            if not arg:
                raise click.UsageError("oracle predictor spec is oracle:<labels.csv>")
            annotations = {in_path: read_labels(arg, n_classes=n_classes)}
            predictors.append(
                make_predictor({"kind": "oracle", "seed": seed}, annotations, n_classes)
            )
        else:
            predictors.append(make_predictor(spec, n_classes=n_classes))
    events = run_tta(predictors, clip, ClipIdentity(in_path), config)
    accdoa_mod.write_events(events, out_path)
    click.echo(f"wrote {out_path} ({len(events)} events)")


@main.command("eval")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--ref", "ref_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--threshold", type=float, default=20.0, show_default=True, help="Spatial threshold, degrees.")
@click.option("--segment-frames", type=int, default=10, show_default=True)
@click.option("--n-classes", type=int, default=13, show_default=True)
@_seed_option
def eval_cmd(pred_path, ref_path, out_path, threshold, segment_frames, n_classes, seed):
    """Score predicted events against reference labels (deterministic; seed unused)."""
    config = MetricConfig(
        spatial_threshold_deg=threshold, segment_frames=segment_frames, n_classes=n_classes
    )
    preds = accdoa_mod.read_events(pred_path)
    refs = read_labels(ref_path, n_classes=n_classes)
    stats = evaluate_stats(preds, refs, config)
    scores = finalize(stats, config)
    doc = {"scores": scores.to_dict(), "per_class": class_breakdown(stats)}
    write_scores(doc, out_path)
    click.echo(
        f"ER20 {scores.er20:.4f}  F20 {scores.f20:.4f}  "
        f"LE_CD {scores.le_cd:.4f}  LR_CD {scores.lr_cd:.4f}"
    )


@main.group()
def pipeline():
    """Full scoring runs."""


@pipeline.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
def pipeline_run(config_path, out_path, seed):
    """Run the full pipeline over a manifest and write scores JSON."""
    doc = _load_json(config_path)
    if seed is not None:
        doc["seed"] = seed
    config = RunConfig.from_dict(doc)
    base = Path(config_path).parent
    if not Path(config.manifest_path).is_absolute():
        config = RunConfig(**{**config.__dict__, "manifest_path": str(base / config.manifest_path)})
    result = run_pipeline(config)
    write_scores(result, out_path)
    if result["failures"]:
        click.echo(f"{len(result['failures'])} entries failed:", err=True)
        for failure in result["failures"]:
            click.echo(f"  {failure['clip_path']}: {failure['error']}", err=True)
    if "scores" in result:
        s = result["scores"]
        click.echo(
            f"ER20 {s['er20']:.4f}  F20 {s['f20']:.4f}  LE_CD {s['le_cd']:.4f}  LR_CD {s['lr_cd']:.4f}"
        )
    else:
        click.echo("no entries scored", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
