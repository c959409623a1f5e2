"""End-to-end orchestration: configuration, segmentation, k-fold splits, scoring runs.

A run walks a dataset manifest, and for every entry: load the clip and its
labels, optionally augment the waveform, extract features, predict
(directly or through rotation TTA), decode into events, and score against
the labels. Per-class stats are merged across entries and finalized into
one scores document. Entries that fail are reported and skipped; the run
itself keeps going.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .accdoa import decode
from .audio import AudioClip, read_wav
from .augment import AugmentConfig, augment_waveform
from .features import FeatureConfig, extract_features
from .labels import read_labels
from .manifest import DatasetManifest, ManifestEntry, load_manifest
from .metrics import MetricConfig, class_breakdown, evaluate_stats, finalize, merge_stats
from .predict import ClipIdentity, make_predictor, seed_material
from .tta import TtaConfig, run_tta

log = logging.getLogger(__name__)

WORKERS_ENV = "SELDKIT_WORKERS"


def segment_clip(clip: AudioClip, window_s: float = 5.0, hop_s: float = 1.0) -> list[AudioClip]:
    """Cut a clip into overlapping windows (5 s / 1 s hop by default).

    Yields 1 + floor((duration - window) / hop) segments; clips shorter
    than one window are zero-padded into a single segment.
    """
    if window_s <= 0 or hop_s <= 0:
        raise ValueError("window_s and hop_s must be positive")
    win = round(window_s * clip.sample_rate)
    hop = round(hop_s * clip.sample_rate)
    if clip.n_samples < win:
        padded = np.zeros((4, win))
        padded[:, : clip.n_samples] = clip.samples
        return [AudioClip(padded, clip.sample_rate)]
    count = 1 + (clip.n_samples - win) // hop
    return [
        AudioClip(clip.samples[:, i * hop : i * hop + win].copy(), clip.sample_rate)
        for i in range(count)
    ]


def _dominant_class(entry: ManifestEntry, n_classes: int) -> int:
    """Stratification key: most frequent class in the entry's label file."""
    annotation = read_labels(entry.label_path, n_classes=n_classes)
    if not annotation.events:
        return -1
    counts: dict = {}
    for ev in annotation.events:
        counts[ev.class_id] = counts.get(ev.class_id, 0) + 1
    return max(sorted(counts), key=lambda c: counts[c])


def kfold_split(
    manifest: DatasetManifest,
    k: int = 4,
    mode: str = "stratified",
    seed: int = 0,
    n_classes: int = 13,
    class_key=None,
) -> list[DatasetManifest]:
    """Split a manifest into k folds.

    ``stratified`` deals each class's entries round-robin (after a seeded
    shuffle), so per-class counts across folds differ by at most one. The
    class of an entry defaults to the dominant class of its label file;
    pass ``class_key(entry) -> int`` to override. ``room`` keeps every
    room_tag within a single fold, greedily evening out fold sizes, and
    requires at least k distinct rooms. Output entries carry fold_tag
    "fold0".."fold{k-1}".
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds: list[list[ManifestEntry]] = [[] for _ in range(k)]
    if mode == "stratified":
        key = class_key or (lambda e: _dominant_class(e, n_classes))
        groups: dict = {}
        for entry in manifest:
            groups.setdefault(key(entry), []).append(entry)
        for group_key in sorted(groups):
            group = groups[group_key]
            order = rng.permutation(len(group))
            for i, idx in enumerate(order):
                folds[i % k].append(group[idx])
    elif mode == "room":
        rooms: dict = {}
        for entry in manifest:
            if entry.room_tag is None:
                raise ValueError(f"room mode needs room_tags; {entry.clip_path} has none")
            rooms.setdefault(entry.room_tag, []).append(entry)
        if len(rooms) < k:
            raise ValueError(f"room mode needs >= {k} rooms, found {len(rooms)}")
        names = [str(r) for r in rooms]
        shuffled = [names[i] for i in rng.permutation(len(names))]
        for room in sorted(shuffled, key=lambda r: -len(rooms[r])):
            smallest = min(range(k), key=lambda i: len(folds[i]))
            folds[smallest].extend(rooms[room])
    else:
        raise ValueError(f"mode must be 'stratified' or 'room', got {mode!r}")
    return [
        DatasetManifest(
            tuple(dataclasses.replace(e, fold_tag=f"fold{i}") for e in fold)
        )
        for i, fold in enumerate(folds)
    ]


@dataclass(frozen=True)
class RunConfig:
    """One JSON document configuring a full scoring run."""

    manifest_path: str
    predictor: dict
    seed: int = 0
    n_classes: int = 13
    feature: FeatureConfig = FeatureConfig()
    metric: MetricConfig = MetricConfig()
    tta: TtaConfig | None = TtaConfig()
    augment: AugmentConfig | None = None
    decode_threshold: float = 0.5
    workers: int | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        def sub(config_cls, key, default):
            if key not in doc or doc[key] is None:
                return default
            return config_cls(**doc[key])

        n_classes = int(doc.get("n_classes", 13))
        metric_doc = dict(doc.get("metric") or {})
        metric_doc.setdefault("n_classes", n_classes)
        return cls(
            manifest_path=doc["manifest"],
            predictor=dict(doc["predictor"]),
            seed=int(doc.get("seed", 0)),
            n_classes=n_classes,
            feature=sub(FeatureConfig, "feature", FeatureConfig()),
            metric=MetricConfig(**metric_doc),
            tta=sub(TtaConfig, "tta", None) if "tta" in doc else TtaConfig(),
            augment=sub(AugmentConfig, "augment", None),
            decode_threshold=float(doc.get("decode_threshold", 0.5)),
            workers=doc.get("workers"),
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _worker_count(config: RunConfig) -> int:
    if config.workers is not None:
        return max(1, int(config.workers))
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _score_entry(entry: ManifestEntry, config: RunConfig, predictor):
    clip = read_wav(entry.clip_path)
    annotation = read_labels(entry.label_path, n_classes=config.n_classes)
    if config.augment is not None:
        rng = np.random.default_rng(seed_material(config.seed, entry.clip_path))
        clip = augment_waveform(clip, config.augment, rng)
    identity = ClipIdentity(entry.clip_path)
    if config.tta is not None:
        events = run_tta(predictor, clip, identity, config.tta, config.feature)
    else:
        features = extract_features(clip, config.feature)
        seq = predictor.predict(features, identity)
        events = decode(seq, config.decode_threshold)
    return evaluate_stats(events, annotation, config.metric)


def run_pipeline(config: RunConfig) -> dict:
    """Execute a scoring run and return the scores document.

    The document is deterministic for a fixed config and seed: entries are
    merged in manifest order whatever the worker pool does, and it carries
    no timestamps or machine state.
    """
    manifest = load_manifest(config.manifest_path)
    annotations = {
        e.clip_path: read_labels(e.label_path, n_classes=config.n_classes) for e in manifest
    }
    predictor = make_predictor(config.predictor, annotations=annotations, n_classes=config.n_classes)

    def job(entry):
        try:
            return entry, _score_entry(entry, config, predictor), None
        except Exception as exc:  # reported per entry, run continues
            log.warning("entry %s failed: %s", entry.clip_path, exc)
            return entry, None, f"{type(exc).__name__}: {exc}"

    workers = _worker_count(config)
    if workers == 1:
        results = [job(e) for e in manifest]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, manifest.entries))

    per_entry = [stats for _, stats, err in results if err is None]
    failures = [
        {"clip_path": entry.clip_path, "error": err} for entry, _, err in results if err is not None
    ]
    doc: dict = {
        "n_entries": len(manifest),
        "n_scored": len(per_entry),
        "failures": failures,
    }
    if per_entry:
        stats = merge_stats(per_entry)
        scores = finalize(stats, config.metric)
        doc["scores"] = scores.to_dict()
        doc["per_class"] = class_breakdown(stats)
    return doc


def write_scores(doc: dict, path) -> None:
    """Write a scores document as canonical JSON (stable key order)."""
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
