"""The predictor contract plus test-double and file-backed implementations.

A predictor maps a feature tensor (7, T, M) to an ACCDOA sequence
(T // 4, n_classes, 3) with values in [-1, 1]. Predictors also receive a
ClipIdentity naming the clip and the rotation pattern already applied to
its audio; feature-driven models may ignore it, while the oracle uses it
to stay consistent with rotated inputs (which is what makes end-to-end
TTA identities exactly testable).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

import numpy as np

from .accdoa import encode
from .labels import ClipAnnotation
from .rotation import apply_to_direction, pattern_by_id
from .tensorio import load_tensor

FRAMES_PER_LABEL = 4  # STFT frames per 100 ms label frame at the default hop


@dataclass(frozen=True)
class ClipIdentity:
    """Names a clip and the rotation pattern its audio currently carries."""

    clip_id: str
    pattern_id: int = 0

    def with_pattern(self, pattern_id: int) -> "ClipIdentity":
        return replace(self, pattern_id=pattern_id)


class Predictor(Protocol):
    def predict(self, features: np.ndarray, identity: ClipIdentity) -> np.ndarray: ...


def label_frames_of(features, frames_per_label: int = FRAMES_PER_LABEL) -> int:
    return int(np.asarray(features).shape[1]) // frames_per_label


def seed_material(*parts) -> list[int]:
    """Deterministic RNG seed material from ints and strings."""
    material = []
    for part in parts:
        if isinstance(part, str):
            material.append(zlib.crc32(part.encode("utf-8")))
        else:
            material.append(int(part) & 0xFFFFFFFF)
    return material


@dataclass(frozen=True)
class OraclePredictorConfig:
    jitter_deg: float = 0.0
    activity: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.jitter_deg < 90.0:
            raise ValueError(f"jitter_deg must be in [0, 90), got {self.jitter_deg}")
        if not 0.0 < self.activity <= 1.0:
            raise ValueError(f"activity must be in (0, 1], got {self.activity}")


def _jitter_vectors(seq: np.ndarray, jitter_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate each active vector by a random axis-angle of magnitude <= jitter_deg."""
    out = seq.copy()
    frames, classes = np.nonzero(np.linalg.norm(seq, axis=2) > 0)
    for f, c in zip(frames, classes):
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        angle = np.radians(rng.uniform(0.0, jitter_deg))
        v = out[f, c]
        # Rodrigues rotation about the random axis
        out[f, c] = (
            v * np.cos(angle)
            + np.cross(axis, v) * np.sin(angle)
            + axis * (axis @ v) * (1.0 - np.cos(angle))
        )
    return out


class OraclePredictor:
    """Ground-truth-backed predictor for end-to-end verification.

    Holds the annotations of known clips; prediction encodes the clip's
    labels, transformed by the rotation pattern named in the identity, so
    its output matches what a perfect model would produce on the rotated
    audio. Optional direction jitter (seeded per clip and pattern) and a
    fixed emitted activity roughen it into a controllable imperfect model.
    """

    def __init__(self, annotations: dict, config: OraclePredictorConfig | None = None):
        self.annotations = dict(annotations)
        self.config = config or OraclePredictorConfig()

    def predict(self, features: np.ndarray, identity: ClipIdentity) -> np.ndarray:
        if identity.clip_id not in self.annotations:
            raise ValueError(f"unknown clip identity {identity.clip_id!r}")
        annotation = self.annotations[identity.clip_id]
        pattern = pattern_by_id(identity.pattern_id)
        rotated = ClipAnnotation(
            tuple(
                replace(ev, direction=apply_to_direction(ev.direction, pattern))
                for ev in annotation.events
            ),
            n_classes=annotation.n_classes,
        )
        seq = encode(rotated, label_frames_of(features))
        if self.config.jitter_deg > 0:
            rng = np.random.default_rng(
                seed_material(self.config.seed, identity.clip_id, identity.pattern_id)
            )
            seq = _jitter_vectors(seq, self.config.jitter_deg, rng)
        return seq * self.config.activity


class ConstantPredictor:
    """Emits the same vector everywhere; value 0 predicts silence."""

    def __init__(self, n_classes: int = 13, value: float = 0.0):
        if abs(value) > 1.0:
            raise ValueError("constant value must be within the tanh range [-1, 1]")
        self.n_classes = n_classes
        self.value = value

    def predict(self, features: np.ndarray, identity: ClipIdentity) -> np.ndarray:
        return np.full((label_frames_of(features), self.n_classes, 3), self.value)


class ExternalFilePredictor:
    """Serves precomputed ACCDOA tensors produced by an external model.

    Files live in one directory, named ``<clip_id>.p<pattern>.acc`` (with
    the usual JSON sidecar); ``<clip_id>.acc`` is accepted for the
    identity pattern so non-TTA runs need no suffix.
    """

    def __init__(self, directory):
        self.directory = Path(directory)

    def predict(self, features: np.ndarray, identity: ClipIdentity) -> np.ndarray:
        stem = Path(identity.clip_id).stem
        candidates = [self.directory / f"{stem}.p{identity.pattern_id:02d}.acc"]
        if identity.pattern_id == 0:
            candidates.append(self.directory / f"{stem}.acc")
        for path in candidates:
            if path.exists():
                seq, _ = load_tensor(path)
                return seq
        raise FileNotFoundError(
            f"no prediction file for clip {identity.clip_id!r} "
            f"pattern {identity.pattern_id} under {self.directory}"
        )


def make_predictor(spec, annotations: dict | None = None, n_classes: int = 13):
    """Build a predictor from a config mapping or a CLI spec string.

    Mappings: {"kind": "oracle", "jitter_deg": 3, "activity": 1, "seed": 0},
    {"kind": "constant", "value": 0}, {"kind": "external", "dir": "preds/"}.
    Strings: ``oracle``, ``oracle:<jitter_deg>``, ``constant``,
    ``constant:<value>``, ``external:<dir>``.
    """
    if isinstance(spec, str):
        kind, _, arg = spec.partition(":")
        spec = {"kind": kind}
        if arg:
            key = {"oracle": "jitter_deg", "constant": "value", "external": "dir"}.get(kind)
            if key is None:
                raise ValueError(f"unknown predictor kind {kind!r}")
            spec[key] = arg
    kind = spec.get("kind")
    if kind == "oracle":
        if annotations is None:
            raise ValueError("oracle predictor needs clip annotations")
        config = OraclePredictorConfig(
            jitter_deg=float(spec.get("jitter_deg", 0.0)),
            activity=float(spec.get("activity", 1.0)),
            seed=int(spec.get("seed", 0)),
        )
        return OraclePredictor(annotations, config)
    if kind == "constant":
        return ConstantPredictor(n_classes=n_classes, value=float(spec.get("value", 0.0)))
    if kind == "external":
        if "dir" not in spec:
            raise ValueError("external predictor needs a directory")
        return ExternalFilePredictor(spec["dir"])
    raise ValueError(f"unknown predictor kind {kind!r}")
