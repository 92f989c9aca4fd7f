"""Mask/no-mask decisions for aligned chips, plus the training-side math.

The loss functions implement the binary cross-entropy and the two-class
uniform-mixture label smoothing used when training the classifier; the
training executor itself is out of scope, so TrainingConfig is a plain
serializable record of the hyperparameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .alignment import FaceChip
from .annotations import MaskLabel

LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class MaskScore:
    """Probability that the face wears a mask."""

    p_mask: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_mask <= 1.0:
            raise ValueError(f"p_mask outside [0, 1]: {self.p_mask}")


@runtime_checkable
class ClassifierBackend(Protocol):
    """Chip scorer; must be deterministic for identical chips."""

    thread_safe: bool

    def score(self, chip: FaceChip) -> MaskScore: ...


@dataclass(frozen=True)
class ClassifierConfig:
    decision_threshold: float = 0.95
    input_size: tuple[int, int] = (224, 224)

    def __post_init__(self) -> None:
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValueError(
                f"decision_threshold must be in (0, 1), got {self.decision_threshold}"
            )


@dataclass(frozen=True)
class TrainingConfig:
    """Classifier training hyperparameters, recorded for reproducibility."""

    optimizer: str = "sgd"
    momentum: float = 0.9
    weight_decay: float = 5e-4
    base_lr: float = 1e-2
    epochs: int = 80
    lr_drop_epochs: tuple[int, ...] = (20, 40, 60)
    lr_drop_factor: float = 0.1
    batch_size: int = 32
    dropout: float = 0.5
    random_crop: bool = True
    color_jitter: bool = True
    pca_noise: bool = True
    horizontal_flip_p: float = 0.5

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TrainingConfig":
        obj = json.loads(text)
        obj["lr_drop_epochs"] = tuple(obj["lr_drop_epochs"])
        return cls(**obj)


def _clamp(p: float) -> float:
    return min(max(p, LOG_CLAMP), 1.0 - LOG_CLAMP)


def bce_loss(y: int, y_hat: float) -> float:
    """Binary cross-entropy -(y log p + (1-y) log(1-p)), p clamped to 1e-12."""
    if y not in (0, 1):
        raise ValueError(f"y must be 0 or 1, got {y}")
    p = _clamp(y_hat)
    return -(y * math.log(p) + (1 - y) * math.log(1.0 - p))


def smooth_labels(y: int, epsilon: float) -> tuple[float, float]:
    """Two-class uniform-mixture smoothing: (t_nomask, t_mask).

    The true class gets 1 - eps + eps/K and the other eps/K; with K = 2 the
    pair is (1 - eps/2, eps/2), which sums to 1 exactly.
    """
    if y not in (0, 1):
        raise ValueError(f"y must be 0 or 1, got {y}")
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    off = epsilon / 2.0
    on = 1.0 - off
    return (off, on) if y == 1 else (on, off)


def smoothed_ce_loss(target: tuple[float, float], y_hat: float) -> float:
    """Cross-entropy against a (t_nomask, t_mask) target distribution.

    Reduces bitwise to bce_loss when the target is one-hot (same clamping,
    same operations).
    """
    t_nomask, t_mask = target
    if t_nomask < 0 or t_mask < 0 or abs(t_nomask + t_mask - 1.0) > 1e-9:
        raise ValueError(f"target is not a distribution: {target}")
    p = _clamp(y_hat)
    return -(t_mask * math.log(p) + t_nomask * math.log(1.0 - p))


def decide_label(score: MaskScore, cfg: ClassifierConfig) -> MaskLabel:
    """Mask iff p_mask is at or above the decision threshold (inclusive)."""
    if score.p_mask >= cfg.decision_threshold:
        return MaskLabel.MASK
    return MaskLabel.NO_MASK


@dataclass
class HeuristicBackend:
    """Weights-free stand-in classifier for end-to-end tests.

    Scores a chip from mean saturation and gradient texture of the rows at
    and below `from_fraction` of the chip height: pale, uniform regions read
    as mask-like. Deterministic; makes no accuracy claims.
    """

    from_fraction: float = 0.5
    thread_safe: bool = True

    def score(self, chip: FaceChip) -> MaskScore:
        height = chip.height
        row0 = min(height - 1, max(0, round(height * self.from_fraction)))
        region = chip.pixels[row0:].astype(np.float64) / 255.0
        high = region.max(axis=2)
        low = region.min(axis=2)
        saturation = float(np.mean((high - low) / (high + 1e-6)))
        gray = region.mean(axis=2)
        texture = 0.0
        if gray.shape[0] > 1:
            texture += float(np.mean(np.abs(np.diff(gray, axis=0))))
        if gray.shape[1] > 1:
            texture += float(np.mean(np.abs(np.diff(gray, axis=1))))
        p = 0.5 * (1.0 - saturation) + 0.5 * math.exp(-20.0 * texture)
        return MaskScore(min(1.0, max(0.0, p)))


@dataclass
class ScriptedClassifier:
    """Classifier scripted by chip provenance, for fixtures and pipelines.

    Fixture JSON: {frame_id: {detection_index: p_mask}}.
    """

    fixture: dict
    thread_safe: bool = True

    @classmethod
    def from_file(cls, path: Path | str) -> "ScriptedClassifier":
        return cls(fixture=json.loads(Path(path).read_text(encoding="utf-8")))

    def score(self, chip: FaceChip) -> MaskScore:
        if chip.provenance is None:
            raise ValueError("scripted classifier needs chip provenance")
        frame_id = chip.provenance.frame_id
        index = str(chip.provenance.detection_index)
        try:
            return MaskScore(float(self.fixture[frame_id][index]))
        except KeyError as exc:
            raise KeyError(
                f"no scripted score for frame {frame_id!r} detection {index}"
            ) from exc
