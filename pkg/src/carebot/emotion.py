"""Emotion scoring, dominant-emotion selection, and the sadness debounce."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# fixed label set; alphabetical order doubles as the tie-break order
EMOTION_LABELS = ("angry", "disgust", "fear", "happy", "neutral", "sad", "surprise")


class ScoreError(ValueError):
    pass


class ScriptExhaustedError(RuntimeError):
    pass


@dataclass
class DominantEmotion:
    label: str
    score: float


def normalize_scores(raw: dict) -> dict:
    if set(raw) != set(EMOTION_LABELS):
        raise ScoreError("expected exactly the labels %s" % (EMOTION_LABELS,))
    values = [float(raw[k]) for k in EMOTION_LABELS]
    if any(v < 0 for v in values):
        raise ScoreError("negative score")
    total = sum(values)
    if total <= 0:
        raise ScoreError("all-zero scores")
    return {k: float(raw[k]) / total for k in EMOTION_LABELS}


def dominant_emotion(scores: dict) -> DominantEmotion:
    """Argmax over the 7 labels; ties go to the alphabetically first label."""
    best = EMOTION_LABELS[0]
    for label in EMOTION_LABELS[1:]:
        if scores[label] > scores[best]:
            best = label
    return DominantEmotion(label=best, score=scores[best])


class SadnessTrigger:
    """Fires after `consecutive` frames of sad >= tau; any other frame resets."""

    def __init__(self, tau: float = 0.5, consecutive: int = 3):
        self.tau = tau
        self.consecutive = consecutive
        self._streak = 0

    def update(self, d: DominantEmotion) -> bool:
        if d.label == "sad" and d.score >= self.tau:
            self._streak += 1
        else:
            self._streak = 0
        return self._streak >= self.consecutive

    def reset(self):
        self._streak = 0


class ScriptedClassifier:
    """Replays a fixed queue of score records; running dry is an error."""

    def __init__(self, script):
        self._queue = [normalize_scores(s) for s in script]
        self._pos = 0

    def __len__(self):
        return len(self._queue) - self._pos

    def classify(self, face) -> dict:
        if self._pos >= len(self._queue):
            raise ScriptExhaustedError("scripted classifier queue exhausted")
        scores = self._queue[self._pos]
        self._pos += 1
        return scores


# Raw score tables per intensity band; variance picks the sub-row. Documented
# so demo runs are reproducible: mean < 85 reads dark/downcast (sad), mid band
# neutral, bright happy; high variance (>= 48) adds surprise weight.
_STUB_TABLE = {
    ("dark", "flat"):   {"sad": 5, "neutral": 2, "fear": 1, "angry": 1,
                         "disgust": 0.5, "happy": 0.25, "surprise": 0.25},
    ("dark", "busy"):   {"sad": 4, "fear": 2, "surprise": 2, "angry": 1,
                         "neutral": 0.5, "disgust": 0.25, "happy": 0.25},
    ("mid", "flat"):    {"neutral": 5, "happy": 2, "sad": 1, "angry": 0.5,
                         "disgust": 0.5, "fear": 0.5, "surprise": 0.5},
    ("mid", "busy"):    {"neutral": 3, "surprise": 3, "happy": 2, "sad": 1,
                         "angry": 0.5, "disgust": 0.25, "fear": 0.25},
    ("bright", "flat"): {"happy": 5, "neutral": 2, "surprise": 1, "sad": 0.5,
                         "angry": 0.5, "disgust": 0.5, "fear": 0.5},
    ("bright", "busy"): {"happy": 4, "surprise": 3, "neutral": 1, "sad": 0.5,
                         "angry": 0.5, "disgust": 0.5, "fear": 0.5},
}


class HeuristicStub:
    """Deterministic scores from image statistics; a stand-in for a real model."""

    def classify(self, face) -> dict:
        px = face.pixels.astype(np.float64)
        mean = float(px.mean())
        std = float(px.std())
        band = "dark" if mean < 85 else ("mid" if mean < 170 else "bright")
        texture = "busy" if std >= 48 else "flat"
        return normalize_scores(_STUB_TABLE[(band, texture)])
