import numpy as np
import pytest

from carebot.emotion import (EMOTION_LABELS, DominantEmotion, HeuristicStub,
                             ScoreError, ScriptedClassifier,
                             ScriptExhaustedError, SadnessTrigger,
                             dominant_emotion, normalize_scores)
from carebot.frames import GrayFrame


def raw(**kwargs):
    scores = {k: 0.0 for k in EMOTION_LABELS}
    scores.update(kwargs)
    return scores


class TestNormalize:
    def test_uniform(self):
        out = normalize_scores({k: 1.0 for k in EMOTION_LABELS})
        assert all(v == pytest.approx(1 / 7) for v in out.values())

    def test_single_positive(self):
        out = normalize_scores(raw(sad=3.0))
        assert out["sad"] == 1.0

    def test_all_zero_rejected(self):
        with pytest.raises(ScoreError):
            normalize_scores(raw())

    def test_negative_rejected(self):
        with pytest.raises(ScoreError):
            normalize_scores(raw(sad=1.0, happy=-0.1))

    def test_missing_label_rejected(self):
        with pytest.raises(ScoreError):
            normalize_scores({"sad": 1.0})

    def test_random_matches_division_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            values = rng.random(7) + 1e-6
            scores = dict(zip(EMOTION_LABELS, values))
            out = normalize_scores(scores)
            assert sum(out.values()) == pytest.approx(1.0, abs=1e-9)
            total = values.sum()
            for k, v in zip(EMOTION_LABELS, values):
                assert out[k] == pytest.approx(v / total, abs=1e-12)


def oracle_argmax(scores):
    best, best_v = None, -1.0
    for label in sorted(EMOTION_LABELS):
        if scores[label] > best_v:
            best, best_v = label, scores[label]
    return best


class TestDominant:
    def test_clear_winner(self):
        scores = normalize_scores(raw(sad=0.9, happy=0.1))
        d = dominant_emotion(scores)
        assert d.label == "sad" and d.score == pytest.approx(0.9)

    def test_uniform_tie_breaks_alphabetically(self):
        d = dominant_emotion({k: 1 / 7 for k in EMOTION_LABELS})
        assert d.label == "angry"

    def test_1000_random_vectors_match_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            values = rng.integers(0, 5, 7) / 4.0  # coarse grid forces ties
            scores = dict(zip(EMOTION_LABELS, values))
            if sum(values) == 0:
                continue
            d = dominant_emotion(scores)
            assert d.label == oracle_argmax(scores)
            assert d.score == max(scores.values())

    def test_rescaling_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            values = rng.random(7) + 0.01
            a = normalize_scores(dict(zip(EMOTION_LABELS, values)))
            b = normalize_scores(dict(zip(EMOTION_LABELS, values * 37.5)))
            assert dominant_emotion(a).label == dominant_emotion(b).label


def oracle_trigger_stream(frames, tau, consecutive):
    """Reference automaton: replay the stream and emit per-frame booleans."""
    out = []
    streak = 0
    for (label, score) in frames:
        streak = streak + 1 if (label == "sad" and score >= tau) else 0
        out.append(streak >= consecutive)
    return out


class TestSadnessTrigger:
    def test_three_consecutive(self):
        t = SadnessTrigger(tau=0.5, consecutive=3)
        results = [t.update(DominantEmotion("sad", 0.9)) for _ in range(3)]
        assert results == [False, False, True]

    def test_reset_on_interruption(self):
        t = SadnessTrigger(tau=0.5, consecutive=3)
        stream = [("sad", 0.9), ("happy", 0.8), ("sad", 0.9), ("sad", 0.9)]
        results = [t.update(DominantEmotion(l, s)) for l, s in stream]
        assert results == [False, False, False, False]

    def test_below_tau_resets(self):
        t = SadnessTrigger(tau=0.5, consecutive=2)
        assert not t.update(DominantEmotion("sad", 0.9))
        assert not t.update(DominantEmotion("sad", 0.4))
        assert not t.update(DominantEmotion("sad", 0.9))
        assert t.update(DominantEmotion("sad", 0.9))

    def test_random_streams_match_reference_automaton(self):
        rng = np.random.default_rng(3)
        labels = list(EMOTION_LABELS)
        for _ in range(50):
            stream = [(labels[int(rng.integers(0, 7))], float(rng.random()))
                      for _ in range(40)]
            t = SadnessTrigger(tau=0.5, consecutive=3)
            got = [t.update(DominantEmotion(l, s)) for l, s in stream]
            assert got == oracle_trigger_stream(stream, 0.5, 3)


class TestClassifiers:
    def test_scripted_replays_exactly(self):
        script = [raw(sad=1.0), raw(happy=1.0)]
        c = ScriptedClassifier(script)
        frame = GrayFrame.from_array(np.zeros((4, 4), np.uint8))
        assert dominant_emotion(c.classify(frame)).label == "sad"
        assert dominant_emotion(c.classify(frame)).label == "happy"

    def test_scripted_exhaustion_is_an_error(self):
        c = ScriptedClassifier([raw(sad=1.0)])
        frame = GrayFrame.from_array(np.zeros((4, 4), np.uint8))
        c.classify(frame)
        with pytest.raises(ScriptExhaustedError):
            c.classify(frame)

    def test_heuristic_stub_deterministic_bands(self):
        stub = HeuristicStub()
        dark = GrayFrame.from_array(np.full((8, 8), 30, np.uint8))
        bright = GrayFrame.from_array(np.full((8, 8), 220, np.uint8))
        assert dominant_emotion(stub.classify(dark)).label == "sad"
        assert dominant_emotion(stub.classify(bright)).label == "happy"
        assert stub.classify(dark) == stub.classify(dark)
