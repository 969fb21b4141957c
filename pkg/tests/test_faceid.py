import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carebot.faceid import (FaceSizeError, LbphParams, ModelStateError,
                            bilinear_resize, chi_square, grid_histogram,
                            lbp_map, load_model, predict, save_model, train)
from carebot.frames import GrayFrame

NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]


def oracle_lbp(px):
    h, w = px.shape
    out = np.zeros((h - 2, w - 2), dtype=np.uint8)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            code = 0
            for bit, (dy, dx) in enumerate(NEIGHBORS):
                if px[y + dy, x + dx] >= px[y, x]:
                    code |= 1 << bit
            out[y - 1, x - 1] = code
    return out


class TestLbpMap:
    def test_constant_face_all_255(self):
        codes = lbp_map(GrayFrame.from_array(np.full((5, 5), 100, np.uint8)))
        assert (codes == 255).all()

    def test_strict_local_max_codes_zero(self):
        px = np.full((3, 3), 10, np.uint8)
        px[1, 1] = 200
        assert lbp_map(GrayFrame.from_array(px))[0, 0] == 0

    def test_too_small(self):
        with pytest.raises(FaceSizeError):
            lbp_map(GrayFrame.from_array(np.zeros((2, 3), np.uint8)))

    def test_random_matches_oracle(self):
        rng = np.random.default_rng(0)
        px = rng.integers(0, 256, (8, 8), np.uint8)
        assert (lbp_map(GrayFrame.from_array(px)) == oracle_lbp(px)).all()

    def test_illumination_shift_invariance(self):
        rng = np.random.default_rng(1)
        px = rng.integers(0, 200, (10, 10), np.uint8)
        shifted = (px + 50).astype(np.uint8)  # no clamping by construction
        a = lbp_map(GrayFrame.from_array(px))
        b = lbp_map(GrayFrame.from_array(shifted))
        assert (a == b).all()


class TestGridHistogram:
    def test_all_255_codes(self):
        params = LbphParams(grid_x=2, grid_y=2)
        codes = np.full((8, 8), 255, np.uint8)
        hist = grid_histogram(codes, params)
        assert hist.shape == (4 * 256,)
        for cell in range(4):
            block = hist[cell * 256 : (cell + 1) * 256]
            assert block[255] == 1.0 and block[:255].sum() == 0.0

    def test_random_matches_counting_oracle(self):
        params = LbphParams(grid_x=3, grid_y=2)
        rng = np.random.default_rng(2)
        codes = rng.integers(0, 256, (11, 13), np.uint8)
        hist = grid_histogram(codes, params)
        # oracle: explicit cell bounds, last cell absorbs the remainder
        rows = [(0, 5), (5, 11)]
        cols = [(0, 4), (4, 8), (8, 13)]
        i = 0
        for (y0, y1) in rows:
            for (x0, x1) in cols:
                cell = codes[y0:y1, x0:x1].ravel()
                counts = np.zeros(256)
                for v in cell:
                    counts[v] += 1
                counts /= counts.sum()
                assert np.allclose(hist[i * 256 : (i + 1) * 256], counts,
                                   atol=1e-12)
                i += 1

    def test_cell_normalization_invariant(self):
        params = LbphParams()
        rng = np.random.default_rng(3)
        codes = rng.integers(0, 256, (62, 62), np.uint8)
        hist = grid_histogram(codes, params)
        for cell in range(64):
            s = hist[cell * 256 : (cell + 1) * 256].sum()
            assert s == pytest.approx(1.0, abs=1e-9) or s == 0.0


class TestChiSquare:
    def test_self_distance_zero(self):
        h = np.random.default_rng(4).random(512)
        assert chi_square(h, h) == 0.0

    def test_disjoint_forced_value(self):
        assert chi_square([1.0, 0.0], [0.0, 1.0]) == pytest.approx(2.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            chi_square([1.0], [1.0, 2.0])

    def test_random_pairs_match_scalar_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            a = rng.random(64)
            b = rng.random(64)
            expected = 0.0
            for ai, bi in zip(a, b):
                if ai + bi > 0:
                    expected += (ai - bi) ** 2 / (ai + bi)
            assert chi_square(a, b) == pytest.approx(expected, abs=1e-12)

    @given(st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=32),
           st.data())
    @settings(max_examples=50, deadline=None)
    def test_symmetric_nonnegative(self, a, data):
        b = data.draw(st.lists(st.floats(0, 10, allow_nan=False),
                               min_size=len(a), max_size=len(a)))
        d1 = chi_square(a, b)
        d2 = chi_square(b, a)
        assert d1 >= 0 and d1 == pytest.approx(d2, abs=1e-12)


def blob_face(seed, size=64):
    """Distinct blob layout per identity, reproducible."""
    rng = np.random.default_rng(seed)
    px = np.full((size, size), 120, np.uint8)
    for _ in range(6):
        y = int(rng.integers(4, size - 16))
        x = int(rng.integers(4, size - 16))
        w = int(rng.integers(6, 14))
        h = int(rng.integers(6, 14))
        val = int(rng.integers(0, 256))
        px[y : y + h, x : x + w] = val
    return px


def translated(px, dx, dy):
    return np.roll(np.roll(px, dy, axis=0), dx, axis=1)


class TestTrainPredict:
    def test_single_face_single_template(self):
        model = train(LbphParams(), [("a", GrayFrame.from_array(blob_face(0)))])
        assert len(model.templates) == 1

    def test_template_count(self):
        faces = [(str(i), GrayFrame.from_array(blob_face(i * 10 + j)))
                 for i in range(3) for j in range(5)]
        model = train(LbphParams(), faces)
        assert len(model.templates) == 15

    def test_empty_training_set(self):
        with pytest.raises(ValueError):
            train(LbphParams(), [])

    def test_untrained_predict(self):
        from carebot.faceid import LbphModel
        with pytest.raises(ModelStateError):
            predict(LbphModel(params=LbphParams()),
                    GrayFrame.from_array(blob_face(0)))

    def test_self_match_distance_zero(self):
        face = GrayFrame.from_array(blob_face(1))
        model = train(LbphParams(), [("me", face)])
        pred = predict(model, face)
        assert pred is not None and pred.label == "me" and pred.distance == 0.0

    def test_zero_threshold_rejects_nonzero_distance(self):
        params = LbphParams(unknown_threshold=1e-12)
        model = train(params, [("a", GrayFrame.from_array(blob_face(2)))])
        other = GrayFrame.from_array(blob_face(3))
        assert predict(model, other) is None

    def test_synthetic_identities_translated_queries(self):
        params = LbphParams(unknown_threshold=1e9)
        faces = []
        for ident in range(3):
            base = blob_face(100 + ident)
            for j in range(5):
                faces.append((str(ident),
                              GrayFrame.from_array(translated(base, j, 0))))
        model = train(params, faces)
        for ident in range(3):
            base = blob_face(100 + ident)
            query = GrayFrame.from_array(translated(base, 1, 1))
            pred = predict(model, query)
            assert pred is not None and pred.label == str(ident)

    def test_threshold_monotonicity(self):
        # raising the threshold never turns a labeled answer into Unknown
        faces = [("a", GrayFrame.from_array(blob_face(7)))]
        query = GrayFrame.from_array(blob_face(8))
        low = predict(train(LbphParams(unknown_threshold=5.0), faces), query)
        high = predict(train(LbphParams(unknown_threshold=500.0), faces), query)
        if low is not None:
            assert high is not None and high.label == low.label

    def test_predict_label_always_in_model(self):
        faces = [(l, GrayFrame.from_array(blob_face(i)))
                 for i, l in enumerate("abc")]
        model = train(LbphParams(unknown_threshold=1e9), faces)
        pred = predict(model, GrayFrame.from_array(blob_face(42)))
        assert pred.label in {"a", "b", "c"}

    def test_tie_break_insertion_order(self):
        face = GrayFrame.from_array(blob_face(9))
        model = train(LbphParams(), [("first", face), ("second", face)])
        pred = predict(model, face)
        assert pred.label == "first" and pred.distance == 0.0


class TestPersistence:
    def test_round_trip(self):
        model = train(LbphParams(), [("x", GrayFrame.from_array(blob_face(11)))])
        restored = load_model(save_model(model))
        query = GrayFrame.from_array(translated(blob_face(11), 2, 0))
        a = predict(model, query)
        b = predict(restored, query)
        assert (a is None) == (b is None)
        if a is not None:
            assert a.label == b.label and a.distance == pytest.approx(b.distance)

    def test_bad_version(self):
        with pytest.raises(ValueError):
            load_model({"v": 99, "params": {}, "templates": []})


class TestResize:
    def test_identity_resize(self):
        px = blob_face(12)
        assert (bilinear_resize(px, 64, 64) == px).all()
