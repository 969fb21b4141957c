import numpy as np
import pytest

from carebot.flow import (FlowParams, FlowSizeError, PyramidShapeError,
                          build_pyramid, lk_track, seed_landmarks)
from carebot.frames import GrayFrame
from carebot.synth import make_texture, shifted_frame
from carebot.vision import DetectionBox


def textured_frame(size=64, seed=7, dx=0.0, dy=0.0):
    return shifted_frame(make_texture(size, size, seed=seed), size, size, dx, dy)


class TestPyramid:
    def test_constant_preserved(self):
        frame = GrayFrame.from_array(np.full((16, 16), 80, np.uint8))
        for lvl in build_pyramid(frame, 3):
            assert np.allclose(lvl, 80 / 255.0)

    def test_4x4_hand_computed(self):
        px = np.arange(16, dtype=np.uint8).reshape(4, 4)
        pyr = build_pyramid(GrayFrame.from_array(px), 2)
        expected = np.array([[(0 + 1 + 4 + 5), (2 + 3 + 6 + 7)],
                             [(8 + 9 + 12 + 13), (10 + 11 + 14 + 15)]]) / 4 / 255
        assert np.allclose(pyr[1], expected)

    def test_random_matches_naive_oracle(self):
        rng = np.random.default_rng(0)
        px = rng.integers(0, 256, (64, 64), np.uint8)
        pyr = build_pyramid(GrayFrame.from_array(px), 4)
        ref = px.astype(np.float64) / 255.0
        for lvl in range(1, 4):
            h2, w2 = ref.shape[0] // 2, ref.shape[1] // 2
            down = np.zeros((h2, w2))
            for y in range(h2):
                for x in range(w2):
                    down[y, x] = ref[2 * y : 2 * y + 2, 2 * x : 2 * x + 2].mean()
            assert np.allclose(pyr[lvl], down)
            ref = down

    def test_too_small(self):
        with pytest.raises(FlowSizeError):
            build_pyramid(GrayFrame.from_array(np.zeros((3, 3), np.uint8)), 3)


def interior_points(size=64, margin=16, step=6):
    return [(float(x), float(y))
            for y in range(margin, size - margin, step)
            for x in range(margin, size - margin, step)]


class TestLkTrack:
    def test_zero_motion_fixed_point(self):
        frame = textured_frame()
        params = FlowParams()
        pyr = build_pyramid(frame, params.pyramid_levels)
        points = interior_points()
        results = lk_track(pyr, pyr, points, params)
        assert any(r.alive for r in results)
        for p, r in zip(points, results):
            if r.alive:
                assert abs(r.x - p[0]) <= params.epsilon * 2
                assert abs(r.y - p[1]) <= params.epsilon * 2

    @pytest.mark.parametrize("dx,dy", [(2, 0), (0, 2), (-3, 1), (3, 3)])
    def test_integer_translation_recovered(self, dx, dy):
        params = FlowParams()
        prev = textured_frame()
        next_ = textured_frame(dx=dx, dy=dy)
        prev_pyr = build_pyramid(prev, params.pyramid_levels)
        next_pyr = build_pyramid(next_, params.pyramid_levels)
        points = interior_points()
        results = lk_track(prev_pyr, next_pyr, points, params)
        survivors = [(p, r) for p, r in zip(points, results) if r.alive]
        assert len(survivors) >= 0.5 * len(points)
        good = sum(1 for p, r in survivors
                   if abs((r.x - p[0]) + dx) <= 0.25
                   and abs((r.y - p[1]) + dy) <= 0.25)
        assert good >= 0.9 * len(survivors)

    def test_flat_region_kills_points(self):
        frame = GrayFrame.from_array(np.full((64, 64), 128, np.uint8))
        params = FlowParams()
        pyr = build_pyramid(frame, params.pyramid_levels)
        results = lk_track(pyr, pyr, interior_points(), params)
        assert all(not r.alive for r in results)

    def test_pyramid_shape_mismatch(self):
        params = FlowParams()
        a = build_pyramid(textured_frame(64), params.pyramid_levels)
        b = build_pyramid(textured_frame(32), params.pyramid_levels)
        with pytest.raises(PyramidShapeError):
            lk_track(a, b, [(20.0, 20.0)], params)


class TestSeedLandmarks:
    def test_grid2_forced_positions(self):
        box = DetectionBox(x=0, y=0, w=100, h=100, score=0, neighbors=1)
        pts = seed_landmarks(box, grid=2)
        assert sorted(pts) == [(20.0, 20.0), (20.0, 80.0),
                               (80.0, 20.0), (80.0, 80.0)]

    def test_grid1_center(self):
        box = DetectionBox(x=10, y=20, w=40, h=60, score=0, neighbors=1)
        assert seed_landmarks(box, grid=1) == [(30.0, 50.0)]

    def test_degenerate_box(self):
        box = DetectionBox(x=0, y=0, w=0, h=10, score=0, neighbors=1)
        assert seed_landmarks(box) == []

    def test_grid5_all_strictly_inside_random_boxes(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            x, y = rng.integers(0, 100, 2)
            w, h = rng.integers(1, 200, 2)
            box = DetectionBox(x=int(x), y=int(y), w=int(w), h=int(h),
                               score=0, neighbors=1)
            pts = seed_landmarks(box, grid=5)
            assert len(pts) == 25
            for (px, py) in pts:
                assert x < px < x + w and y < py < y + h
