"""Synthetic frame generation and the frames-to-verdict gesture pipeline.

Used by the gesture CLI, tests, and the operator console's nod/shake
buttons (which exercise the real optical-flow path on synthesized bursts).
"""

from __future__ import annotations

import math

import numpy as np

from .flow import FlowParams, build_pyramid, lk_track, seed_landmarks
from .frames import GrayFrame
from .gesture import GestureParams, Trajectory, classify_gesture
from .vision import DetectionBox


def make_texture(width: int, height: int, seed: int = 7, pad: int = 16) -> np.ndarray:
    """Smoothed random texture with margins for translation, float64 [0,255]."""
    rng = np.random.default_rng(seed)
    big = rng.uniform(0, 255, size=(height + 2 * pad, width + 2 * pad))
    # light box blur keeps gradients finite but everywhere nonzero
    k = np.ones((3, 3)) / 9.0
    blurred = big.copy()
    for _ in range(2):
        padded = np.pad(blurred, 1, mode="edge")
        acc = np.zeros_like(blurred)
        for dy in range(3):
            for dx in range(3):
                acc += k[dy, dx] * padded[dy : dy + blurred.shape[0],
                                          dx : dx + blurred.shape[1]]
        blurred = acc
    return blurred


def shifted_frame(texture: np.ndarray, width: int, height: int,
                  dx: float, dy: float, pad: int = 16, t_ms: int = 0) -> GrayFrame:
    """Crop the texture at a subpixel offset (bilinear) into a frame."""
    x0 = pad + dx
    y0 = pad + dy
    ix, iy = int(math.floor(x0)), int(math.floor(y0))
    fx, fy = x0 - ix, y0 - iy
    block = texture[iy : iy + height + 1, ix : ix + width + 1]
    top = block[:-1, :-1] * (1 - fx) + block[:-1, 1:] * fx
    bot = block[1:, :-1] * (1 - fx) + block[1:, 1:] * fx
    out = top * (1 - fy) + bot * fy
    return GrayFrame.from_array(np.clip(np.rint(out), 0, 255).astype(np.uint8),
                                t_ms=t_ms)


def synthesize_gesture_frames(kind: str, size: int = 64, n_frames: int = 16,
                              amplitude: float = 6.0, cycles: float = 2.0,
                              duration_ms: int = 1600, seed: int = 7):
    """Sinusoidal head motion burst: vertical for a nod, horizontal for a shake,
    none for a static burst. Returns (frames, face_box)."""
    texture = make_texture(size, size, seed=seed)
    frames = []
    for i in range(n_frames):
        t = i * duration_ms // (n_frames - 1)
        phase = math.sin(2 * math.pi * cycles * i / (n_frames - 1))
        off = amplitude / 2.0 * phase
        dx, dy = 0.0, 0.0
        if kind == "nod":
            dy = off
        elif kind == "shake":
            dx = off
        frames.append(shifted_frame(texture, size, size, dx, dy, t_ms=t))
    box = DetectionBox(x=4, y=4, w=size - 8, h=size - 8, score=1.0, neighbors=1)
    return frames, box


def track_burst(frames, face_box, flow_params: FlowParams = None, grid: int = 5):
    """Seed landmarks in the face box and track them through the burst."""
    if flow_params is None:
        flow_params = FlowParams()
    points = seed_landmarks(face_box, grid=grid)
    trajectories = [Trajectory(point_id=i) for i in range(len(points))]
    for i, tr in enumerate(trajectories):
        x, y = points[i]
        tr.append(frames[0].t_ms, x, y, alive=True)
    prev_pyr = build_pyramid(frames[0], flow_params.pyramid_levels)
    current = list(points)
    alive = [True] * len(points)
    for frame in frames[1:]:
        next_pyr = build_pyramid(frame, flow_params.pyramid_levels)
        results = lk_track(prev_pyr, next_pyr, current, flow_params)
        for i, res in enumerate(results):
            alive[i] = alive[i] and res.alive
            if alive[i]:
                current[i] = (res.x, res.y)
            trajectories[i].append(frame.t_ms, current[i][0], current[i][1],
                                   alive=alive[i])
        prev_pyr = next_pyr
    return trajectories


def run_gesture_pipeline(frames, face_box, flow_params: FlowParams = None,
                         gesture_params: GestureParams = None):
    """Full frames-in, verdict-out path: pyramids, LK tracking, classification."""
    trajectories = track_burst(frames, face_box, flow_params=flow_params)
    return classify_gesture(trajectories, gesture_params or GestureParams())
