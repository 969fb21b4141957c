"""Pyramidal Lucas-Kanade point tracking and landmark seeding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import GrayFrame


class FlowSizeError(ValueError):
    pass


class PyramidShapeError(ValueError):
    pass


@dataclass
class FlowParams:
    window: int = 15
    pyramid_levels: int = 3
    max_iterations: int = 20
    epsilon: float = 0.01
    min_eigen: float = 1e-4  # on [0,1]-normalized gradients, per-pixel averaged

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        if self.pyramid_levels < 1:
            raise ValueError("need at least one pyramid level")


@dataclass
class TrackResult:
    x: float
    y: float
    alive: bool


def build_pyramid(frame: GrayFrame, levels: int):
    """Level 0 is the input; each next level is a 2x2 box average (floor dims).

    Levels are float64 arrays on [0,1] so downsampling keeps exact means.
    """
    min_dim = 1 << (levels - 1)
    if frame.width < min_dim or frame.height < min_dim:
        raise FlowSizeError("frame %dx%d too small for %d levels"
                            % (frame.width, frame.height, levels))
    levels_out = [frame.pixels.astype(np.float64) / 255.0]
    for _ in range(levels - 1):
        prev = levels_out[-1]
        h2, w2 = prev.shape[0] // 2, prev.shape[1] // 2
        trimmed = prev[: 2 * h2, : 2 * w2]
        down = (trimmed[0::2, 0::2] + trimmed[0::2, 1::2]
                + trimmed[1::2, 0::2] + trimmed[1::2, 1::2]) / 4.0
        levels_out.append(down)
    return levels_out


def _bilinear_patch(img: np.ndarray, cx: float, cy: float, half: int):
    """Sample a (2*half+1)^2 patch centered at subpixel (cx, cy); None if out of frame."""
    h, w = img.shape
    x0 = cx - half
    y0 = cy - half
    if x0 < 0 or y0 < 0 or x0 + 2 * half >= w - 1 or y0 + 2 * half >= h - 1:
        return None
    ix = int(np.floor(x0))
    iy = int(np.floor(y0))
    fx = x0 - ix
    fy = y0 - iy
    n = 2 * half + 2  # one extra row/col for interpolation
    block = img[iy : iy + n, ix : ix + n]
    top = block[:-1, :-1] * (1 - fx) + block[:-1, 1:] * fx
    bot = block[1:, :-1] * (1 - fx) + block[1:, 1:] * fx
    return top * (1 - fy) + bot * fy


def lk_track(prev_pyr, next_pyr, points, params: FlowParams):
    """Coarse-to-fine iterative LK; one TrackResult per input point."""
    if len(prev_pyr) != len(next_pyr):
        raise PyramidShapeError("pyramid depth mismatch")
    for a, b in zip(prev_pyr, next_pyr):
        if a.shape != b.shape:
            raise PyramidShapeError("pyramid level shape mismatch: %s vs %s"
                                    % (a.shape, b.shape))
    half = params.window // 2
    results = []
    for (px, py) in points:
        alive = True
        gx = gy = 0.0  # displacement estimate carried across levels
        for lvl in range(len(prev_pyr) - 1, -1, -1):
            scale = 1.0 / (1 << lvl)
            lx = px * scale
            ly = py * scale
            prev_img = prev_pyr[lvl]
            next_img = next_pyr[lvl]
            # template patch + gradients at the point in the previous frame
            patch = _bilinear_patch(prev_img, lx, ly, half + 1)
            if patch is None:
                if lvl > 0:
                    # window doesn't fit at this coarse level; start finer
                    gx *= 2.0
                    gy *= 2.0
                    continue
                alive = False
                break
            # central differences over the inner (2*half+1)^2 region
            ix = (patch[1:-1, 2:] - patch[1:-1, :-2]) / 2.0
            iy = (patch[2:, 1:-1] - patch[:-2, 1:-1]) / 2.0
            template = patch[1:-1, 1:-1]
            npix = template.size
            gxx = float(np.sum(ix * ix)) / npix
            gxy = float(np.sum(ix * iy)) / npix
            gyy = float(np.sum(iy * iy)) / npix
            trace_half = (gxx + gyy) / 2.0
            det = gxx * gyy - gxy * gxy
            min_eig = trace_half - np.sqrt(max(trace_half * trace_half - det, 0.0))
            if min_eig < params.min_eigen:
                if lvl > 0:
                    # weak texture at the coarse level only: skip, refine finer
                    gx *= 2.0
                    gy *= 2.0
                    continue
                alive = False
                break
            a11 = gxx * npix
            a12 = gxy * npix
            a22 = gyy * npix
            det_a = a11 * a22 - a12 * a12
            for _ in range(params.max_iterations):
                moved = _bilinear_patch(next_img, lx + gx, ly + gy, half + 1)
                if moved is None:
                    if lvl == 0:
                        alive = False
                    break
                diff = moved[1:-1, 1:-1] - template
                b1 = float(np.sum(diff * ix))
                b2 = float(np.sum(diff * iy))
                dx = -(a22 * b1 - a12 * b2) / det_a
                dy = -(a11 * b2 - a12 * b1) / det_a
                gx += dx
                gy += dy
                if dx * dx + dy * dy < params.epsilon * params.epsilon:
                    break
            if not alive:
                break
            if lvl > 0:
                gx *= 2.0
                gy *= 2.0
        if alive:
            nx, ny = px + gx, py + gy
            h0, w0 = next_pyr[0].shape
            if not (0 <= nx < w0 and 0 <= ny < h0):
                alive = False
            results.append(TrackResult(x=nx, y=ny, alive=alive))
        else:
            results.append(TrackResult(x=px, y=py, alive=False))
    return results


def seed_landmarks(box, grid: int = 5):
    """grid x grid lattice inset 20% from each edge of a detection box."""
    x, y, w, h = box.x, box.y, box.w, box.h
    if w <= 0 or h <= 0:
        return []
    x0 = x + 0.2 * w
    y0 = y + 0.2 * h
    span_x = 0.6 * w
    span_y = 0.6 * h
    points = []
    for j in range(grid):
        for i in range(grid):
            fx = 0.5 if grid == 1 else i / (grid - 1)
            fy = 0.5 if grid == 1 else j / (grid - 1)
            points.append((x0 + fx * span_x, y0 + fy * span_y))
    return points
