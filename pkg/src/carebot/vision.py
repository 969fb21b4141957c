"""Integral images and staged cascade face detection.

Feature values are weighted rectangle sums over the integral image,
normalized by the window standard deviation. Rect scaling uses
round-half-up so decisions are bit-stable; split thresholds are
compensated by scale**2 because raw rect sums grow with window area.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .frames import GrayFrame


class BoundsError(ValueError):
    pass


class CascadeFormatError(ValueError):
    pass


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class IntegralPair:
    sums: np.ndarray          # (h+1, w+1) int64, exclusive prefix
    squared_sums: np.ndarray  # same shape, over squared intensities

    @property
    def width(self) -> int:
        return self.sums.shape[1] - 1

    @property
    def height(self) -> int:
        return self.sums.shape[0] - 1


def compute_integral(frame: GrayFrame) -> IntegralPair:
    px = frame.pixels.astype(np.int64)
    sums = np.zeros((frame.height + 1, frame.width + 1), dtype=np.int64)
    sq = np.zeros_like(sums)
    sums[1:, 1:] = px.cumsum(axis=0).cumsum(axis=1)
    sq[1:, 1:] = (px * px).cumsum(axis=0).cumsum(axis=1)
    return IntegralPair(sums=sums, squared_sums=sq)


def rect_sum(ip: IntegralPair, x: int, y: int, w: int, h: int) -> int:
    if x < 0 or y < 0 or w < 0 or h < 0 or x + w > ip.width or y + h > ip.height:
        raise BoundsError("rect (%d,%d,%d,%d) outside %dx%d frame"
                          % (x, y, w, h, ip.width, ip.height))
    s = ip.sums
    return int(s[y + h, x + w] - s[y, x + w] - s[y + h, x] + s[y, x])


def _sq_rect_sum(ip: IntegralPair, x: int, y: int, w: int, h: int) -> int:
    s = ip.squared_sums
    return int(s[y + h, x + w] - s[y, x + w] - s[y + h, x] + s[y, x])


@dataclass
class WeightedRect:
    x: int
    y: int
    w: int
    h: int
    weight: float


@dataclass
class WeakClassifier:
    rects: list  # of WeightedRect, 2-3 entries
    split: float
    pass_value: float
    fail_value: float


@dataclass
class Stage:
    threshold: float
    weak: list  # of WeakClassifier


@dataclass
class Cascade:
    base_w: int
    base_h: int
    stages: list  # of Stage

    def validate(self):
        if not self.stages:
            raise CascadeFormatError("cascade has no stages")
        for st in self.stages:
            if not st.weak:
                raise CascadeFormatError("empty stage")
            for wc in st.weak:
                if not 2 <= len(wc.rects) <= 3:
                    raise CascadeFormatError("feature must have 2-3 rects")
                for r in wc.rects:
                    if (r.x < 0 or r.y < 0 or r.w <= 0 or r.h <= 0
                            or r.x + r.w > self.base_w or r.y + r.h > self.base_h):
                        raise CascadeFormatError("rect outside base window")


@dataclass
class DetectionBox:
    x: int
    y: int
    w: int
    h: int
    score: float
    neighbors: int


@dataclass
class DetectParams:
    scale_factor: float = 1.1
    step: int = 1
    min_size: int = 0
    min_neighbors: int = 3


def load_cascade(data) -> Cascade:
    """Parse the canonical cascade JSON (dict or JSON string)."""
    if isinstance(data, (str, bytes)):
        data = json.loads(data)
    try:
        bw, bh = data["base_window"]
        stages = []
        for s in data["stages"]:
            weak = []
            for wk in s["weak"]:
                rects = [WeightedRect(r[0], r[1], r[2], r[3], float(r[4]))
                         for r in wk["rects"]]
                weak.append(WeakClassifier(rects=rects, split=float(wk["split"]),
                                           pass_value=float(wk["pass"]),
                                           fail_value=float(wk["fail"])))
            stages.append(Stage(threshold=float(s["threshold"]), weak=weak))
    except (KeyError, TypeError, IndexError) as e:
        raise CascadeFormatError("malformed cascade JSON: %r" % (e,)) from None
    c = Cascade(base_w=int(bw), base_h=int(bh), stages=stages)
    c.validate()
    return c


def dump_cascade(cascade: Cascade) -> dict:
    return {
        "base_window": [cascade.base_w, cascade.base_h],
        "stages": [
            {"threshold": st.threshold,
             "weak": [{"rects": [[r.x, r.y, r.w, r.h, r.weight] for r in wc.rects],
                       "split": wc.split, "pass": wc.pass_value, "fail": wc.fail_value}
                      for wc in st.weak]}
            for st in cascade.stages
        ],
    }


def window_sigma(ip: IntegralPair, x: int, y: int, w: int, h: int) -> float:
    area = w * h
    mean = rect_sum(ip, x, y, w, h) / area
    mean_sq = _sq_rect_sum(ip, x, y, w, h) / area
    sigma = math.sqrt(max(mean_sq - mean * mean, 0.0))
    return sigma if sigma >= 1.0 else 1.0


def eval_window(cascade: Cascade, ip: IntegralPair, x: int, y: int, scale: float):
    """Run the staged classifier at one window; returns (accepted, score).

    score is the last evaluated stage sum (the final-stage margin when
    accepted, the rejecting stage's sum otherwise).
    """
    win_w = round_half_up(cascade.base_w * scale)
    win_h = round_half_up(cascade.base_h * scale)
    if x < 0 or y < 0 or x + win_w > ip.width or y + win_h > ip.height:
        raise BoundsError("window (%d,%d) scale %.3f outside frame" % (x, y, scale))
    sigma = window_sigma(ip, x, y, win_w, win_h)
    scale_sq = scale * scale
    total = 0.0
    for stage in cascade.stages:
        total = 0.0
        for wc in stage.weak:
            fval = 0.0
            for r in wc.rects:
                rx = x + round_half_up(r.x * scale)
                ry = y + round_half_up(r.y * scale)
                rw = round_half_up(r.w * scale)
                rh = round_half_up(r.h * scale)
                fval += r.weight * rect_sum(ip, rx, ry, rw, rh)
            if fval / sigma >= wc.split * scale_sq:
                total += wc.pass_value
            else:
                total += wc.fail_value
        if total < stage.threshold:
            return False, total
    return True, total


def _iou(a, b) -> float:
    ax, ay, aw, ah = a[:4]
    bx, by, bw, bh = b[:4]
    ix = max(0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def group_detections(raw, min_neighbors: int):
    """Transitive IoU>=0.5 clustering of raw (x,y,w,h,score) hits; mean box per cluster."""
    n = len(raw)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if _iou(raw[i], raw[j]) >= 0.5:
                parent[find(i)] = find(j)

    clusters = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(raw[i])

    boxes = []
    for members in clusters.values():
        if len(members) < min_neighbors:
            continue
        xs = [m[0] for m in members]
        ys = [m[1] for m in members]
        ws = [m[2] for m in members]
        hs = [m[3] for m in members]
        scores = [m[4] for m in members]
        boxes.append(DetectionBox(
            x=round_half_up(sum(xs) / len(members)),
            y=round_half_up(sum(ys) / len(members)),
            w=round_half_up(sum(ws) / len(members)),
            h=round_half_up(sum(hs) / len(members)),
            score=sum(scores) / len(members),
            neighbors=len(members),
        ))
    boxes.sort(key=lambda b: -b.score)
    return boxes


def scan_windows(cascade: Cascade, frame: GrayFrame, params: DetectParams):
    """Multi-scale scan; returns raw accepted (x, y, w, h, score) tuples."""
    ip = compute_integral(frame)
    raw = []
    scale = 1.0
    while True:
        win_w = round_half_up(cascade.base_w * scale)
        win_h = round_half_up(cascade.base_h * scale)
        if win_w > frame.width or win_h > frame.height:
            break
        if win_w >= params.min_size and win_h >= params.min_size:
            stride = max(1, round_half_up(params.step * scale))
            for y in range(0, frame.height - win_h + 1, stride):
                for x in range(0, frame.width - win_w + 1, stride):
                    accepted, score = eval_window(cascade, ip, x, y, scale)
                    if accepted:
                        raw.append((x, y, win_w, win_h, score))
        scale *= params.scale_factor
    return raw


def detect_faces(cascade: Cascade, frame: GrayFrame, params: DetectParams = None):
    if params is None:
        params = DetectParams()
    if frame.width < cascade.base_w or frame.height < cascade.base_h:
        return []
    raw = scan_windows(cascade, frame, params)
    return group_detections(raw, params.min_neighbors)
