"""Head-gesture classification from tracked point trajectories.

The median displacement path over live points is reduced to per-axis
amplitude and reversal counts; vertical dominance means a nod, horizontal
a shake. A 0.5 px velocity dead-band keeps sensor noise from
manufacturing reversals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VELOCITY_DEADBAND_PX = 0.5


class InsufficientDataError(ValueError):
    pass


@dataclass
class GestureParams:
    window_ms: int = 1500
    min_amplitude: float = 4.0
    min_reversals: int = 2
    axis_ratio: float = 2.0
    min_live_fraction: float = 0.5

    def __post_init__(self):
        if min(self.window_ms, self.min_amplitude, self.min_reversals,
               self.min_live_fraction) <= 0:
            raise ValueError("gesture params must be positive")
        if self.axis_ratio <= 1:
            raise ValueError("axis_ratio must be > 1")


@dataclass
class TrajectorySample:
    t: int
    x: float
    y: float
    alive: bool = True


@dataclass
class Trajectory:
    point_id: int
    samples: list = field(default_factory=list)

    def append(self, t: int, x: float, y: float, alive: bool = True):
        if self.samples:
            last = self.samples[-1]
            if t <= last.t:
                raise ValueError("timestamps must be strictly increasing")
            if not last.alive and alive:
                alive = False  # dead tracks stay dead
        self.samples.append(TrajectorySample(t=t, x=x, y=y, alive=alive))


@dataclass
class GestureVerdict:
    kind: str  # "nod" | "shake" | "none"
    confidence: float
    window: tuple  # (t_start, t_end)

    def to_dict(self):
        return {"kind": self.kind, "confidence": self.confidence,
                "window": [self.window[0], self.window[1]]}


def _count_reversals(path: np.ndarray) -> int:
    steps = np.diff(path)
    steps = steps[np.abs(steps) >= VELOCITY_DEADBAND_PX]
    if steps.size < 2:
        return 0
    signs = np.sign(steps)
    return int(np.sum(signs[1:] != signs[:-1]))


def classify_gesture(trajectories, params: GestureParams = None) -> GestureVerdict:
    if params is None:
        params = GestureParams()
    all_ts = sorted({s.t for tr in trajectories for s in tr.samples})
    if not all_ts or all_ts[-1] - all_ts[0] < params.window_ms:
        raise InsufficientDataError("trajectories span less than %d ms"
                                    % params.window_ms)
    t_end = all_ts[-1]
    t_start = t_end - params.window_ms
    window_ts = [t for t in all_ts if t >= t_start]
    verdict_window = (window_ts[0], t_end)

    # points alive at every sample of the window contribute to the median path
    live = []
    for tr in trajectories:
        by_t = {s.t: s for s in tr.samples}
        samples = [by_t.get(t) for t in window_ts]
        if all(s is not None and s.alive for s in samples):
            live.append(samples)
    if not trajectories or len(live) / len(trajectories) < params.min_live_fraction:
        return GestureVerdict(kind="none", confidence=0.0, window=verdict_window)

    # median over points of displacement from each point's window-start position
    dx = np.array([[s.x - samples[0].x for s in samples] for samples in live])
    dy = np.array([[s.y - samples[0].y for s in samples] for samples in live])
    med_x = np.median(dx, axis=0)
    med_y = np.median(dy, axis=0)

    amp_x = float(med_x.max() - med_x.min())
    amp_y = float(med_y.max() - med_y.min())
    rev_x = _count_reversals(med_x)
    rev_y = _count_reversals(med_y)

    eps = 1e-12
    nod_ok = (amp_y >= params.min_amplitude
              and amp_y / max(amp_x, eps) >= params.axis_ratio
              and rev_y >= params.min_reversals)
    shake_ok = (amp_x >= params.min_amplitude
                and amp_x / max(amp_y, eps) >= params.axis_ratio
                and rev_x >= params.min_reversals)
    if nod_ok and shake_ok:
        nod_ok = amp_y >= amp_x
        shake_ok = not nod_ok
    if nod_ok:
        conf = min(1.0, amp_y / (2 * params.min_amplitude))
        return GestureVerdict(kind="nod", confidence=conf, window=verdict_window)
    if shake_ok:
        conf = min(1.0, amp_x / (2 * params.min_amplitude))
        return GestureVerdict(kind="shake", confidence=conf, window=verdict_window)
    return GestureVerdict(kind="none", confidence=0.0, window=verdict_window)
