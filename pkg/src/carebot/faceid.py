"""LBPH identity recognition.

Radius-1, 8-neighbor local binary patterns (bit i set iff neighbor_i >= center,
neighbors ordered TL, T, TR, R, BR, B, BL, L), pooled into per-cell 256-bin
histograms and matched by chi-square distance. A constant patch codes to 255
by the >= convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .frames import GrayFrame


class FaceSizeError(ValueError):
    pass


class ModelStateError(RuntimeError):
    pass


@dataclass
class LbphParams:
    radius: int = 1
    neighbors: int = 8
    grid_x: int = 8
    grid_y: int = 8
    face_size: int = 64
    unknown_threshold: float = 80.0

    def __post_init__(self):
        if self.radius != 1 or self.neighbors != 8:
            raise ValueError("only radius-1 / 8-neighbor LBP is supported")
        if self.grid_x < 1 or self.grid_y < 1 or self.face_size < 3:
            raise ValueError("bad grid/face_size")
        if self.unknown_threshold < 0:
            raise ValueError("unknown_threshold must be >= 0")


@dataclass
class FaceTemplate:
    label: str
    histogram: np.ndarray  # grid_x * grid_y * 256
    source: str = ""


@dataclass
class LbphModel:
    params: LbphParams
    templates: list = field(default_factory=list)


@dataclass
class Prediction:
    label: str
    distance: float


# (dy, dx) offsets: TL, T, TR, R, BR, B, BL, L — clockwise from top-left
_NEIGHBOR_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, 1),
                     (1, 1), (1, 0), (1, -1), (0, -1)]


def lbp_map(face: GrayFrame) -> np.ndarray:
    """8-bit LBP codes for every interior pixel; output is (h-2) x (w-2)."""
    if face.width < 3 or face.height < 3:
        raise FaceSizeError("face must be at least 3x3")
    px = face.pixels.astype(np.int16)
    center = px[1:-1, 1:-1]
    codes = np.zeros(center.shape, dtype=np.uint8)
    for bit, (dy, dx) in enumerate(_NEIGHBOR_OFFSETS):
        nb = px[1 + dy : px.shape[0] - 1 + dy, 1 + dx : px.shape[1] - 1 + dx]
        codes |= ((nb >= center).astype(np.uint8) << bit)
    return codes


def _cell_bounds(size: int, cells: int):
    # last cell absorbs the remainder
    base = size // cells
    bounds = []
    for i in range(cells):
        lo = i * base
        hi = (i + 1) * base if i < cells - 1 else size
        bounds.append((lo, hi))
    return bounds


def grid_histogram(codes: np.ndarray, params: LbphParams) -> np.ndarray:
    """Per-cell L1-normalized 256-bin histograms, concatenated row-major."""
    h, w = codes.shape
    blocks = []
    for y0, y1 in _cell_bounds(h, params.grid_y):
        for x0, x1 in _cell_bounds(w, params.grid_x):
            cell = codes[y0:y1, x0:x1]
            hist = np.bincount(cell.ravel(), minlength=256).astype(np.float64)
            total = hist.sum()
            if total > 0:
                hist /= total
            blocks.append(hist)
    return np.concatenate(blocks)


def chi_square(h1, h2) -> float:
    a = np.asarray(h1, dtype=np.float64)
    b = np.asarray(h2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("histogram length mismatch: %s vs %s" % (a.shape, b.shape))
    s = a + b
    mask = s > 0
    d = a - b
    return float(np.sum(d[mask] * d[mask] / s[mask]))


def bilinear_resize(pixels: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample to out_h x out_w, uint8; shared by train and predict."""
    h, w = pixels.shape
    src = pixels.astype(np.float64)
    # pixel-center alignment
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    out = top * (1 - fy) + bot * fy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _face_histogram(face: GrayFrame, params: LbphParams) -> np.ndarray:
    resized = bilinear_resize(face.pixels, params.face_size, params.face_size)
    codes = lbp_map(GrayFrame.from_array(resized))
    return grid_histogram(codes, params)


def train(params: LbphParams, labeled_faces) -> LbphModel:
    """One template per input image; no averaging across images."""
    labeled_faces = list(labeled_faces)
    if not labeled_faces:
        raise ValueError("training requires at least one labeled face")
    templates = []
    for i, (label, face) in enumerate(labeled_faces):
        templates.append(FaceTemplate(label=str(label),
                                      histogram=_face_histogram(face, params),
                                      source="train[%d]" % i))
    return LbphModel(params=params, templates=templates)


def predict(model: LbphModel, face: GrayFrame):
    """Nearest template by chi-square; None when beyond unknown_threshold.

    Ties break by template insertion order (strict < keeps the earliest).
    """
    if not model.templates:
        raise ModelStateError("predict on untrained model")
    query = _face_histogram(face, model.params)
    best = None
    best_d = None
    for t in model.templates:
        d = chi_square(query, t.histogram)
        if best_d is None or d < best_d:
            best, best_d = t, d
    if best_d > model.params.unknown_threshold:
        return None
    return Prediction(label=best.label, distance=best_d)


MODEL_VERSION = 1


def save_model(model: LbphModel) -> str:
    p = model.params
    return json.dumps({
        "v": MODEL_VERSION,
        "params": {"radius": p.radius, "neighbors": p.neighbors,
                   "grid_x": p.grid_x, "grid_y": p.grid_y,
                   "face_size": p.face_size,
                   "unknown_threshold": p.unknown_threshold},
        "templates": [{"label": t.label, "hist": t.histogram.tolist()}
                      for t in model.templates],
    })


def load_model(data) -> LbphModel:
    if isinstance(data, (str, bytes)):
        data = json.loads(data)
    if data.get("v") != MODEL_VERSION:
        raise ValueError("unsupported model version: %r" % data.get("v"))
    params = LbphParams(**data["params"])
    templates = [FaceTemplate(label=t["label"],
                              histogram=np.asarray(t["hist"], dtype=np.float64),
                              source="loaded")
                 for t in data["templates"]]
    return LbphModel(params=params, templates=templates)


def load_enrollment_dir(root: str, params: LbphParams = None) -> LbphModel:
    """Train from a directory of label/imageN.pgm files."""
    import os

    from .frames import load_image

    if params is None:
        params = LbphParams()
    labeled = []
    for label in sorted(os.listdir(root)):
        sub = os.path.join(root, label)
        if not os.path.isdir(sub):
            continue
        for name in sorted(os.listdir(sub)):
            labeled.append((label, load_image(os.path.join(sub, name))))
    return train(params, labeled)
