"""Mouth frame selection and sequence construction.

Selects L adjacent open-mouth frames (the window maximizing the minimum
normalized lip gap) plus G similar-pose frames from the rest of the clip,
crops the mouth region from each, and builds the color sequence alongside
its frame-difference structure sequence.

All geometry is normalized by the inter-ocular distance, so the measures
are invariant to uniform scaling and translation of the landmarks.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from . import binio
from .errors import (
    DegenerateGeometryError,
    InsufficientGlobalError,
    NoOpenMouthError,
    TooShortError,
)
from .manifest import ClipManifest, FrameRecord

BUNDLE_MAGIC = b"LPSQ"
BUNDLE_VERSION = 1


@dataclass(frozen=True)
class ExtractConfig:
    local_count: int = 5          # L, adjacent open-mouth frames
    global_count: int = 3         # G, similar-pose frames from the rest
    min_gap_seconds: float = 0.09
    crop_h: int = 64
    crop_w: int = 144
    open_threshold: float = 0.05  # normalized lip gap floor
    pose_weights: tuple[float, float, float, float] = (1.0, 1.0, 0.5, 0.5)

    def __post_init__(self):
        if self.local_count < 2:
            raise ValueError("local_count must be >= 2")
        if self.global_count < 1:
            raise ValueError("global_count must be >= 1")
        if self.min_gap_seconds < 0:
            raise ValueError("min_gap_seconds must be >= 0")
        if self.crop_h <= 0 or self.crop_w <= 0:
            raise ValueError("crop dimensions must be positive")
        if self.open_threshold < 0:
            raise ValueError("open_threshold must be >= 0")
        if len(self.pose_weights) != 4:
            raise ValueError("pose_weights needs 4 entries")


#: reduced-resolution profile used by the fast test/benchmark path
DESK_EXTRACT = ExtractConfig(crop_h=32, crop_w=72)


@dataclass(frozen=True)
class PoseDescriptor:
    h: float           # normalized inner-lip height
    w: float           # normalized inner-lip width
    yaw_proxy: float   # nose-to-jaw distance ratio (left over right)
    roll_proxy: float  # eye-line angle, radians

    def as_array(self):
        return np.array([self.h, self.w, self.yaw_proxy, self.roll_proxy])


@dataclass(frozen=True)
class MouthSequences:
    color: np.ndarray             # (N, crop_h, crop_w, 3) float64 in [0, 1]
    structure: np.ndarray         # (N-1, crop_h, crop_w, 3) float64 in [-1, 1]
    local_indices: tuple[int, ...]
    global_indices: tuple[int, ...]

    @property
    def frame_count(self):
        return self.color.shape[0]


def inter_ocular_distance(landmarks) -> float:
    """Distance between the two eye-landmark centroids (the scale normalizer)."""
    lm = np.asarray(landmarks, dtype=np.float64)
    left = lm[36:42].mean(axis=0)
    right = lm[42:48].mean(axis=0)
    return float(math.hypot(right[0] - left[0], right[1] - left[1]))


def openness(landmarks) -> float:
    """Normalized lip gap: |p63 - p67| over the inter-ocular distance."""
    lm = np.asarray(landmarks, dtype=np.float64)
    scale = inter_ocular_distance(lm)
    if scale == 0.0:
        raise DegenerateGeometryError("inter-ocular distance is zero")
    gap = math.hypot(lm[63, 0] - lm[67, 0], lm[63, 1] - lm[67, 1])
    return gap / scale


def pose_descriptor(landmarks) -> PoseDescriptor:
    """Lip gap, lip width, and head-orientation proxies for pose matching."""
    lm = np.asarray(landmarks, dtype=np.float64)
    scale = inter_ocular_distance(lm)
    if scale == 0.0:
        raise DegenerateGeometryError("inter-ocular distance is zero")
    h = math.hypot(lm[63, 0] - lm[67, 0], lm[63, 1] - lm[67, 1]) / scale
    w = math.hypot(lm[60, 0] - lm[64, 0], lm[60, 1] - lm[64, 1]) / scale
    right_jaw = math.hypot(lm[33, 0] - lm[14, 0], lm[33, 1] - lm[14, 1])
    if right_jaw == 0.0:
        raise DegenerateGeometryError("nose-to-jaw reference distance is zero")
    yaw = math.hypot(lm[33, 0] - lm[2, 0], lm[33, 1] - lm[2, 1]) / right_jaw
    left_eye = lm[36:42].mean(axis=0)
    right_eye = lm[42:48].mean(axis=0)
    roll = math.atan2(right_eye[1] - left_eye[1], right_eye[0] - left_eye[0])
    return PoseDescriptor(h=h, w=w, yaw_proxy=yaw, roll_proxy=roll)


def select_local(clip: ClipManifest, cfg: ExtractConfig) -> list[int]:
    """Window of L consecutive frames maximizing the minimum openness.

    Ties go to the earliest start; the winning window's minimum must still
    reach the openness threshold.
    """
    n = len(clip.frames)
    length = cfg.local_count
    if n < length:
        raise TooShortError(f"clip has {n} frames, selection needs {length}")
    values = [openness(f.landmarks) for f in clip.frames]

    # sliding-window minimum via monotonic deque
    best_start, best_min = 0, -math.inf
    dq: deque[int] = deque()
    for i, v in enumerate(values):
        while dq and values[dq[-1]] >= v:
            dq.pop()
        dq.append(i)
        start = i - length + 1
        if start < 0:
            continue
        if dq[0] < start:
            dq.popleft()
        window_min = values[dq[0]]
        if window_min > best_min:
            best_min, best_start = window_min, start
    if best_min < cfg.open_threshold:
        raise NoOpenMouthError(
            f"no {length}-frame window keeps openness >= {cfg.open_threshold} "
            f"(best window minimum {best_min:.4f})"
        )
    return list(range(best_start, best_start + length))


def _pose_distance(desc, reference, weights):
    d = desc.as_array() - reference
    return float(math.sqrt(float(np.dot(weights, d * d))))


def select_global(clip: ClipManifest, local: list[int], cfg: ExtractConfig) -> list[int]:
    """G open-mouth frames outside the local window with poses closest to it.

    Candidates are scored by weighted Euclidean distance to the mean local
    pose and accepted greedily in ascending score order (ties to the earlier
    frame) while keeping every accepted pair at least min_gap_seconds apart.
    """
    local_set = set(local)
    weights = np.asarray(cfg.pose_weights, dtype=np.float64)
    reference = np.mean([pose_descriptor(clip.frames[p].landmarks).as_array() for p in local], axis=0)

    scored = []
    for p, frame in enumerate(clip.frames):
        if p in local_set:
            continue
        if openness(frame.landmarks) < cfg.open_threshold:
            continue
        desc = pose_descriptor(frame.landmarks)
        scored.append((_pose_distance(desc, reference, weights), frame.index, p))
    scored.sort()

    accepted: list[int] = []
    for _, idx, p in scored:
        if all(abs(idx - clip.frames[q].index) / clip.fps >= cfg.min_gap_seconds for q in accepted):
            accepted.append(p)
            if len(accepted) == cfg.global_count:
                break
    if len(accepted) < cfg.global_count:
        raise InsufficientGlobalError(
            f"only {len(accepted)} admissible similar-pose frames, need {cfg.global_count}"
        )
    return sorted(accepted)


def _bilinear_box_resize(img, box, out_h, out_w):
    """Sample an axis-aligned box of ``img`` onto an out_h x out_w grid."""
    y0, y1, x0, x1 = box
    h, w = img.shape[:2]
    ys = y0 + (np.arange(out_h, dtype=np.float64) + 0.5) * ((y1 - y0) / out_h) - 0.5
    xs = x0 + (np.arange(out_w, dtype=np.float64) + 0.5) * ((x1 - x0) / out_w) - 0.5
    yf = np.floor(ys)
    xf = np.floor(xs)
    wy = (ys - yf)[:, None, None]
    wx = (xs - xf)[None, :, None]
    yi0 = np.clip(yf.astype(np.int64), 0, h - 1)
    yi1 = np.clip(yi0 + 1, 0, h - 1)
    xi0 = np.clip(xf.astype(np.int64), 0, w - 1)
    xi1 = np.clip(xi0 + 1, 0, w - 1)
    img = np.asarray(img, dtype=np.float64)
    top = (1.0 - wx) * img[yi0][:, xi0] + wx * img[yi0][:, xi1]
    bot = (1.0 - wx) * img[yi1][:, xi0] + wx * img[yi1][:, xi1]
    return (1.0 - wy) * top + wy * bot


def crop_mouth(frame: FrameRecord, cfg: ExtractConfig, margin: float = 0.25) -> np.ndarray:
    """Crop the mouth landmark box (expanded by ``margin`` per side) and
    resize bilinearly to (crop_h, crop_w); returns float32 in [0, 1]."""
    lm = np.asarray(frame.landmarks, dtype=np.float64)[48:68]
    x0, x1 = float(lm[:, 0].min()), float(lm[:, 0].max())
    y0, y1 = float(lm[:, 1].min()), float(lm[:, 1].max())
    if x1 <= x0 or y1 <= y0:
        raise DegenerateGeometryError("mouth landmark box has zero area")
    dx, dy = margin * (x1 - x0), margin * (y1 - y0)
    h, w = frame.image.shape[:2]
    box = (max(y0 - dy, 0.0), min(y1 + dy, float(h)), max(x0 - dx, 0.0), min(x1 + dx, float(w)))
    if box[1] <= box[0] or box[3] <= box[2]:
        raise DegenerateGeometryError("mouth box falls outside the image")
    out = _bilinear_box_resize(frame.image, box, cfg.crop_h, cfg.crop_w)
    out = out.astype(np.float32)
    # flush sub-quantization dust so frame differences stay exact in float64
    out[out < 1e-6] = 0.0
    return out


def build_sequences(clip: ClipManifest, cfg: ExtractConfig) -> MouthSequences:
    """Select frames, crop mouths, and assemble the color/structure pair.

    Color holds the local window in temporal order followed by the global
    frames in ascending order; structure holds successive differences
    (structure[t] = color[t+1] - color[t]).
    """
    local = select_local(clip, cfg)
    global_ = select_global(clip, local, cfg)
    order = list(local) + list(global_)
    crops = [crop_mouth(clip.frames[p], cfg) for p in order]
    color = np.stack(crops).astype(np.float64)
    structure = color[1:] - color[:-1]
    return MouthSequences(
        color=color,
        structure=structure,
        local_indices=tuple(clip.frames[p].index for p in local),
        global_indices=tuple(clip.frames[p].index for p in global_),
    )


def save_bundle(path, seqs: MouthSequences, cfg: ExtractConfig, clip_id: str,
                fps: float, label=None) -> None:
    """Persist a sequence bundle (float32 arrays, config echo, indices)."""
    header = {
        "clip_id": clip_id,
        "fps": fps,
        "label": label,
        "config": asdict(cfg),
        "local_indices": list(seqs.local_indices),
        "global_indices": list(seqs.global_indices),
    }
    binio.write_container(path, BUNDLE_MAGIC, BUNDLE_VERSION, header,
                          [("color", seqs.color), ("structure", seqs.structure)])


def load_bundle(path):
    """Load a sequence bundle; returns (MouthSequences, metadata dict).

    Arrays come back float32 as stored, so the structure sequence is exact
    only to storage precision.
    """
    header, arrays = binio.read_container(path, BUNDLE_MAGIC, BUNDLE_VERSION)
    seqs = MouthSequences(
        color=arrays["color"],
        structure=arrays["structure"],
        local_indices=tuple(header["local_indices"]),
        global_indices=tuple(header["global_indices"]),
    )
    meta = {k: header[k] for k in ("clip_id", "fps", "label", "config")}
    return seqs, meta
