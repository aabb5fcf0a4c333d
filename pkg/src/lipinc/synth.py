"""Procedural toy clips with exact landmark ground truth.

A cartoon face opens and closes its mouth on a smooth periodic trajectory.
Real-mode clips keep one appearance (lip color, teeth bar) for the whole
clip, so frames with similar mouth openness look alike both locally and
globally. Fake-mode clips inject per-frame color jitter, teeth-bar jitter,
and appearance swaps between similar-openness frames, breaking exactly the
consistency the detector relies on.

All 68 landmarks are computed analytically from the scripted geometry, and
each frame ships an oracle record with the numbers used to draw it.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import IOFailure
from .manifest import ClipManifest, FrameRecord, save_manifest

# rendering keeps every channel inside this range so that frame-difference
# residuals of quantized pixels stay exactly representable in float64
PIX_LO = 0.02
PIX_HI = 0.98


@dataclass(frozen=True)
class SynthSpec:
    frames: int = 60
    fps: float = 25.0
    image_size: tuple[int, int] = (128, 128)  # (H, W)
    open_amplitude: float = 0.109   # max inner-lip gap, fraction of H
    open_period: float = 24.0       # frames per open/close cycle
    yaw_ratio: float = 1.0          # left/right jaw distance ratio at the nose line
    hue_sigma: float = 0.06         # fake: per-frame lip/teeth color jitter
    teeth_sigma: float = 0.35       # fake: per-frame teeth-bar geometry jitter
    swap_prob: float = 0.5          # fake: chance a frame swaps looks with a similar-openness frame
    seed: int = 0


# hexagon on the unit circle whose coordinate sums cancel exactly in floats
_HEX_X = np.array([1.0, 0.5, -0.5, -1.0, -0.5, 0.5])
_HEX_Y = np.array([0.0, 1.0, 1.0, 0.0, -1.0, -1.0]) * (math.sqrt(3.0) / 2.0)


def _clip_rng(seed, clip_id):
    digest = hashlib.sha256(f"{seed}:{clip_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _gap(t, spec, height):
    amp = spec.open_amplitude * height
    phase = 2.0 * math.pi * t / spec.open_period
    return amp * 0.5 * (1.0 - math.cos(phase))


def _face_layout(spec):
    h, w = spec.image_size
    return {
        "cx": w / 2.0,
        "face_cy": 0.52 * h,
        "face_rx": 0.41 * w,
        "face_ry": 0.47 * h,
        "eye_y": 0.375 * h,
        "eye_dx": 0.164 * w,
        "eye_ring_r": 0.047 * w,
        "eye_ball_r": 0.058 * w,
        "brow_y": 0.285 * h,
        "nose_y": 0.5625 * h,
        "nose_half": 0.0625 * w,
        "jaw_d": 0.39 * w,
        "mouth_cy": 0.75 * h,
        "outer_half_w": 0.203 * w,
        "lip_thick": 0.042 * h,
        "inner_half_w": 0.156 * w,
    }


def _landmarks(t, spec, lay):
    """Analytic 68-point annotation for frame t; also returns the geometry."""
    cx = lay["cx"]
    pts = np.zeros((68, 2), dtype=np.float64)

    # jaw 0-16 on the face oval, chin at the bottom
    for k in range(17):
        ang = math.radians(170.0 - 10.0 * k)
        pts[k] = (cx + lay["face_rx"] * math.cos(ang), lay["face_cy"] + lay["face_ry"] * math.sin(ang))
    # side jaw points at the nose line carry the scripted yaw asymmetry
    pts[2] = (cx - spec.yaw_ratio * lay["jaw_d"], lay["nose_y"])
    pts[14] = (cx + lay["jaw_d"], lay["nose_y"])

    # brows 17-26
    for k in range(5):
        off = (k - 2) / 2.0
        pts[17 + k] = (cx - lay["eye_dx"] + off * 1.6 * lay["eye_ring_r"], lay["brow_y"] - 1.5 * abs(off))
        pts[22 + k] = (cx + lay["eye_dx"] + off * 1.6 * lay["eye_ring_r"], lay["brow_y"] - 1.5 * abs(off))

    # nose bridge 27-30 and base 31-35
    h = spec.image_size[0]
    for k in range(4):
        pts[27 + k] = (cx, (0.40 + 0.05 * k) * h)
    for k in range(5):
        pts[31 + k] = (cx + (k - 2) * lay["nose_half"] / 2.0, lay["nose_y"])

    # eyes 36-41 (left) and 42-47 (right): hexagon centroids land exactly on the centers
    r = lay["eye_ring_r"]
    for k in range(6):
        pts[36 + k] = (cx - lay["eye_dx"] + r * _HEX_X[k], lay["eye_y"] + r * _HEX_Y[k])
        pts[42 + k] = (cx + lay["eye_dx"] + r * _HEX_X[k], lay["eye_y"] + r * _HEX_Y[k])

    gap = _gap(t, spec, h)
    amp = spec.open_amplitude * h
    inner_w = lay["inner_half_w"] * (0.8 + 0.2 * (gap / amp if amp > 0 else 0.0))
    outer_h = gap / 2.0 + 1.6 * lay["lip_thick"]
    my = lay["mouth_cy"]

    # outer lip 48-59 on the outer ellipse
    outer_angles = [180, 150, 120, 90, 60, 30, 0, -30, -60, -90, -120, -150]
    for k, deg in enumerate(outer_angles):
        a = math.radians(deg)
        pts[48 + k] = (cx + lay["outer_half_w"] * math.cos(a), my - outer_h * math.sin(a))

    # inner lip 60-67; 63/67 sit on the vertical mid-line so their distance
    # is exactly the scripted gap
    hh = gap / 2.0
    inner_rel = [
        (-inner_w, 0.0),
        (-0.6 * inner_w, -0.8 * hh),
        (-0.25 * inner_w, -0.95 * hh),
        (0.0, -hh),
        (inner_w, 0.0),
        (0.6 * inner_w, 0.8 * hh),
        (0.25 * inner_w, 0.95 * hh),
        (0.0, hh),
    ]
    for k, (dx, dy) in enumerate(inner_rel):
        pts[60 + k] = (cx + dx, my + dy)

    geometry = {
        "gap": gap,
        "inner_half_w": inner_w,
        "outer_h": outer_h,
        "eye_distance": 2.0 * lay["eye_dx"],
    }
    return pts, geometry


def _base_appearance(rng):
    """Clip-level appearance constants, drawn once per clip."""
    tint = rng.uniform(-0.04, 0.04, size=3)
    return {
        "skin": np.array([0.86, 0.70, 0.58]) + tint,
        "lip": np.array([0.62, 0.22, 0.24]) + rng.uniform(-0.05, 0.05, size=3),
        "cavity": np.array([0.16, 0.06, 0.08]),
        "teeth": np.array([0.92, 0.89, 0.83]) * rng.uniform(0.94, 1.0),
        "teeth_w_factor": rng.uniform(0.62, 0.78),
        "teeth_h_factor": rng.uniform(0.42, 0.55),
    }


def _plan_appearance(spec, mode, rng, gaps):
    """Per-frame appearance schedule; fake mode jitters and swaps frames."""
    base = _base_appearance(rng)
    per_frame = []
    for _ in range(spec.frames):
        app = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in base.items()}
        if mode == "fake":
            app["lip"] = app["lip"] + rng.normal(0.0, spec.hue_sigma, size=3)
            app["teeth"] = app["teeth"] * max(0.3, 1.0 + rng.normal(0.0, 2.0 * spec.hue_sigma))
            app["teeth_w_factor"] *= max(0.2, 1.0 + rng.normal(0.0, spec.teeth_sigma))
            app["teeth_h_factor"] *= max(0.2, 1.0 + rng.normal(0.0, spec.teeth_sigma))
        per_frame.append(app)

    if mode == "fake" and spec.swap_prob > 0:
        amp = spec.open_amplitude * spec.image_size[0]
        min_sep = max(2, int(spec.open_period / 3))
        swapped = set()
        for i in range(spec.frames):
            if i in swapped or rng.random() >= spec.swap_prob:
                continue
            best = None
            for j in range(spec.frames):
                if j == i or j in swapped or abs(j - i) < min_sep:
                    continue
                diff = abs(gaps[j] - gaps[i])
                if diff <= 0.15 * amp and (best is None or diff < best[0]):
                    best = (diff, j)
            if best is not None:
                j = best[1]
                per_frame[i], per_frame[j] = per_frame[j], per_frame[i]
                swapped.update((i, j))
    return per_frame


def _ellipse_mask(xx, yy, cx, cy, a, b):
    if a <= 0 or b <= 0:
        return np.zeros(xx.shape, dtype=bool)
    return ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2 <= 1.0


def _render(t, spec, lay, geometry, app):
    h, w = spec.image_size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.empty((h, w, 3), dtype=np.float64)
    img[:] = (0.78, 0.80, 0.84)

    cx, fcy = lay["cx"], lay["face_cy"]
    img[_ellipse_mask(xx, yy, cx, fcy, lay["face_rx"], lay["face_ry"])] = app["skin"]

    # brows
    for side in (-1, 1):
        bx = cx + side * lay["eye_dx"]
        brow = (np.abs(xx - bx) <= 1.8 * lay["eye_ring_r"]) & (np.abs(yy - lay["brow_y"]) <= 1.6)
        img[brow] = (0.24, 0.18, 0.12)

    # eyes: white ball, iris, pupil
    for side in (-1, 1):
        ex = cx + side * lay["eye_dx"]
        img[_ellipse_mask(xx, yy, ex, lay["eye_y"], lay["eye_ball_r"], 0.8 * lay["eye_ball_r"])] = (0.95, 0.95, 0.95)
        img[_ellipse_mask(xx, yy, ex, lay["eye_y"], 0.45 * lay["eye_ball_r"], 0.45 * lay["eye_ball_r"])] = (0.30, 0.22, 0.14)
        img[_ellipse_mask(xx, yy, ex, lay["eye_y"], 0.18 * lay["eye_ball_r"], 0.18 * lay["eye_ball_r"])] = (0.05, 0.05, 0.05)

    # nose shading
    nose = (np.abs(xx - cx) <= 1.2) & (yy >= 0.40 * h) & (yy <= lay["nose_y"])
    img[nose] = app["skin"] * 0.82

    my = lay["mouth_cy"]
    outer = _ellipse_mask(xx, yy, cx, my, lay["outer_half_w"], geometry["outer_h"])
    img[outer] = app["lip"]

    gap = geometry["gap"]
    if gap > 0:
        inner = _ellipse_mask(xx, yy, cx, my, geometry["inner_half_w"], gap / 2.0)
        img[inner] = app["cavity"]
        tw = geometry["inner_half_w"] * 2.0 * app["teeth_w_factor"]
        th = gap * app["teeth_h_factor"]
        if tw > 0 and th > 0:
            teeth = inner & (np.abs(xx - cx) <= tw / 2.0) & (yy <= my - gap / 2.0 + th)
            img[teeth] = app["teeth"]

    return np.clip(img, PIX_LO, PIX_HI).astype(np.float32)


def render_frame(t, spec: SynthSpec, mode: str):
    """Render one frame of the clip keyed by ``spec.seed``.

    Returns (FrameRecord, oracle) where the oracle holds the exact scripted
    geometry and appearance for the frame.
    """
    if not 0 <= t < spec.frames:
        raise ValueError(f"frame {t} outside clip of {spec.frames} frames")
    if mode not in ("real", "fake"):
        raise ValueError(f"mode must be 'real' or 'fake', got {mode!r}")
    lay = _face_layout(spec)
    h = spec.image_size[0]
    gaps = [_gap(i, spec, h) for i in range(spec.frames)]
    rng = _clip_rng(spec.seed, f"single:{mode}")
    plan = _plan_appearance(spec, mode, rng, gaps)
    pts, geometry = _landmarks(t, spec, lay)
    image = _render(t, spec, lay, geometry, plan[t])
    oracle = dict(geometry)
    oracle["lip_rgb"] = tuple(float(v) for v in plan[t]["lip"])
    oracle["teeth_w_factor"] = float(plan[t]["teeth_w_factor"])
    oracle["teeth_h_factor"] = float(plan[t]["teeth_h_factor"])
    return FrameRecord(image=image, landmarks=pts, index=t), oracle


def generate_clip(spec: SynthSpec, mode: str, clip_id: str):
    """Full clip plus per-frame oracle records; label 0 for fake, 1 for real."""
    if mode not in ("real", "fake"):
        raise ValueError(f"mode must be 'real' or 'fake', got {mode!r}")
    if spec.frames < 2:
        raise ValueError("a clip needs at least 2 frames")
    lay = _face_layout(spec)
    h = spec.image_size[0]
    gaps = [_gap(t, spec, h) for t in range(spec.frames)]
    rng = _clip_rng(spec.seed, clip_id)
    plan = _plan_appearance(spec, mode, rng, gaps)

    frames = []
    oracles = []
    for t in range(spec.frames):
        pts, geometry = _landmarks(t, spec, lay)
        image = _render(t, spec, lay, geometry, plan[t])
        frames.append(FrameRecord(image=image, landmarks=pts, index=t))
        rec = dict(geometry)
        rec["lip_rgb"] = tuple(float(v) for v in plan[t]["lip"])
        rec["teeth_w_factor"] = float(plan[t]["teeth_w_factor"])
        rec["teeth_h_factor"] = float(plan[t]["teeth_h_factor"])
        oracles.append(rec)
    label = 1 if mode == "real" else 0
    clip = ClipManifest(frames=tuple(frames), fps=spec.fps, label=label, clip_id=clip_id)
    return clip, oracles


def _split_of(seed, clip_ids):
    """Deterministic 70/15/15 split over one class, ordered by seeded hash."""
    ranked = sorted(clip_ids, key=lambda cid: hashlib.sha256(f"{seed}:split:{cid}".encode()).hexdigest())
    n = len(ranked)
    n_train = round(0.70 * n)
    n_val = round(0.15 * n)
    out = {}
    for pos, cid in enumerate(ranked):
        if pos < n_train:
            out[cid] = "train"
        elif pos < n_train + n_val:
            out[cid] = "val"
        else:
            out[cid] = "test"
    return out


def generate_dataset(n_clips: int, fake_ratio: float, spec: SynthSpec, out_dir) -> dict:
    """Write ``n_clips`` labeled clips plus an index with split assignments.

    The fake count is exact (round(n * ratio)); splits are stratified per
    class. Returns the index document (also written to index.json).
    """
    if n_clips < 2:
        raise ValueError("need at least 2 clips")
    if not 0.0 < fake_ratio < 1.0:
        raise ValueError("fake_ratio must be strictly between 0 and 1")
    n_fake = round(n_clips * fake_ratio)
    labels = [0] * n_fake + [1] * (n_clips - n_fake)
    _clip_rng(spec.seed, "label-order").shuffle(labels)

    out_dir = os.fspath(out_dir)
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create dataset dir {out_dir}: {exc}") from exc

    entries = []
    by_class = {0: [], 1: []}
    for i, label in enumerate(labels):
        cid = f"clip{i:04d}"
        mode = "real" if label == 1 else "fake"
        clip, _ = generate_clip(spec, mode, cid)
        clip_dir = os.path.join(out_dir, "clips", cid)
        try:
            manifest_path = save_manifest(clip, clip_dir)
        except OSError as exc:
            raise IOFailure(f"cannot write clip {cid}: {exc}") from exc
        entries.append({
            "clip_id": cid,
            "manifest": os.path.relpath(manifest_path, out_dir).replace(os.sep, "/"),
            "label": label,
        })
        by_class[label].append(cid)

    split = {}
    for label_ids in by_class.values():
        split.update(_split_of(spec.seed, label_ids))
    for entry in entries:
        entry["split"] = split[entry["clip_id"]]

    index = {
        "version": 1,
        "seed": spec.seed,
        "fake_ratio": fake_ratio,
        "frames_per_clip": spec.frames,
        "fps": spec.fps,
        "clips": entries,
    }
    try:
        with open(os.path.join(out_dir, "index.json"), "w", encoding="utf-8") as fh:
            json.dump(index, fh, sort_keys=True, indent=1)
    except OSError as exc:
        raise IOFailure(f"cannot write dataset index: {exc}") from exc
    return index


def load_index(path) -> dict:
    """Read a dataset index written by generate_dataset."""
    path = os.fspath(path)
    if os.path.isdir(path):
        path = os.path.join(path, "index.json")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IOFailure(f"cannot read dataset index {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IOFailure(f"malformed dataset index {path}: {exc}") from exc


def desk_spec(seed: int = 0, **overrides) -> SynthSpec:
    """Spec sized for fast tests; geometry and signal match the defaults."""
    fields = {"frames": 48, "image_size": (96, 96), **overrides}
    return replace(SynthSpec(seed=seed), **fields)
