"""Clip interchange format: ordered frames plus 68-point landmarks.

One JSON manifest per clip references lossless per-frame images and embeds
the landmark arrays, so the detector core never depends on any particular
face-tracking stack. Landmarks follow the standard 68-point annotation
(0-based): 0-16 jaw, 17-26 brows, 27-35 nose, 36-41 left eye, 42-47 right
eye, 48-59 outer lip, 60-67 inner lip.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ImageError, ParseError, SchemaError

MANIFEST_VERSION = 1
LANDMARK_COUNT = 68


@dataclass(frozen=True)
class FrameRecord:
    """One frame: image in [0,1], its landmark set, and its ordinal."""

    image: np.ndarray      # (H, W, 3) float32
    landmarks: np.ndarray  # (68, 2) float64, (x, y) pixel coordinates
    index: int


@dataclass(frozen=True)
class ClipManifest:
    frames: tuple[FrameRecord, ...]
    fps: float
    label: int | None  # 0 fake, 1 real, None unlabeled
    clip_id: str

    def __len__(self):
        return len(self.frames)


def _landmarks_from_json(raw, frame_no):
    if not isinstance(raw, list) or len(raw) != LANDMARK_COUNT:
        raise SchemaError(
            f"frame {frame_no}: expected {LANDMARK_COUNT} landmarks, got "
            f"{len(raw) if isinstance(raw, list) else type(raw).__name__}"
        )
    pts = np.empty((LANDMARK_COUNT, 2), dtype=np.float64)
    for i, pair in enumerate(raw):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise SchemaError(f"frame {frame_no}: landmark {i} is not an (x, y) pair")
        x, y = pair
        if not (isinstance(x, (int, float)) and isinstance(y, (int, float))):
            raise SchemaError(f"frame {frame_no}: landmark {i} has non-numeric coordinates")
        if not (math.isfinite(x) and math.isfinite(y)):
            raise SchemaError(f"frame {frame_no}: landmark {i} has a non-finite coordinate")
        pts[i] = (x, y)
    return pts


def _load_image(path, frame_no):
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    except (OSError, ValueError) as exc:
        raise ImageError(f"frame {frame_no}: cannot read image {path}: {exc}") from exc
    return arr / np.float32(255.0)


def load_manifest(path) -> ClipManifest:
    """Load and decode a clip manifest, normalizing pixels to [0, 1].

    Raises ParseError for unreadable/invalid JSON, SchemaError for structural
    violations, ImageError for undecodable frames.
    """
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed manifest {path}: {exc}") from exc

    if not isinstance(doc, dict):
        raise SchemaError("manifest root must be an object")
    version = doc.get("version")
    if version != MANIFEST_VERSION:
        raise SchemaError(f"unsupported manifest version: {version!r}")
    clip_id = doc.get("clip_id")
    if not isinstance(clip_id, str) or not clip_id:
        raise SchemaError("clip_id must be a non-empty string")
    fps = doc.get("fps")
    if not isinstance(fps, (int, float)) or not math.isfinite(fps) or fps <= 0:
        raise SchemaError(f"fps must be a positive number, got {fps!r}")
    label = doc.get("label")
    if label not in (0, 1, None):
        raise SchemaError(f"label must be 0, 1, or null, got {label!r}")
    raw_frames = doc.get("frames")
    if not isinstance(raw_frames, list) or not raw_frames:
        raise SchemaError("manifest must list at least one frame")

    base = os.path.dirname(path)
    frames = []
    size = None
    for i, rec in enumerate(raw_frames):
        if not isinstance(rec, dict) or "image" not in rec or "landmarks" not in rec:
            raise SchemaError(f"frame {i}: needs 'image' and 'landmarks'")
        landmarks = _landmarks_from_json(rec["landmarks"], i)
        image = _load_image(os.path.join(base, rec["image"]), i)
        if size is None:
            size = image.shape
        elif image.shape != size:
            raise SchemaError(
                f"frame {i}: image size {image.shape[:2]} differs from frame 0 size {size[:2]}"
            )
        frames.append(FrameRecord(image=image, landmarks=landmarks, index=i))
    return ClipManifest(frames=tuple(frames), fps=float(fps), label=label, clip_id=clip_id)


def save_manifest(clip: ClipManifest, out_dir, image_dir="frames") -> str:
    """Write a clip as manifest.json plus lossless 8-bit PNG frames.

    Landmarks round-trip exactly; images round-trip within one 8-bit
    quantization step. Returns the manifest path.
    """
    out_dir = os.fspath(out_dir)
    os.makedirs(os.path.join(out_dir, image_dir), exist_ok=True)
    frames_json = []
    for frame in clip.frames:
        rel = os.path.join(image_dir, f"frame_{frame.index:04d}.png")
        quantized = np.clip(np.round(frame.image * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(quantized, mode="RGB").save(
            os.path.join(out_dir, rel), format="PNG", compress_level=1
        )
        frames_json.append({
            "image": rel.replace(os.sep, "/"),
            "landmarks": [[float(x), float(y)] for x, y in frame.landmarks],
        })
    doc = {
        "version": MANIFEST_VERSION,
        "clip_id": clip.clip_id,
        "fps": clip.fps,
        "label": clip.label,
        "frames": frames_json,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
    return manifest_path


def validate_manifest(clip: ClipManifest) -> list[str]:
    """Check every invariant; returns one entry per violation (empty = valid).

    Clip-level violations come first, then per-frame ones ordered by frame
    index and rule id. Never raises.
    """
    from .extract import inter_ocular_distance  # local import: extract depends on this module

    violations = []
    if not clip.frames:
        violations.append("clip: rule frames-present: clip has no frames")
    if not (math.isfinite(clip.fps) and clip.fps > 0):
        violations.append(f"clip: rule fps-positive: fps is {clip.fps!r}")
    indices = [f.index for f in clip.frames]
    if indices != sorted(set(indices)):
        violations.append("clip: rule frame-order: frame indices not strictly increasing")

    base_shape = clip.frames[0].image.shape if clip.frames else None
    for frame in clip.frames:
        checks = []  # (rule_id, message) in rule-id order
        lm = np.asarray(frame.landmarks)
        if lm.shape != (LANDMARK_COUNT, 2):
            checks.append(("landmark-arity", f"landmark array has shape {lm.shape}"))
        else:
            if not np.all(np.isfinite(lm)):
                bad = int(np.argwhere(~np.isfinite(lm))[0][0])
                checks.append(("landmark-finite", f"landmark {bad} is not finite"))
            elif inter_ocular_distance(lm) <= 0:
                checks.append(("interocular-positive", "inter-ocular distance is zero"))
        img = np.asarray(frame.image)
        if img.ndim != 3 or img.shape[2] != 3:
            checks.append(("image-shape", f"image has shape {img.shape}"))
        elif base_shape is not None and img.shape != base_shape:
            checks.append(
                ("image-shape", f"image size {img.shape[:2]} differs from frame 0 size {base_shape[:2]}")
            )
        if img.size and (np.nanmin(img) < 0 or np.nanmax(img) > 1 or np.any(np.isnan(img))):
            checks.append(("pixel-range", "pixel values outside [0, 1]"))
        for rule, msg in sorted(checks):
            violations.append(f"frame {frame.index}: rule {rule}: {msg}")
    return violations
