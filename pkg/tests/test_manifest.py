import json

import numpy as np
import pytest

from lipinc.errors import ImageError, ParseError, SchemaError
from lipinc.manifest import ClipManifest, FrameRecord, load_manifest, save_manifest, validate_manifest
from lipinc.synth import SynthSpec, generate_clip

from conftest import track_clip


@pytest.fixture(scope="module")
def synth_clip():
    spec = SynthSpec(frames=12, image_size=(64, 64), seed=11)
    clip, _ = generate_clip(spec, "real", "round")
    return clip


def test_round_trip_landmarks_exact_images_quantized(tmp_path, synth_clip):
    path = save_manifest(synth_clip, tmp_path / "clip")
    loaded = load_manifest(path)
    assert loaded.clip_id == synth_clip.clip_id
    assert loaded.fps == synth_clip.fps
    assert loaded.label == synth_clip.label
    assert len(loaded) == len(synth_clip)
    for a, b in zip(loaded.frames, synth_clip.frames):
        assert np.array_equal(a.landmarks, b.landmarks)  # lossless geometry
        assert np.max(np.abs(a.image - b.image)) <= 1.0 / 255.0 + 1e-7
        assert a.image.min() >= 0.0 and a.image.max() <= 1.0


def test_hundred_frame_manifest(tmp_path):
    spec = SynthSpec(frames=100, image_size=(48, 48), fps=25.0, seed=3)
    clip, _ = generate_clip(spec, "fake", "c100")
    path = save_manifest(clip, tmp_path / "c100")
    loaded = load_manifest(path)
    assert len(loaded) == 100
    assert loaded.fps == 25.0


def test_empty_frames_rejected(tmp_path):
    doc = {"version": 1, "clip_id": "x", "fps": 25, "label": None, "frames": []}
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(SchemaError):
        load_manifest(p)


def test_wrong_landmark_arity_rejected(tmp_path, synth_clip):
    path = save_manifest(synth_clip, tmp_path / "clip")
    doc = json.loads(open(path).read())
    doc["frames"][0]["landmarks"] = doc["frames"][0]["landmarks"][:67]
    open(path, "w").write(json.dumps(doc))
    with pytest.raises(SchemaError):
        load_manifest(path)


def test_malformed_json_is_parse_error(tmp_path):
    p = tmp_path / "manifest.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_manifest(p)


def test_missing_file_is_parse_error(tmp_path):
    with pytest.raises(ParseError):
        load_manifest(tmp_path / "nope.json")


def test_unreadable_image_is_image_error(tmp_path, synth_clip):
    path = save_manifest(synth_clip, tmp_path / "clip")
    img_path = tmp_path / "clip" / "frames" / "frame_0000.png"
    img_path.write_bytes(b"not a png")
    with pytest.raises(ImageError):
        load_manifest(path)


def test_nonfinite_landmark_rejected_at_load(tmp_path, synth_clip):
    path = save_manifest(synth_clip, tmp_path / "clip")
    doc = json.loads(open(path).read())
    doc["frames"][2]["landmarks"][5][0] = float("nan")
    open(path, "w").write(json.dumps(doc))
    with pytest.raises(SchemaError):
        load_manifest(path)


def test_bad_version_rejected(tmp_path, synth_clip):
    path = save_manifest(synth_clip, tmp_path / "clip")
    doc = json.loads(open(path).read())
    doc["version"] = 9
    open(path, "w").write(json.dumps(doc))
    with pytest.raises(SchemaError):
        load_manifest(path)


# ---------------------------------------------------------------------------
# validate_manifest


def test_validate_clean_clip_is_empty(synth_clip):
    assert validate_manifest(synth_clip) == []


def test_validate_names_nan_frame_and_rule():
    clip = track_clip([0.2, 0.3, 0.2])
    lm = clip.frames[1].landmarks.copy()
    lm[12, 1] = np.nan
    frames = list(clip.frames)
    frames[1] = FrameRecord(image=frames[1].image, landmarks=lm, index=1)
    bad = ClipManifest(frames=tuple(frames), fps=clip.fps, label=None, clip_id="bad")
    violations = validate_manifest(bad)
    assert len(violations) == 1
    assert "frame 1" in violations[0] and "landmark-finite" in violations[0]


def test_validate_lists_both_mismatched_sizes():
    clip = track_clip([0.2, 0.3])
    frames = list(clip.frames)
    frames[1] = FrameRecord(image=np.zeros((6, 5, 3), dtype=np.float32),
                            landmarks=frames[1].landmarks, index=1)
    bad = ClipManifest(frames=tuple(frames), fps=clip.fps, label=None, clip_id="bad")
    violations = validate_manifest(bad)
    assert len(violations) == 1
    assert "(6, 5)" in violations[0] and "(4, 4)" in violations[0]


@pytest.mark.parametrize("mutate, expect_rule", [
    ("fps", "fps-positive"),
    ("order", "frame-order"),
    ("arity", "landmark-arity"),
    ("pixel", "pixel-range"),
    ("interocular", "interocular-positive"),
])
def test_validate_detects_each_injected_violation(mutate, expect_rule):
    clip = track_clip([0.2, 0.3, 0.25])
    frames = list(clip.frames)
    fps = clip.fps
    if mutate == "fps":
        fps = 0.0
    elif mutate == "order":
        frames[2] = FrameRecord(image=frames[2].image, landmarks=frames[2].landmarks, index=1)
    elif mutate == "arity":
        frames[0] = FrameRecord(image=frames[0].image, landmarks=frames[0].landmarks[:67], index=0)
    elif mutate == "pixel":
        img = frames[1].image.copy()
        img[0, 0, 0] = 1.5
        frames[1] = FrameRecord(image=img, landmarks=frames[1].landmarks, index=1)
    elif mutate == "interocular":
        lm = frames[0].landmarks.copy()
        lm[36:48] = lm[36]  # collapse both eyes onto one point
        frames[0] = FrameRecord(image=frames[0].image, landmarks=lm, index=0)
    bad = ClipManifest(frames=tuple(frames), fps=fps, label=None, clip_id="bad")
    violations = validate_manifest(bad)
    assert any(expect_rule in v for v in violations), violations
