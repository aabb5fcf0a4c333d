import numpy as np
import pytest

from lipinc.manifest import ClipManifest, FrameRecord


def mini_landmarks(gap=0.2, width=0.3, yaw=1.0):
    """Parametric 68-point set with inter-ocular distance exactly 1.

    Eye rings are hexagons whose centroids land exactly on (+-0.5, 0), the
    inner-lip midline points 63/67 sit ``gap`` apart vertically, the inner
    corners 60/64 sit ``width`` apart, and the jaw anchors 2/14 encode the
    yaw ratio. Remaining points form a static oval.
    """
    pts = np.zeros((68, 2))
    hex_x = np.array([1.0, 0.5, -0.5, -1.0, -0.5, 0.5]) * 0.1
    hex_y = np.array([0.0, 1.0, 1.0, 0.0, -1.0, -1.0]) * (np.sqrt(3) / 2) * 0.1
    pts[36:42, 0] = -0.5 + hex_x
    pts[36:42, 1] = hex_y
    pts[42:48, 0] = 0.5 + hex_x
    pts[42:48, 1] = hex_y
    # jaw oval
    ang = np.radians(170.0 - 10.0 * np.arange(17))
    pts[0:17, 0] = 1.2 * np.cos(ang)
    pts[0:17, 1] = 0.7 + 1.0 * np.sin(ang)
    pts[2] = (-yaw * 0.8, 0.5)
    pts[14] = (0.8, 0.5)
    # brows / nose
    pts[17:22, 0] = np.linspace(-0.8, -0.2, 5)
    pts[17:22, 1] = -0.35
    pts[22:27, 0] = np.linspace(0.2, 0.8, 5)
    pts[22:27, 1] = -0.35
    pts[27:31, 0] = 0.0
    pts[27:31, 1] = np.linspace(0.05, 0.4, 4)
    pts[31:36, 0] = np.linspace(-0.2, 0.2, 5)
    pts[31:36, 1] = 0.5
    # outer lip ring around (0, 1)
    ang = np.radians(np.arange(0, 360, 30))
    pts[48:60, 0] = 0.45 * np.cos(ang)
    pts[48:60, 1] = 1.0 + 0.25 * np.sin(ang)
    # inner lip
    pts[60] = (-width / 2, 1.0)
    pts[61] = (-width / 4, 1.0 - 0.4 * gap)
    pts[62] = (-width / 8, 1.0 - 0.45 * gap)
    pts[63] = (0.0, 1.0 - gap / 2)
    pts[64] = (width / 2, 1.0)
    pts[65] = (width / 4, 1.0 + 0.4 * gap)
    pts[66] = (width / 8, 1.0 + 0.45 * gap)
    pts[67] = (0.0, 1.0 + gap / 2)
    return pts


def track_clip(opennesses, fps=25.0, clip_id="track", image=None, label=None):
    """Clip whose per-frame openness follows ``opennesses`` exactly."""
    frames = []
    for i, g in enumerate(opennesses):
        img = np.zeros((4, 4, 3), dtype=np.float32) if image is None else image
        frames.append(FrameRecord(image=img, landmarks=mini_landmarks(gap=float(g)), index=i))
    return ClipManifest(frames=tuple(frames), fps=fps, label=label, clip_id=clip_id)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
