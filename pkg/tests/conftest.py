"""Shared fixtures: the benchmark scene and its extracted background.

Session scope keeps the expensive pipeline runs to one apiece; several test
modules and the acceptance suite read from the same results.
"""

import time

import numpy as np
import pytest

from staticbg.frame_io import save_frame
from staticbg.pipeline import background_from_video
from staticbg.synth import SceneConfig, generate_scene


@pytest.fixture(scope="session")
def bench_scene():
    """The 128x128, 60-frame benchmark scene with noise sigma 0.02, seed 0."""
    return generate_scene(SceneConfig())


@pytest.fixture(scope="session")
def bench_extraction(bench_scene):
    """(BackgroundResult, SelectionResult, wall_seconds) for the benchmark."""
    t0 = time.perf_counter()
    result, sel = background_from_video(bench_scene.frames, n_select=25)
    return result, sel, time.perf_counter() - t0


@pytest.fixture(scope="session")
def bench_dirs(bench_scene, tmp_path_factory):
    """Benchmark scene written to disk: frames/, masks/, truth background."""
    root = tmp_path_factory.mktemp("bench_scene")
    (root / "frames").mkdir()
    (root / "masks").mkdir()
    for t in range(bench_scene.frames.shape[3]):
        save_frame(bench_scene.frames[:, :, :, t],
                   root / "frames" / f"frame_{t:05d}.png")
        save_frame(bench_scene.masks[:, :, t].astype(np.float64),
                   root / "masks" / f"mask_{t:05d}.png")
    return root
