"""Deterministic synthetic scenes with known background and masks.

A smooth sinusoidal background sits behind a flat gray square that scans the
frame line by line, so every pixel is uncovered in a large majority of frames.
Everything is driven by a single seed.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SceneConfig:
    height: int = 128
    width: int = 128
    n_frames: int = 60
    square_size: int = 24
    speed: int = 2
    noise_sigma: float = 0.02
    seed: int = 0
    square_color: tuple = (0.1, 0.1, 0.1)

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("frame dimensions must be positive")
        if self.n_frames < 1:
            raise ValueError("n_frames must be positive")
        if not 1 <= self.square_size <= min(self.height, self.width):
            raise ValueError("square_size must fit inside the frame")
        if self.speed < 1:
            raise ValueError("speed must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")


@dataclass
class SyntheticScene:
    frames: np.ndarray       # (h, w, 3, n) in [0, 1]
    background: np.ndarray   # (h, w, 3) clean background
    masks: np.ndarray        # (h, w, n) uint8, 1 where the square sits
    config: SceneConfig = field(repr=False, default=None)

    @property
    def occlusion_fraction(self) -> float:
        """Worst-case fraction of frames in which a single pixel is covered."""
        return float(self.masks.sum(axis=2).max()) / self.masks.shape[2]


def _smooth_background(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:cfg.height, 0:cfg.width].astype(np.float64)
    bg = np.empty((cfg.height, cfg.width, 3))
    for ch in range(3):
        acc = np.zeros((cfg.height, cfg.width))
        for _ in range(3):
            fy = rng.uniform(0.5, 3.0)
            fx = rng.uniform(0.5, 3.0)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            acc += np.sin(2.0 * math.pi * (fy * yy / cfg.height
                                           + fx * xx / cfg.width) + phase)
        # acc/3 lies in [-1, 1], so each channel stays inside [0.25, 0.75]
        bg[:, :, ch] = 0.5 + 0.25 * acc / 3.0
    return bg


def square_position(cfg: SceneConfig, t: int) -> tuple:
    """Top-left (y, x) of the square at frame ``t`` on its scanline path."""
    span_x = cfg.width - cfg.square_size + 1
    span_y = cfg.height - cfg.square_size + 1
    step = cfg.speed * t
    x = step % span_x
    y = (cfg.square_size * (step // span_x)) % span_y
    return y, x


def generate_scene(cfg: SceneConfig = None) -> SyntheticScene:
    cfg = cfg or SceneConfig()
    rng = np.random.default_rng(cfg.seed)
    background = _smooth_background(cfg, rng)

    s = cfg.square_size
    color = np.asarray(cfg.square_color, dtype=np.float64)
    frames = np.empty((cfg.height, cfg.width, 3, cfg.n_frames))
    masks = np.zeros((cfg.height, cfg.width, cfg.n_frames), dtype=np.uint8)
    for t in range(cfg.n_frames):
        y, x = square_position(cfg, t)
        frames[:, :, :, t] = background
        frames[y:y + s, x:x + s, :, t] = color
        masks[y:y + s, x:x + s, t] = 1
    if cfg.noise_sigma > 0:
        frames += rng.normal(0.0, cfg.noise_sigma, size=frames.shape)
    np.clip(frames, 0.0, 1.0, out=frames)
    return SyntheticScene(frames=frames, background=background, masks=masks,
                          config=cfg)
