"""Mask-quality metrics and the frame-count sweep.

Foreground is the positive class throughout.  Degenerate 0/0 ratios are
defined as 0.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import pipeline
from .background import EngineConfig


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class FMeasure:
    precision: float
    recall: float
    f: float


@dataclass
class DistanceRatioPoint:
    n_frames: int
    ratio: float


@dataclass
class SweepResult:
    points: list
    standard_n: int
    standard_background: np.ndarray


def confusion(pred: np.ndarray, truth: np.ndarray) -> ConfusionCounts:
    """Pixel-wise confusion counts between a predicted and a truth mask."""
    p = np.asarray(pred)
    t = np.asarray(truth)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs truth {t.shape}")
    if not np.all(np.isin(t, (0, 1))):
        raise ValueError("truth mask must be binary")
    p = p != 0
    t = t != 0
    return ConfusionCounts(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        tn=int(np.sum(~p & ~t)),
        fn=int(np.sum(~p & t)),
    )


def f_measure(c: ConfusionCounts) -> FMeasure:
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) else 0.0
    f = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return FMeasure(precision=precision, recall=recall, f=f)


def distance_ratio(result: np.ndarray, standard: np.ndarray) -> float:
    """Frobenius distance to the standard, normalized by the standard's norm."""
    r = np.asarray(result, dtype=np.float64)
    s = np.asarray(standard, dtype=np.float64)
    if r.shape != s.shape:
        raise ValueError(f"shape mismatch: result {r.shape} vs standard {s.shape}")
    denom = float(np.linalg.norm(s.ravel()))
    if denom == 0.0:
        raise ValueError("standard background has zero norm")
    return float(np.linalg.norm((r - s).ravel())) / denom


def load_mask(path) -> np.ndarray:
    """Read a black/white mask image; any pixel above 0.5 is foreground."""
    from .frame_io import _decode_frame, to_gray

    return (to_gray(_decode_frame(path)) > 0.5).astype(np.uint8)


def sweep_n_frames(video: np.ndarray, n_values: Sequence[int], standard_n: int,
                   lambda_rel: float = 0.1, tau_rel: float = 1e-3,
                   direction: str = "most_distinct",
                   engine_cfg: Optional[EngineConfig] = None) -> SweepResult:
    """Background quality as a function of the selected-frame count.

    Extracts a standard background with ``standard_n`` selected frames, then
    one background per entry of ``n_values``, and reports each run's distance
    ratio against the standard.
    """
    n_values = [int(n) for n in n_values]
    if not n_values:
        raise ValueError("n_values must not be empty")
    if min(n_values) < 1:
        raise ValueError("n_values must be positive")
    if standard_n < max(n_values):
        raise ValueError(
            f"standard_n={standard_n} must be at least max(n_values)={max(n_values)}"
        )

    def run(n):
        result, _ = pipeline.background_from_video(
            video, n_select=n, lambda_rel=lambda_rel, tau_rel=tau_rel,
            direction=direction, engine_cfg=engine_cfg)
        return result.background

    standard = run(standard_n)
    points = [DistanceRatioPoint(n_frames=n, ratio=distance_ratio(run(n), standard))
              for n in n_values]
    return SweepResult(points=points, standard_n=standard_n,
                       standard_background=standard)
