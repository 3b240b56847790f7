"""Static-background extraction from a selected frame stack.

The solver alternates two levels:

* an inner splitting iteration on ``min ||S||_1  s.t.  D = B + S`` where B is
  constrained to have identical frame slices (so B is stored collapsed as a
  single frame and broadcast implicitly):

      S      <- shrink(D + Lam/mu - B, 1/mu)
      B      <- frame mean of (D - S)          (projection onto the
                                                equal-slices space)
      Lam    <- Lam + mu * (D - B - S)

* an outer cycle that, after each solved inner problem, replaces the single
  worst value per pixel-channel (the one farthest from the current background
  estimate) with that estimate, and repeats until the background stabilizes.

Frames live on the last axis throughout; leading axes are pixel axes.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError
from .tensor_ops import soft_threshold

log = logging.getLogger(__name__)

#: Guard for relative-change denominators on all-black inputs.
NORM_FLOOR = 1e-12

ADM_MODES = ("solve", "single_step")
PROJECTIONS = ("mean", "median")


@dataclass
class EngineConfig:
    """Tunables for the background solver.

    ``mu`` defaults to 1/std of the input entries (std floored at 1e-3), so
    the shrinkage threshold 1/mu tracks the data's dispersion.
    """

    mu: Optional[float] = None
    inner_tol: float = 1e-4
    inner_max_iter: int = 100
    outer_tol: float = 1e-3
    outer_max_iter: int = 200
    adm_mode: str = "solve"
    warm_start_lambda: bool = False
    projection: str = "mean"

    def __post_init__(self):
        if self.mu is not None and self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.inner_tol <= 0 or self.outer_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.inner_max_iter < 1 or self.outer_max_iter < 1:
            raise ValueError("iteration caps must be at least 1")
        if self.adm_mode not in ADM_MODES:
            raise ValueError(f"adm_mode must be one of {ADM_MODES}")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"projection must be one of {PROJECTIONS}")


@dataclass
class AdmResult:
    background: np.ndarray
    sparse: np.ndarray
    multiplier: np.ndarray
    iterations: int
    converged: bool


@dataclass
class BackgroundResult:
    background: np.ndarray
    outer_iters: int
    final_rel_change: float
    history: list = field(default_factory=list)
    converged: bool = True


def default_mu(d: np.ndarray) -> float:
    with np.errstate(invalid="ignore"):
        std = float(np.std(d))
    if not np.isfinite(std):
        std = 0.0
    return 1.0 / max(std, 1e-3)


def project_r4(t: np.ndarray) -> np.ndarray:
    """Frame mean: collapses the last (frame) mode.

    This is the closest equal-slices tensor to ``t`` in the Frobenius sense,
    returned collapsed to a single frame.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim < 1 or t.shape[-1] < 1:
        raise ValueError("need at least one frame to project")
    return t.mean(axis=-1)


def project_r4_median(t: np.ndarray) -> np.ndarray:
    """Per-pixel median over frames; the l1-optimal collapse (see README)."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim < 1 or t.shape[-1] < 1:
        raise ValueError("need at least one frame to project")
    return np.median(t, axis=-1)


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    diff = float(np.linalg.norm((new - old).ravel()))
    denom = float(np.linalg.norm(old.ravel()))
    if denom < NORM_FLOOR:
        return diff
    return diff / denom


def adm_solve(d: np.ndarray, mu: Optional[float] = None, tol: float = 1e-4,
              max_iter: int = 100, lambda0: Optional[np.ndarray] = None,
              projection: str = "mean") -> AdmResult:
    """Run the inner splitting iteration on a fixed frame stack.

    Returns the collapsed background frame, the sparse part S, the final
    multiplier and the iteration count.  Raises :class:`DivergenceError` if
    non-finite values appear.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.ndim < 2 or d.shape[-1] < 1:
        raise ValueError("expected a stack with frames on the last axis")
    if mu is None:
        mu = default_mu(d)
    if mu <= 0:
        raise ValueError("mu must be positive")
    collapse = project_r4 if projection == "mean" else project_r4_median

    b = project_r4(d)
    s = np.zeros_like(d)
    lam = np.zeros_like(d) if lambda0 is None else np.array(lambda0, dtype=np.float64)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        with np.errstate(invalid="ignore", over="ignore"):
            s = soft_threshold(d + lam / mu - b[..., None], 1.0 / mu)
            b_new = collapse(d - s)
            # Dual ascent on the split constraint d = b + s.  The multiplier
            # keeps a zero frame-mean, so dropping it from the b update above
            # is exact.
            lam = lam + mu * (d - b_new[..., None] - s)
        if not np.isfinite(b_new).all():
            raise DivergenceError(f"solver diverged at inner iteration {it}", iteration=it)
        change = _rel_change(b_new, b)
        b = b_new
        if change <= tol:
            converged = True
            break
    return AdmResult(background=b, sparse=s, multiplier=lam,
                     iterations=it, converged=converged)


def remove_worst_outliers(frames: np.ndarray, purified_mean: np.ndarray) -> np.ndarray:
    """Replace, per pixel-channel, the frame value farthest from the estimate.

    Ties go to the lowest frame index; at most one entry changes per
    pixel-channel.  Returns a new array.
    """
    frames = np.asarray(frames, dtype=np.float64)
    mean = np.asarray(purified_mean, dtype=np.float64)
    if frames.shape[:-1] != mean.shape:
        raise ValueError(
            f"estimate shape {mean.shape} does not match frames {frames.shape[:-1]}"
        )
    worst = np.argmax(np.abs(frames - mean[..., None]), axis=-1)
    out = frames.copy()
    np.put_along_axis(out, worst[..., None], mean[..., None], axis=-1)
    return out


def extract_background(d_selected: np.ndarray, cfg: Optional[EngineConfig] = None,
                       observer: Optional[Callable] = None) -> BackgroundResult:
    """Outer cycle: solve for the background, replace worst outliers, repeat.

    Stops when the background's relative Frobenius change drops to
    ``cfg.outer_tol`` or after ``cfg.outer_max_iter`` cycles (then the result
    carries ``converged=False``).  ``observer(iteration, background, frames)``
    is invoked after each solved cycle, before outlier replacement.
    """
    cfg = cfg or EngineConfig()
    frames = np.array(d_selected, dtype=np.float64)
    if frames.ndim < 2 or frames.shape[-1] < 2:
        raise ValueError("need at least 2 frames to extract a background")
    mu = cfg.mu if cfg.mu is not None else default_mu(frames)
    inner_iters = 1 if cfg.adm_mode == "single_step" else cfg.inner_max_iter

    b_prev = project_r4(frames)
    lam = None
    history = []
    converged = False
    change = np.inf
    outer = 0
    for outer in range(1, cfg.outer_max_iter + 1):
        result = adm_solve(frames, mu=mu, tol=cfg.inner_tol, max_iter=inner_iters,
                           lambda0=lam, projection=cfg.projection)
        if cfg.warm_start_lambda:
            lam = result.multiplier
        # The exact subproblem optimum lies in the per-pixel [min, max]
        # interval of the current stack; clamp away any solver slack so the
        # interval-containment guarantee holds exactly.
        b = np.clip(result.background, frames.min(axis=-1), frames.max(axis=-1))
        change = _rel_change(b, b_prev)
        history.append(change)
        if observer is not None:
            observer(outer, b, frames)
        b_prev = b
        if change <= cfg.outer_tol:
            converged = True
            break
        frames = remove_worst_outliers(frames, b)
    if not converged:
        log.warning("outer loop hit max_iter=%d (rel change %.3g)",
                    cfg.outer_max_iter, change)
    return BackgroundResult(background=b_prev, outer_iters=outer,
                            final_rel_change=float(change), history=history,
                            converged=converged)
