"""Selection plus extraction glued into one call.

Shared by the command line front end and the sweep metric so both take the
exact same path through the code.
"""

from typing import Callable, Optional, Tuple

import numpy as np

from .background import BackgroundResult, EngineConfig, extract_background
from .frame_io import to_gray
from .selection import (DEFAULT_LAMBDA_REL, DEFAULT_N_SELECT, DEFAULT_TAU_REL,
                        SelectionResult, select)


def background_from_video(video: np.ndarray, n_select: int = DEFAULT_N_SELECT,
                          lambda_rel: float = DEFAULT_LAMBDA_REL,
                          tau_rel: float = DEFAULT_TAU_REL,
                          direction: str = "most_distinct",
                          engine_cfg: Optional[EngineConfig] = None,
                          observer: Optional[Callable] = None,
                          ) -> Tuple[BackgroundResult, SelectionResult]:
    """Pick discriminative frames from ``video`` and extract their background.

    ``video`` is an (h, w, 3, n) stack in [0, 1].  Selection runs on the
    grayscale version; extraction runs on the full color frames that survived
    selection.
    """
    gray = to_gray(video)
    sel = select(gray, n_select=n_select, lambda_rel=lambda_rel,
                 tau_rel=tau_rel, direction=direction)
    frames = np.ascontiguousarray(video[:, :, :, sel.selected_indices])
    if frames.shape[-1] == 1:
        # A one-frame stack has nothing to purify; the frame is the answer.
        result = BackgroundResult(background=frames[..., 0].astype(np.float64),
                                  outer_iters=0, final_rel_change=0.0,
                                  history=[], converged=True)
    else:
        result = extract_background(frames, engine_cfg, observer=observer)
    return result, sel
