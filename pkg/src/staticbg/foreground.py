"""Foreground segmentation by background subtraction plus a binary MRF.

The label field O minimizes

    sum_{O_ij=0} 0.5 * r_ij^2  +  lambda_a * sum O_ij
                               +  lambda_b * sum_{4-neighbors} |O_ij - O_xy|

where r is the grayscale residual frame - background.  Dropping the constant
sum of 0.5*r^2 turns the data term into per-pixel weights
w_ij = lambda_a - 0.5*r_ij^2, which map onto terminal capacities of a grid
graph: positive weights connect to the label-0 terminal, negative ones to the
label-1 terminal, and every 4-neighbor pair gets a lambda_b edge.  The
minimum cut is a global minimizer.
"""

from dataclasses import dataclass

import numpy as np

from .frame_io import to_gray
from .gridcut import GridGraph, min_cut


@dataclass
class MrfParams:
    """Foreground-count penalty and smoothness penalty (both >= 0)."""

    lambda_a: float
    lambda_b: float

    def __post_init__(self):
        if self.lambda_a < 0 or self.lambda_b < 0:
            raise ValueError("MRF penalties must be non-negative")


def subtract(frame_gray: np.ndarray, background_gray: np.ndarray) -> np.ndarray:
    """Signed residual frame - background."""
    f = np.asarray(frame_gray, dtype=np.float64)
    b = np.asarray(background_gray, dtype=np.float64)
    if f.shape != b.shape:
        raise ValueError(f"shape mismatch: frame {f.shape} vs background {b.shape}")
    return f - b


def mrf_energy(o: np.ndarray, residual: np.ndarray, params: MrfParams) -> float:
    """Energy of a labeling under the model above (constant term included)."""
    o = np.asarray(o, dtype=np.float64)
    r = np.asarray(residual, dtype=np.float64)
    if o.shape != r.shape:
        raise ValueError(f"shape mismatch: labels {o.shape} vs residual {r.shape}")
    data = 0.5 * float(np.sum(r * r * (1.0 - o)))
    unary = params.lambda_a * float(np.sum(o))
    pair = float(np.sum(np.abs(o[:, 1:] - o[:, :-1])))
    pair += float(np.sum(np.abs(o[1:, :] - o[:-1, :])))
    return data + unary + params.lambda_b * pair


def unary_weights(residual: np.ndarray, params: MrfParams) -> np.ndarray:
    r = np.asarray(residual, dtype=np.float64)
    return params.lambda_a - 0.5 * r * r


def segment(residual: np.ndarray, params: MrfParams) -> np.ndarray:
    """Globally optimal binary mask for the residual under ``params``."""
    r = np.asarray(residual, dtype=np.float64)
    if r.ndim != 2:
        raise ValueError(f"residual must be 2-D, got shape {r.shape}")
    w = unary_weights(r, params)
    h, wd = r.shape
    graph = GridGraph(
        source_cap=np.maximum(-w, 0.0),
        sink_cap=np.maximum(w, 0.0),
        right_cap=np.full((h, max(wd - 1, 0)), params.lambda_b),
        down_cap=np.full((max(h - 1, 0), wd), params.lambda_b),
    )
    labels, _ = min_cut(graph)
    return labels


def estimate_params(residual: np.ndarray) -> MrfParams:
    """Noise-adaptive penalties from the residual's median absolute deviation.

    sigma_hat = 1.4826 * MAD; lambda_a = 0.5*(2*sigma_hat)^2 so that isolated
    pixels fire at |r| > 2*sigma_hat; lambda_b = lambda_a / 2.
    """
    r = np.asarray(residual, dtype=np.float64)
    sigma = 1.4826 * float(np.median(np.abs(r - np.median(r))))
    lambda_a = 2.0 * sigma * sigma
    return MrfParams(lambda_a=lambda_a, lambda_b=lambda_a / 2.0)


def detect(frame: np.ndarray, background: np.ndarray,
           params: MrfParams | None = None) -> np.ndarray:
    """Segment one frame against the extracted background.

    Color inputs are collapsed to grayscale first; ``params=None`` estimates
    the penalties from the residual.
    """
    f = np.asarray(frame, dtype=np.float64)
    b = np.asarray(background, dtype=np.float64)
    if f.ndim == 3:
        f = to_gray(f)
    if b.ndim == 3:
        b = to_gray(b)
    residual = subtract(f, b)
    if params is None:
        params = estimate_params(residual)
    return segment(residual, params)
