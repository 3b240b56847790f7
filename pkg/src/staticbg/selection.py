"""Discriminative-frame selection from a grayscale stack.

The stack represents itself sparsely: each vectorized gray frame x_j is coded
against the other frames by solving

    min_c  0.5 * ||x_j - X c||^2 + lam_j * ||c||_1,   c_j = 0,

with lam_j set relative to the largest absolute correlation of frame j with
any other frame.  Frames whose coefficient row is (relatively) nonzero are the
useful set; the final selection ranks the useful frames by their summed
Euclidean distance to the other useful frames and keeps the top few.

All frame indices in this module are 0-based.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DataError

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_REL = 0.1
DEFAULT_TAU_REL = 1e-3
DEFAULT_N_SELECT = 25
KKT_TOL = 1e-6
MAX_INNER_ITER = 500

DIRECTIONS = ("most_distinct", "least_distinct")


@dataclass
class SelectionResult:
    """Outcome of a frame-selection run.

    ``scores`` is aligned with ``useful_indices``; ``selected_indices`` is
    ordered by rank (best first).
    """

    useful_indices: list
    selected_indices: list
    scores: list = field(default_factory=list)


@njit(cache=True, nogil=True)
def _lasso_cd_gram(G, b, lam, skip, tol, max_iter):
    """Cyclic coordinate descent for one lasso column over the Gram matrix.

    Returns (c, passes).  Stops when the KKT violation drops below
    ``tol`` relative to the correlation scale, or after ``max_iter`` passes.
    """
    n = G.shape[0]
    c = np.zeros(n)
    g = -b.copy()  # gradient of the smooth part: G c - b
    scale = lam
    for i in range(n):
        if i != skip and abs(b[i]) > scale:
            scale = abs(b[i])
    if scale <= 0.0:
        return c, 0
    for it in range(max_iter):
        for i in range(n):
            if i == skip or G[i, i] <= 0.0:
                continue
            z = c[i] - g[i] / G[i, i]
            step = lam / G[i, i]
            new = max(z - step, 0.0) + min(z + step, 0.0)
            if new != c[i]:
                d = new - c[i]
                c[i] = new
                for k in range(n):
                    g[k] += G[k, i] * d
        viol = 0.0
        for i in range(n):
            if i == skip or G[i, i] <= 0.0:
                continue
            if c[i] > 0.0:
                v = abs(g[i] + lam)
            elif c[i] < 0.0:
                v = abs(g[i] - lam)
            else:
                v = abs(g[i]) - lam
                if v < 0.0:
                    v = 0.0
            if v > viol:
                viol = v
        if viol <= tol * scale:
            return c, it + 1
    return c, max_iter


@njit(cache=True, nogil=True)
def _sparse_code_gram(G, lambda_rel, tol, max_iter):
    n = G.shape[0]
    C = np.zeros((n, n))
    for j in range(n):
        lam = 0.0
        for i in range(n):
            if i != j and abs(G[i, j]) > lam:
                lam = abs(G[i, j])
        lam *= lambda_rel
        c, _ = _lasso_cd_gram(G, G[:, j].copy(), lam, j, tol, max_iter)
        C[:, j] = c
    return C


def gram_matrix(gray: np.ndarray) -> np.ndarray:
    """N x N Gram matrix of the vectorized gray frames."""
    X = np.asarray(gray, dtype=np.float64).reshape(-1, gray.shape[-1])
    return X.T @ X


def sparse_code(gray: np.ndarray, lambda_rel: float = DEFAULT_LAMBDA_REL,
                tol: float = KKT_TOL, max_iter: int = MAX_INNER_ITER) -> np.ndarray:
    """Self-representation coefficients C (zero diagonal) for a gray stack.

    Column j solves the lasso above with ``lam_j = lambda_rel *
    max_{i != j} |x_i . x_j|``, by cyclic coordinate descent against the
    precomputed Gram matrix.
    """
    gray = np.asarray(gray, dtype=np.float64)
    n = gray.shape[-1]
    if n < 2:
        raise ValueError(f"need at least 2 frames to self-represent, got {n}")
    if lambda_rel <= 0:
        raise ValueError("lambda_rel must be positive")
    if not np.isfinite(gray).all():
        raise DataError("gray stack contains non-finite values")
    G = gram_matrix(gray)
    return _sparse_code_gram(G, float(lambda_rel), float(tol), int(max_iter))


def useful_frames(c: np.ndarray, tau_rel: float = DEFAULT_TAU_REL) -> list:
    """Indices of frames whose coefficient row is relatively nonzero.

    A frame counts as useful when its row holds an entry above ``tau_rel``
    times the largest |C| entry.  A zero matrix degenerates to all frames.
    """
    if tau_rel <= 0:
        raise ValueError("tau_rel must be positive")
    c = np.asarray(c, dtype=np.float64)
    peak = np.abs(c).max()
    if peak == 0.0:
        return list(range(c.shape[0]))
    rows = np.abs(c).max(axis=1) > tau_rel * peak
    return [int(i) for i in np.flatnonzero(rows)]


def distance_scores(gray: np.ndarray, candidates) -> np.ndarray:
    """Summed-distance score sqrt(sum_j ||I_i - I_j||_F^2) per candidate."""
    candidates = list(candidates)
    if len(candidates) < 2:
        raise ValueError(f"need at least 2 candidate frames, got {len(candidates)}")
    X = np.asarray(gray, dtype=np.float64).reshape(-1, gray.shape[-1])[:, candidates]
    g = X.T @ X
    sq = np.diag(g)
    d2 = len(candidates) * sq - 2.0 * g.sum(axis=1) + sq.sum()
    return np.sqrt(np.maximum(d2, 0.0))


def select(gray: np.ndarray, n_select: int = DEFAULT_N_SELECT,
           lambda_rel: float = DEFAULT_LAMBDA_REL,
           tau_rel: float = DEFAULT_TAU_REL,
           direction: str = "most_distinct") -> SelectionResult:
    """Pick the ``n_select`` most (or least) distinct useful frames.

    Runs sparse coding, keeps the useful rows, scores them by summed distance
    and returns the top ``n_select`` (clamped to the useful count, with a
    warning).  Ties break toward the lower frame index.
    """
    if n_select < 1:
        raise ValueError("n_select must be at least 1")
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    c = sparse_code(gray, lambda_rel)
    useful = useful_frames(c, tau_rel)
    if len(useful) == 1:
        scores = np.zeros(1)
    else:
        scores = distance_scores(gray, useful)
    n = n_select
    if n > len(useful):
        log.warning("n_select=%d exceeds %d useful frames; clamping", n, len(useful))
        n = len(useful)
    sign = -1.0 if direction == "most_distinct" else 1.0
    order = sorted(range(len(useful)), key=lambda k: (sign * scores[k], useful[k]))
    selected = [useful[k] for k in order[:n]]
    return SelectionResult(
        useful_indices=useful,
        selected_indices=selected,
        scores=[float(s) for s in scores],
    )
