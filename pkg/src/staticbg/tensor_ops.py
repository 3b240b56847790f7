"""Dense multi-way array primitives.

Tensors are plain C-contiguous float64 ``numpy.ndarray`` objects with 1 to 4
modes.  Modes are numbered 1..order, matching the usual mode-n unfolding
notation.  All functions are pure: inputs are never mutated.
"""

from typing import NamedTuple

import numpy as np

MAX_ORDER = 4


class TensorNorms(NamedTuple):
    l1: float
    frobenius: float
    max_abs: float


def as_tensor(data) -> np.ndarray:
    """Coerce ``data`` to a C-contiguous float64 array with 1..4 modes."""
    t = np.ascontiguousarray(data, dtype=np.float64)
    if t.ndim == 0:
        t = t.reshape(1)
    if t.ndim > MAX_ORDER:
        raise ValueError(f"tensor order {t.ndim} exceeds maximum {MAX_ORDER}")
    if t.size == 0:
        raise ValueError("tensor must have at least one element per mode")
    return t


def _check_mode(t: np.ndarray, mode: int) -> None:
    if not 1 <= mode <= t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-n unfolding: rows follow ``mode``, columns run over the remaining
    modes lexicographically (lower mode index varies slowest)."""
    _check_mode(t, mode)
    return np.moveaxis(t, mode - 1, 0).reshape(t.shape[mode - 1], -1)


def fold(mat: np.ndarray, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given ``shape``."""
    shape = tuple(int(s) for s in shape)
    if not 1 <= mode <= len(shape):
        raise ValueError(f"mode {mode} out of range for shape {shape}")
    rest = shape[: mode - 1] + shape[mode:]
    t = np.asarray(mat, dtype=np.float64).reshape((shape[mode - 1],) + rest)
    return np.ascontiguousarray(np.moveaxis(t, 0, mode - 1))


def contract(x: np.ndarray, y: np.ndarray, shared_modes: int) -> np.ndarray:
    """Multiply two tensors along their first ``shared_modes`` modes.

    The result has the remaining modes of ``x`` followed by the remaining
    modes of ``y``; entry (n..., m...) is the sum over the shared index range
    of ``x[k..., n...] * y[k..., m...]``.  ``shared_modes == 0`` yields the
    outer product.
    """
    if shared_modes < 0:
        raise ValueError("shared_modes must be non-negative")
    if shared_modes > min(x.ndim, y.ndim):
        raise ValueError(
            f"cannot share {shared_modes} modes between order-{x.ndim} and "
            f"order-{y.ndim} tensors"
        )
    if x.shape[:shared_modes] != y.shape[:shared_modes]:
        raise ValueError(
            f"shared extents differ: {x.shape[:shared_modes]} vs "
            f"{y.shape[:shared_modes]}"
        )
    axes = (tuple(range(shared_modes)), tuple(range(shared_modes)))
    out = np.tensordot(x, y, axes=axes)
    # tensordot of two 1-D arrays returns a 0-d array; keep tensors >= order 1
    if out.ndim == 0:
        out = out.reshape(1)
    return np.ascontiguousarray(out)


def soft_threshold(t: np.ndarray, tau: float) -> np.ndarray:
    """Elementwise shrinkage ``max(t - tau, 0) + min(t + tau, 0)``."""
    if tau < 0:
        raise ValueError(f"threshold must be non-negative, got {tau}")
    return np.maximum(t - tau, 0.0) + np.minimum(t + tau, 0.0)


def norms(t: np.ndarray) -> TensorNorms:
    """l1, Frobenius and max-abs norms in one pass-friendly call."""
    a = np.abs(np.asarray(t, dtype=np.float64))
    return TensorNorms(
        l1=float(a.sum()),
        frobenius=float(np.sqrt(np.square(a).sum())),
        max_abs=float(a.max()) if a.size else 0.0,
    )
