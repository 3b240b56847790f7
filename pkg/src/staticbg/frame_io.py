"""Frame-sequence ingestion, grayscale conversion and artifact output.

Sequences come either from a directory of lossless raster images (sorted
lexicographically by filename) or from a manifest text file listing one image
path per line.  Loaded videos are 4-mode tensors of shape ``(h, w, 3, n)``
with values in [0, 1].

Intermediate tensors round-trip bit-exactly through a small binary format:
8-byte magic ``BGTENSR1``, the mode count as unsigned 64-bit little-endian,
one unsigned 64-bit little-endian extent per mode, then the float64
little-endian entries in row-major order.
"""

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import IngestError
from .tensor_ops import MAX_ORDER

TENSOR_MAGIC = b"BGTENSR1"

#: ITU-R BT.601 luma weights for R, G, B.
GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])

IMAGE_EXTENSIONS = {".png", ".ppm", ".pgm", ".pbm", ".bmp", ".tif", ".tiff"}


@dataclass
class FrameSequenceSpec:
    """Where a frame sequence comes from and how many frames to take.

    ``source`` is a directory (lexicographic filename order) or a manifest
    file with one image path per line (order preserved, relative paths
    resolved against the manifest's directory).
    """

    source: Path
    max_frames: Optional[int] = None

    def __post_init__(self):
        self.source = Path(self.source)
        if self.max_frames is not None and self.max_frames < 1:
            raise ValueError("max_frames must be positive when given")


def _resolve_paths(spec: FrameSequenceSpec) -> list:
    src = spec.source
    if src.is_dir():
        paths = sorted(
            p for p in src.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
        )
    elif src.is_file():
        base = src.parent
        paths = []
        for line in src.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            p = Path(line)
            paths.append(p if p.is_absolute() else base / p)
    else:
        raise IngestError(f"sequence source does not exist: {src}")
    if not paths:
        raise IngestError(f"no frames found in {src}")
    if spec.max_frames is not None:
        paths = paths[: spec.max_frames]
    return paths


def _decode_frame(path: Path) -> np.ndarray:
    """Decode one image to an (h, w, 3) float64 array in [0, 1]."""
    try:
        with Image.open(path) as img:
            mode = img.mode
            if mode in ("I", "I;16"):
                arr = np.asarray(img, dtype=np.float64) / 65535.0
            else:
                if mode not in ("L", "RGB"):
                    img = img.convert("RGB")
                arr = np.asarray(img, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise IngestError(f"cannot decode frame {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise IngestError(f"unsupported channel layout in {path}: shape {arr.shape}")
    return np.clip(arr, 0.0, 1.0)


def load_sequence(spec: FrameSequenceSpec) -> np.ndarray:
    """Load a sequence into an ``(h, w, 3, n)`` tensor with values in [0, 1]."""
    paths = _resolve_paths(spec)
    frames = []
    shape = None
    for p in paths:
        arr = _decode_frame(p)
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise IngestError(
                f"frame {p} has shape {arr.shape[:2]}, expected {shape[:2]}"
            )
        frames.append(arr)
    return np.ascontiguousarray(np.stack(frames, axis=-1))


def to_gray(frames: np.ndarray) -> np.ndarray:
    """Collapse the channel mode with BT.601 luma; (h, w, 3, n) -> (h, w, n)."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim not in (3, 4) or frames.shape[2] != 3:
        raise ValueError(f"expected 3 channels on mode 3, got shape {frames.shape}")
    gray = np.tensordot(frames, GRAY_WEIGHTS, axes=([2], [0]))
    return np.clip(np.ascontiguousarray(gray), 0.0, 1.0)


def _atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_frame(frame: np.ndarray, path) -> None:
    """Write a [0,1] frame or a {0,1} mask as an 8-bit PNG (or PPM/BMP...).

    Masks (2-D arrays) are written black/white; color frames must be
    ``(h, w, 3)``.  The file is written atomically.
    """
    path = Path(path)
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim == 2:
        values = np.unique(arr)
        if not np.all(np.isin(values, (0.0, 1.0))):
            raise ValueError("mask values must be exactly 0 or 1")
        img = Image.fromarray((arr * 255).astype(np.uint8), mode="L")
    elif arr.ndim == 3 and arr.shape[2] == 3:
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("frame values must lie in [0, 1]")
        img = Image.fromarray(np.rint(arr * 255).astype(np.uint8), mode="RGB")
    else:
        raise ValueError(f"expected (h, w) mask or (h, w, 3) frame, got {arr.shape}")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    os.close(fd)
    try:
        img.save(tmp, format=_format_for(path))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_for(path: Path):
    ext = path.suffix.lower()
    if ext in (".ppm", ".pgm", ".pbm"):
        return "PPM"
    if ext == ".bmp":
        return "BMP"
    if ext in (".tif", ".tiff"):
        return "TIFF"
    return "PNG"


def write_tensor(path, t: np.ndarray) -> None:
    """Serialize a 1..4-mode float64 tensor to the binary tensor format."""
    t = np.ascontiguousarray(t, dtype=np.float64)
    if not 1 <= t.ndim <= MAX_ORDER:
        raise ValueError(f"tensor order must be 1..{MAX_ORDER}, got {t.ndim}")
    header = TENSOR_MAGIC + struct.pack("<Q", t.ndim)
    header += struct.pack(f"<{t.ndim}Q", *t.shape)
    _atomic_write(Path(path), header + t.astype("<f8").tobytes(order="C"))


def read_tensor(path) -> np.ndarray:
    """Read a tensor written by :func:`write_tensor` (bit-exact)."""
    raw = Path(path).read_bytes()
    if raw[: len(TENSOR_MAGIC)] != TENSOR_MAGIC:
        raise IngestError(f"{path}: not a tensor file (bad magic)")
    off = len(TENSOR_MAGIC)
    (order,) = struct.unpack_from("<Q", raw, off)
    off += 8
    if not 1 <= order <= MAX_ORDER:
        raise IngestError(f"{path}: unsupported tensor order {order}")
    if len(raw) < off + 8 * order:
        raise IngestError(f"{path}: truncated tensor header")
    shape = struct.unpack_from(f"<{order}Q", raw, off)
    off += 8 * order
    count = int(np.prod(shape))
    if len(raw) < off + 8 * count:
        raise IngestError(f"{path}: truncated tensor payload")
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
    return np.ascontiguousarray(data.reshape(shape))
