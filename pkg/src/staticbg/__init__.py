"""Static background extraction and foreground segmentation for image sequences.

The pipeline picks a small set of discriminative frames by sparse
self-representation, recovers the static background with an alternating
direction solver plus iterative worst-outlier removal, and segments
per-frame foreground masks with an exact graph-cut energy minimizer.
"""

from .background import (AdmResult, BackgroundResult, EngineConfig, adm_solve,
                         extract_background, remove_worst_outliers)
from .errors import DataError, DivergenceError, IngestError, PipelineError
from .foreground import (MrfParams, detect, estimate_params, mrf_energy,
                         segment, subtract)
from .frame_io import (FrameSequenceSpec, load_sequence, read_tensor,
                       save_frame, to_gray, write_tensor)
from .metrics import (ConfusionCounts, DistanceRatioPoint, FMeasure, confusion,
                      distance_ratio, f_measure, sweep_n_frames)
from .pipeline import background_from_video
from .selection import (SelectionResult, distance_scores, select, sparse_code,
                        useful_frames)
from .synth import SceneConfig, SyntheticScene, generate_scene
from .tensor_ops import as_tensor, contract, fold, norms, soft_threshold, unfold

__version__ = "0.1.0"

__all__ = [
    "AdmResult", "BackgroundResult", "EngineConfig", "adm_solve",
    "extract_background", "remove_worst_outliers",
    "DataError", "DivergenceError", "IngestError", "PipelineError",
    "MrfParams", "detect", "estimate_params", "mrf_energy", "segment",
    "subtract",
    "FrameSequenceSpec", "load_sequence", "read_tensor", "save_frame",
    "to_gray", "write_tensor",
    "ConfusionCounts", "DistanceRatioPoint", "FMeasure", "confusion",
    "distance_ratio", "f_measure", "sweep_n_frames",
    "background_from_video",
    "SelectionResult", "distance_scores", "select", "sparse_code",
    "useful_frames",
    "SceneConfig", "SyntheticScene", "generate_scene",
    "as_tensor", "contract", "fold", "norms", "soft_threshold", "unfold",
    "__version__",
]
