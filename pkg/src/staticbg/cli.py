"""Command line front end.

Subcommands map to pipeline stages: ``synth`` writes a benchmark scene,
``extract`` recovers a background, ``detect`` segments frames against one,
``eval`` scores masks against truth, ``sweep`` traces background quality
versus number of selected frames.

Flags beat the ``--config`` file, which beats built-in defaults.  Config
files hold one ``key = value`` per line with ``#`` comments; keys are the
long flag names.  Reports are JSON; every artifact is written atomically.

Exit codes: 0 success, 2 usage or config error, 3 input or data error,
4 finished without convergence, 5 solver divergence.
"""

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .background import EngineConfig, extract_background
from .errors import DataError, DivergenceError, IngestError
from .foreground import MrfParams, estimate_params, segment
from .frame_io import (TENSOR_MAGIC, FrameSequenceSpec, _atomic_write,
                       _decode_frame, _resolve_paths, load_sequence,
                       read_tensor, save_frame, to_gray, write_tensor)
from .metrics import ConfusionCounts, confusion, f_measure, load_mask, sweep_n_frames
from .selection import (DEFAULT_LAMBDA_REL, DEFAULT_N_SELECT, DEFAULT_TAU_REL,
                        select)
from .synth import SceneConfig, generate_scene, square_position

log = logging.getLogger("staticbg")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NOT_CONVERGED = 4
EXIT_DIVERGED = 5

SUBCOMMANDS = ("extract", "detect", "eval", "sweep", "synth")


class ConfigError(Exception):
    """Bad --config file contents."""


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _nonnegative_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {value}")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _nonnegative_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {value}")
    return value


def _n_values(text):
    """Parse '1,2,5' and '1..30' (optionally '1..30:5') into an int list."""
    values = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                lo, _, rest = part.partition("..")
                hi, _, step = rest.partition(":")
                values.extend(range(int(lo), int(hi) + 1, int(step or 1)))
            else:
                values.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad frame-count list: {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"frame counts must be positive: {text!r}")
    return values


def _common_parent():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, metavar="FILE",
                   help="key = value file supplying flag defaults")
    p.add_argument("--threads", type=_nonnegative_int, default=0, metavar="N",
                   help="worker threads where applicable (0 = auto)")
    p.add_argument("-v", "--verbose", action="store_true",
                   help="debug-level logging")
    p.add_argument("-q", "--quiet", action="store_true",
                   help="errors only")
    return p


def _input_parent():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--input", type=Path, required=True, metavar="PATH",
                   help="frame directory or manifest file")
    p.add_argument("--max-frames", type=_positive_int, default=None, metavar="N",
                   help="use only the first N frames")
    return p


def _selection_parent():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--n-select", type=_positive_int, default=DEFAULT_N_SELECT,
                   metavar="N", help="number of frames to keep for extraction")
    p.add_argument("--lambda-rel", type=_positive_float,
                   default=DEFAULT_LAMBDA_REL, metavar="X",
                   help="sparsity weight relative to the peak correlation")
    p.add_argument("--tau-rel", type=_positive_float, default=DEFAULT_TAU_REL,
                   metavar="X", help="nonzero-row threshold relative to max |C|")
    p.add_argument("--direction", choices=("most-distinct", "least-distinct"),
                   default="most-distinct",
                   help="keep the frames with the largest or smallest scores")
    return p


def _engine_parent():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--mu", type=_positive_float, default=None, metavar="X",
                   help="penalty weight (default: 1/std of the selected stack)")
    p.add_argument("--inner-tol", type=_positive_float, default=1e-4, metavar="X")
    p.add_argument("--inner-max-iter", type=_positive_int, default=100, metavar="N")
    p.add_argument("--outer-tol", type=_positive_float, default=1e-3, metavar="X")
    p.add_argument("--outer-max-iter", type=_positive_int, default=200, metavar="N")
    p.add_argument("--adm-mode", choices=("solve", "single-step"), default="solve",
                   help="run the inner solver to tolerance, or one step per cycle")
    p.add_argument("--warm-start-lambda", action="store_true",
                   help="carry the multiplier across outer cycles")
    p.add_argument("--projection", choices=("mean", "median"), default="mean",
                   help="frame-space projection used for the background update")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="staticbg",
        description="Static background extraction and foreground segmentation.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parent()
    inp = _input_parent()
    sel = _selection_parent()
    eng = _engine_parent()

    p = sub.add_parser("extract", parents=[common, inp, sel, eng],
                       help="recover the static background of a sequence")
    p.add_argument("--out", type=Path, required=True, metavar="DIR")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("detect", parents=[common, inp, sel, eng],
                       help="segment foreground masks against a background")
    p.add_argument("--background", type=Path, default=None, metavar="PATH",
                   help="background artifact (.ten tensor or image)")
    p.add_argument("--extract-first", action="store_true",
                   help="extract the background from --input before detecting")
    p.add_argument("--mask-out", type=Path, required=True, metavar="DIR")
    p.add_argument("--truth-dir", type=Path, default=None, metavar="PATH",
                   help="ground-truth masks; adds metrics to the report")
    p.add_argument("--report", type=Path, default=None, metavar="FILE",
                   help="report path (default: <mask-out>/report.json)")
    p.add_argument("--lambda-a", type=_nonnegative_float, default=None,
                   metavar="X", help="foreground area penalty (default auto)")
    p.add_argument("--lambda-b", type=_nonnegative_float, default=None,
                   metavar="X", help="boundary length penalty (default auto)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", parents=[common],
                       help="score predicted masks against ground truth")
    p.add_argument("--pred-dir", type=Path, required=True, metavar="PATH")
    p.add_argument("--truth-dir", type=Path, required=True, metavar="PATH")
    p.add_argument("--report", type=Path, default=None, metavar="FILE",
                   help="report path (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common, inp, sel, eng],
                       help="background quality versus selected-frame count")
    p.add_argument("--n", type=_n_values, required=True, metavar="LIST",
                   help="counts to test, e.g. '1..30' or '5,10,25'")
    p.add_argument("--standard-n", type=_positive_int, default=40, metavar="N",
                   help="selected-frame count of the standard background")
    p.add_argument("--report", type=Path, required=True, metavar="FILE")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", parents=[common],
                       help="write a synthetic scene with known truth")
    p.add_argument("--out", type=Path, required=True, metavar="DIR")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--frames", type=_positive_int, default=60, metavar="N")
    p.add_argument("--height", type=_positive_int, default=128)
    p.add_argument("--width", type=_positive_int, default=128)
    p.add_argument("--square-size", type=_positive_int, default=24)
    p.add_argument("--speed", type=_positive_int, default=2)
    p.add_argument("--noise-sigma", type=_nonnegative_float, default=0.02)
    p.set_defaults(func=cmd_synth)

    return parser


def _config_tokens(path: Path) -> list:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    tokens = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("_", "-")
        value = value.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        flag = "--" + key
        if value.lower() in ("true", "yes", "on"):
            tokens.append(flag)
        elif value.lower() in ("false", "no", "off"):
            pass
        else:
            tokens.extend([flag, value])
    return tokens


def _apply_config(argv: list) -> list:
    """Splice config-file tokens after the subcommand so real flags win."""
    cfg_path = None
    for i, tok in enumerate(argv):
        if tok == "--config":
            if i + 1 >= len(argv):
                raise ConfigError("--config requires a file argument")
            cfg_path = Path(argv[i + 1])
        elif tok.startswith("--config="):
            cfg_path = Path(tok.split("=", 1)[1])
    if cfg_path is None:
        return argv
    extra = _config_tokens(cfg_path)
    for i, tok in enumerate(argv):
        if tok in SUBCOMMANDS:
            return argv[: i + 1] + extra + argv[i + 1:]
    return argv


def _setup_logging(args) -> None:
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    if getattr(args, "quiet", False):
        level = logging.ERROR
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _write_json(path: Path, payload: dict) -> None:
    data = json.dumps(payload, indent=2, sort_keys=True).encode() + b"\n"
    _atomic_write(Path(path), data)


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        mu=args.mu,
        inner_tol=args.inner_tol,
        inner_max_iter=args.inner_max_iter,
        outer_tol=args.outer_tol,
        outer_max_iter=args.outer_max_iter,
        adm_mode=args.adm_mode.replace("-", "_"),
        warm_start_lambda=args.warm_start_lambda,
        projection=args.projection,
    )


def _pipeline_settings(args) -> dict:
    return {
        "input": str(args.input),
        "max_frames": args.max_frames,
        "n_select": args.n_select,
        "lambda_rel": args.lambda_rel,
        "tau_rel": args.tau_rel,
        "direction": args.direction,
        "mu": args.mu,
        "inner_tol": args.inner_tol,
        "inner_max_iter": args.inner_max_iter,
        "outer_tol": args.outer_tol,
        "outer_max_iter": args.outer_max_iter,
        "adm_mode": args.adm_mode,
        "warm_start_lambda": args.warm_start_lambda,
        "projection": args.projection,
        "threads": args.threads,
    }


def _run_pipeline(args, video):
    """Selection + extraction with per-stage wall times."""
    timings = {}
    t0 = time.perf_counter()
    gray = to_gray(video)
    t1 = time.perf_counter()
    sel = select(gray, n_select=args.n_select, lambda_rel=args.lambda_rel,
                 tau_rel=args.tau_rel,
                 direction=args.direction.replace("-", "_"))
    t2 = time.perf_counter()
    frames = np.ascontiguousarray(video[:, :, :, sel.selected_indices])
    result = extract_background(frames, _engine_config(args))
    t3 = time.perf_counter()
    timings["grayscale_s"] = t1 - t0
    timings["selection_s"] = t2 - t1
    timings["extraction_s"] = t3 - t2
    return result, sel, timings


def cmd_extract(args) -> int:
    t_start = time.perf_counter()
    video, _ = _load_video(args)
    t_loaded = time.perf_counter()
    result, sel, timings = _run_pipeline(args, video)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t_write = time.perf_counter()
    save_frame(result.background, out / "background.png")
    write_tensor(out / "background.ten", result.background)
    _write_json(out / "selection.json", {
        "useful_indices": [int(i) for i in sel.useful_indices],
        "selected_indices": [int(i) for i in sel.selected_indices],
        "scores": [float(s) for s in sel.scores],
    })
    _write_json(out / "convergence.json", {
        "outer_iterations": result.outer_iters,
        "final_relative_change": result.final_rel_change,
        "converged": result.converged,
        "history": [float(h) for h in result.history],
    })
    t_end = time.perf_counter()
    timings["load_s"] = t_loaded - t_start
    timings["write_s"] = t_end - t_write
    timings["total_s"] = t_end - t_start
    _write_json(out / "report.json", {
        "command": "extract",
        "config": _pipeline_settings(args),
        "n_input_frames": int(video.shape[3]),
        "selection": {
            "n_useful": len(sel.useful_indices),
            "selected_indices": [int(i) for i in sel.selected_indices],
        },
        "convergence": {
            "outer_iterations": result.outer_iters,
            "final_relative_change": result.final_rel_change,
            "converged": result.converged,
        },
        "artifacts": ["background.png", "background.ten", "selection.json",
                      "convergence.json"],
        "timings": timings,
    })
    log.info("background written to %s (outer iterations: %d)",
             out / "background.png", result.outer_iters)
    if not result.converged:
        log.warning("outer loop stopped before reaching tolerance")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _load_video(args):
    """Load the input as (video, per-frame source names).

    Accepts a checkpoint tensor (sniffed by magic bytes) as well as an image
    directory or manifest.
    """
    path = Path(args.input)
    if path.is_file():
        with open(path, "rb") as fh:
            magic = fh.read(len(TENSOR_MAGIC))
        if magic == TENSOR_MAGIC:
            video = read_tensor(path)
            if video.ndim != 4 or video.shape[2] != 3:
                raise IngestError(
                    f"{path}: expected an (h, w, 3, n) frame tensor, "
                    f"got shape {video.shape}")
            if args.max_frames is not None:
                video = np.ascontiguousarray(video[..., :args.max_frames])
            names = [f"frame_{i:05d}" for i in range(video.shape[3])]
            return video, names
    spec = FrameSequenceSpec(args.input, args.max_frames)
    paths = _resolve_paths(spec)
    return load_sequence(spec), [p.name for p in paths]


def _load_background(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise IngestError(f"background artifact not found: {path}")
    if path.suffix.lower() == ".ten":
        return read_tensor(path)
    return _decode_frame(path)


def cmd_detect(args) -> int:
    t_start = time.perf_counter()
    video, frame_names = _load_video(args)
    n = video.shape[3]
    exit_code = EXIT_OK
    timings = {"load_s": time.perf_counter() - t_start}

    if args.extract_first:
        result, _, stage_t = _run_pipeline(args, video)
        background = result.background
        background_source = "extracted"
        timings.update(stage_t)
        if not result.converged:
            exit_code = EXIT_NOT_CONVERGED
    elif args.background is not None:
        background = _load_background(args.background)
        background_source = str(args.background)
    else:
        raise ValueError("detect needs --background or --extract-first")

    gray = to_gray(video)
    bg_gray = to_gray(background) if background.ndim == 3 else np.asarray(background)
    if bg_gray.shape != gray.shape[:2]:
        raise DataError(
            f"background shape {bg_gray.shape} does not match frames "
            f"{gray.shape[:2]}")

    truth = None
    if args.truth_dir is not None:
        truth_paths = _resolve_paths(FrameSequenceSpec(args.truth_dir,
                                                       args.max_frames))
        if len(truth_paths) != n:
            raise DataError(
                f"{len(truth_paths)} truth masks for {n} frames")
        truth = truth_paths

    def one(i):
        residual = gray[:, :, i] - bg_gray
        la, lb = args.lambda_a, args.lambda_b
        if la is None or lb is None:
            est = estimate_params(residual)
            la = est.lambda_a if la is None else la
            lb = est.lambda_b if lb is None else lb
        params = MrfParams(lambda_a=la, lambda_b=lb)
        return segment(residual, params), params

    t_seg = time.perf_counter()
    workers = args.threads or min(8, os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(n)))
    else:
        results = [one(i) for i in range(n)]
    timings["segmentation_s"] = time.perf_counter() - t_seg

    mask_dir = Path(args.mask_out)
    mask_dir.mkdir(parents=True, exist_ok=True)
    t_write = time.perf_counter()
    frames_report = []
    agg = np.zeros(4, dtype=np.int64)  # tp, fp, tn, fn
    for i, (mask, params) in enumerate(results):
        name = f"mask_{i:05d}.png"
        save_frame(mask.astype(np.float64), mask_dir / name)
        entry = {
            "index": i,
            "source": frame_names[i],
            "mask": name,
            "lambda_a": params.lambda_a,
            "lambda_b": params.lambda_b,
        }
        if truth is not None:
            t_mask = load_mask(truth[i])
            if t_mask.shape != mask.shape:
                raise DataError(
                    f"truth mask {truth[i]} has shape {t_mask.shape}, "
                    f"expected {mask.shape}")
            c = confusion(mask, t_mask)
            m = f_measure(c)
            agg += (c.tp, c.fp, c.tn, c.fn)
            entry.update(tp=c.tp, fp=c.fp, tn=c.tn, fn=c.fn,
                         precision=m.precision, recall=m.recall, f=m.f)
        frames_report.append(entry)
    timings["write_s"] = time.perf_counter() - t_write
    timings["total_s"] = time.perf_counter() - t_start

    report = {
        "command": "detect",
        "config": _pipeline_settings(args) | {
            "background": background_source,
            "lambda_a": args.lambda_a,
            "lambda_b": args.lambda_b,
            "mask_out": str(mask_dir),
            "truth_dir": str(args.truth_dir) if args.truth_dir else None,
        },
        "n_frames": n,
        "frames": frames_report,
        "timings": timings,
    }
    if truth is not None:
        m = f_measure(ConfusionCounts(*[int(x) for x in agg]))
        report["aggregate"] = {
            "tp": int(agg[0]), "fp": int(agg[1]),
            "tn": int(agg[2]), "fn": int(agg[3]),
            "precision": m.precision, "recall": m.recall, "f": m.f,
        }
    report_path = args.report or mask_dir / "report.json"
    _write_json(report_path, report)
    log.info("%d masks written to %s", n, mask_dir)
    return exit_code


def cmd_eval(args) -> int:
    pred_paths = _resolve_paths(FrameSequenceSpec(args.pred_dir))
    truth_paths = _resolve_paths(FrameSequenceSpec(args.truth_dir))
    if len(pred_paths) != len(truth_paths):
        raise DataError(
            f"{len(pred_paths)} predictions vs {len(truth_paths)} truth masks")
    frames_report = []
    agg = np.zeros(4, dtype=np.int64)
    for p, t in zip(pred_paths, truth_paths):
        pred = load_mask(p)
        truth = load_mask(t)
        if pred.shape != truth.shape:
            raise DataError(
                f"shape mismatch: {p} is {pred.shape}, {t} is {truth.shape}")
        c = confusion(pred, truth)
        m = f_measure(c)
        agg += (c.tp, c.fp, c.tn, c.fn)
        frames_report.append({
            "pred": p.name, "truth": t.name,
            "tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn,
            "precision": m.precision, "recall": m.recall, "f": m.f,
        })
    m = f_measure(ConfusionCounts(*[int(x) for x in agg]))
    report = {
        "command": "eval",
        "config": {"pred_dir": str(args.pred_dir),
                   "truth_dir": str(args.truth_dir)},
        "frames": frames_report,
        "aggregate": {
            "tp": int(agg[0]), "fp": int(agg[1]),
            "tn": int(agg[2]), "fn": int(agg[3]),
            "precision": m.precision, "recall": m.recall, "f": m.f,
        },
    }
    if args.report is not None:
        _write_json(args.report, report)
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    t_start = time.perf_counter()
    video, _ = _load_video(args)
    if args.standard_n < max(args.n):
        raise ValueError(
            f"--standard-n {args.standard_n} is below max --n {max(args.n)}")
    result = sweep_n_frames(
        video, args.n, args.standard_n,
        lambda_rel=args.lambda_rel, tau_rel=args.tau_rel,
        direction=args.direction.replace("-", "_"),
        engine_cfg=_engine_config(args))
    report = {
        "command": "sweep",
        "config": _pipeline_settings(args) | {
            "n": args.n, "standard_n": args.standard_n,
        },
        "points": [{"n_frames": p.n_frames, "ratio": p.ratio}
                   for p in result.points],
        "timings": {"total_s": time.perf_counter() - t_start},
    }
    _write_json(args.report, report)
    log.info("sweep over %d counts written to %s", len(args.n), args.report)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = SceneConfig(height=args.height, width=args.width,
                      n_frames=args.frames, square_size=args.square_size,
                      speed=args.speed, noise_sigma=args.noise_sigma,
                      seed=args.seed)
    scene = generate_scene(cfg)
    out = Path(args.out)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    for t in range(cfg.n_frames):
        save_frame(scene.frames[:, :, :, t], out / "frames" / f"frame_{t:05d}.png")
        save_frame(scene.masks[:, :, t].astype(np.float64),
                   out / "masks" / f"mask_{t:05d}.png")
    save_frame(scene.background, out / "background.png")
    write_tensor(out / "background.ten", scene.background)
    write_tensor(out / "frames.ten", scene.frames)
    _write_json(out / "scene.json", {
        "command": "synth",
        "config": {
            "height": cfg.height, "width": cfg.width, "n_frames": cfg.n_frames,
            "square_size": cfg.square_size, "speed": cfg.speed,
            "noise_sigma": cfg.noise_sigma, "seed": cfg.seed,
            "square_color": list(cfg.square_color),
        },
        "occlusion_fraction": scene.occlusion_fraction,
        "trajectory": [list(map(int, square_position(cfg, t)))
                       for t in range(cfg.n_frames)],
    })
    log.info("scene with %d frames written to %s", cfg.n_frames, out)
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        argv = _apply_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    _setup_logging(args)
    try:
        return args.func(args)
    except DivergenceError as exc:
        log.error("solver diverged: %s", exc)
        return EXIT_DIVERGED
    except (IngestError, DataError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
