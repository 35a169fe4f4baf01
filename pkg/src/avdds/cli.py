"""Batch CLI: edit clips, run job lists, evaluate outputs, sweep ablations.

Verbs:
    edit      one clip -> one output directory
    batch     every job in a config document (worker pool)
    eval      metric report over finished output directories
    sweep     threshold / grid ablation over one job
    selftest  toy-backend oracle battery
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import multiprocessing
import sys
import time
from pathlib import Path

import numpy as np

from .backends.base import BackendDescriptor, DenoiserHandle, load_backend
from .backends.toy import ToyDenoiser
from .config import JobSpec, load_config
from .editor import EditConfig, run_edit
from .exceptions import ConfigurationError
from .latents import AudioLatent, PromptPair, VideoLatent
from .media import (
    MediaClip,
    ingest_media,
    mel_spectrogram,
    prepare_out_dir,
    write_outputs,
    write_relevance_heatmaps,
)
from .metrics import AvAlignConfig, MetricReport, evaluate_clip, make_stub_embedders
from .selftest import run_selftest

DEFAULT_FRAME_HW = (8, 8)
DEFAULT_CHANNELS = 4
DEFAULT_AUDIO_HW = (16, 16)
DEFAULT_MEL = {"n_mels": 64, "hop_s": 0.010, "win_s": 0.025}


def _toy_video_backend(config: EditConfig) -> ToyDenoiser:
    fh, fw = DEFAULT_FRAME_HW
    return ToyDenoiser("video-grid", (DEFAULT_CHANNELS, fh * config.n_g, fw * config.n_g),
                       seed=config.seed, frame_hw=DEFAULT_FRAME_HW)


def _toy_audio_backend(config: EditConfig) -> ToyDenoiser:
    return ToyDenoiser("audio", (DEFAULT_CHANNELS,) + DEFAULT_AUDIO_HW, seed=config.seed)


def build_backends(descriptor_paths, config: EditConfig) -> tuple[DenoiserHandle, DenoiserHandle, dict]:
    """Resolve (video, audio) backends from descriptor files, toy defaults
    filling any missing modality. Returns the audio mel parameters too."""
    video = audio = None
    mel = dict(DEFAULT_MEL)
    for path in descriptor_paths or []:
        descriptor = BackendDescriptor.from_file(path)
        handle = load_backend(descriptor)
        if descriptor.modality == "video-grid":
            video = handle
        else:
            audio = handle
            mel.update(descriptor.options.get("mel", {}))
    if video is None:
        video = _toy_video_backend(config)
    if audio is None:
        audio = _toy_audio_backend(config)
    return video, audio, mel


def encode_clip(clip: MediaClip, video_backend: DenoiserHandle,
                audio_backend: DenoiserHandle, mel_params: dict) -> tuple[VideoLatent, AudioLatent]:
    video_data = video_backend.encode_media(clip.frames)
    mel = mel_spectrogram(clip.waveform, clip.sample_rate, **mel_params)
    audio_data = audio_backend.encode_media(mel)
    return (VideoLatent(video_data, frame_rate=clip.fps),
            AudioLatent(audio_data, duration=clip.duration))


def _apply_cli_overrides(config: EditConfig, args) -> EditConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "steps", None) is not None:
        overrides["total_steps"] = args.steps
    if getattr(args, "tau_a", None) is not None:
        overrides["tau_a"] = args.tau_a
    if getattr(args, "tau_v", None) is not None:
        overrides["tau_v"] = args.tau_v
    if getattr(args, "pairing_variant", None) is not None:
        overrides["pairing_variant"] = args.pairing_variant
    if getattr(args, "debug_relevance", False):
        overrides["debug_relevance"] = True
    if not overrides:
        return config
    merged = dict(config.to_dict())
    merged.update(overrides)
    return EditConfig.from_mapping(merged, path="cli")


def run_one_edit(clip_path, prompts: PromptPair, out_dir, config: EditConfig,
                 descriptor_paths=None, *, fps: float = 4.0, sample_rate: int = 16000,
                 force: bool = False) -> Path:
    """Ingest, encode, optimize, decode, and persist one clip."""
    video_backend, audio_backend, mel_params = build_backends(descriptor_paths, config)
    clip = ingest_media(clip_path, fps=fps, sample_rate=sample_rate)
    video, audio = encode_clip(clip, video_backend, audio_backend, mel_params)

    out_dir = Path(out_dir)
    callback = None
    if config.debug_relevance:
        heatmap_dir = out_dir.parent / (out_dir.name + ".relevance.tmp")

        def callback(record, debug):  # noqa: ANN001
            if debug is not None:
                write_relevance_heatmaps(debug, heatmap_dir, record["step"])

    checkpoint_dir = out_dir.parent / (out_dir.name + ".checkpoints.tmp") \
        if config.checkpoint_every > 0 else None

    started = time.perf_counter()
    edited_video, edited_audio, log = run_edit(
        video, audio, prompts, (video_backend, audio_backend), config,
        checkpoint_dir=checkpoint_dir, step_callback=callback)
    elapsed = time.perf_counter() - started

    resolved = {
        "edit": config.to_dict(),
        "prompts": {"y_src": prompts.y_src, "y_trg": prompts.y_trg},
        "clip": str(clip_path),
        "fps": fps,
        "sample_rate": sample_rate,
        "backends": [str(p) for p in (descriptor_paths or [])] or ["toy (built-in)"],
    }
    write_outputs(edited_video, edited_audio, video_backend, audio_backend, out_dir,
                  log, resolved, force=force, source_clip=clip, sample_rate=sample_rate)
    # wall-clock lives outside runlog.jsonl so reruns stay byte-identical
    (out_dir / "timing.json").write_text(json.dumps({"wall_time_s": elapsed}) + "\n")
    for tmp_name, final_name in ((".relevance.tmp", "relevance"),
                                 (".checkpoints.tmp", "checkpoints")):
        tmp = out_dir.parent / (out_dir.name + tmp_name)
        if tmp.exists():
            tmp.rename(out_dir / final_name)
    return out_dir


def _cmd_edit(args) -> int:
    config, jobs = (load_config(args.config) if args.config else (EditConfig(), []))
    config = _apply_cli_overrides(config, args)
    if args.clip is None:
        if not jobs:
            raise ConfigurationError("either --clip or a config with jobs is required")
        job = jobs[0]
        prompts = PromptPair(y_trg=job.y_trg, y_src=job.y_src)
        out = run_one_edit(job.clip, prompts, args.out or job.out, job.config(config),
                           args.backend, fps=job.fps, sample_rate=job.sample_rate,
                           force=args.force)
    else:
        if args.y_trg is None or args.out is None:
            raise ConfigurationError("--clip requires --y-trg and --out")
        prompts = PromptPair(y_trg=args.y_trg, y_src=args.y_src)
        out = run_one_edit(args.clip, prompts, args.out, config, args.backend,
                           fps=args.fps, sample_rate=args.sample_rate, force=args.force)
    print(f"edited -> {out}")
    return 0


def _run_job_payload(payload: dict) -> tuple[str, str]:
    job = JobSpec(**payload["job"])
    config = job.config(EditConfig.from_mapping(payload["config"], path="edit"))
    prompts = PromptPair(y_trg=job.y_trg, y_src=job.y_src)
    try:
        run_one_edit(job.clip, prompts, job.out, config, payload["backends"],
                     fps=job.fps, sample_rate=job.sample_rate, force=payload["force"])
    except Exception as exc:  # noqa: BLE001 - reported per job
        return job.out, f"FAILED: {exc}"
    return job.out, "ok"


def _cmd_batch(args) -> int:
    if not args.config:
        raise ConfigurationError("batch requires --config")
    config, jobs = load_config(args.config)
    config = _apply_cli_overrides(config, args)
    if not jobs:
        print("no jobs in config")
        return 0
    payloads = [{"job": {"clip": j.clip, "y_trg": j.y_trg, "out": j.out, "y_src": j.y_src,
                         "fps": j.fps, "sample_rate": j.sample_rate,
                         "target_object": j.target_object, "overrides": j.overrides},
                 "config": config.to_dict(), "backends": args.backend or [],
                 "force": args.force} for j in jobs]
    failures = 0
    if args.workers > 1:
        # spawn context: forking with torch's thread pools live can deadlock
        ctx = multiprocessing.get_context("spawn")
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers,
                                                    mp_context=ctx) as pool:
            results = list(pool.map(_run_job_payload, payloads))
    else:
        results = [_run_job_payload(p) for p in payloads]
    for out, status in results:
        print(f"{out}: {status}")
        failures += status != "ok"
    return 1 if failures else 0


def _read_output_dir(out_dir: Path) -> tuple[np.ndarray, np.ndarray, int]:
    from PIL import Image
    from scipy.io import wavfile
    frame_files = sorted((out_dir / "frames").glob("frame_*.png"))
    if not frame_files:
        raise ConfigurationError(f"{out_dir} has no decoded frames (run edit first)")
    frames = np.stack([np.asarray(Image.open(p).convert("RGB")) for p in frame_files])
    rate, wave = wavfile.read(out_dir / "audio.wav")
    wave = wave.astype(np.float64) / 32767.0
    return frames, wave, int(rate)


def _load_embedders(spec: str, seed: int) -> dict:
    if spec == "stub":
        return make_stub_embedders(seed=seed)
    module_name, _, attr = spec.partition(":")
    if not attr:
        raise ConfigurationError("--embedders must be 'stub' or 'package.module:factory'")
    import importlib
    factory = getattr(importlib.import_module(module_name), attr)
    return factory()


def evaluate_jobs(jobs, embedders: dict, window: float = 0.1) -> MetricReport:
    av_config = AvAlignConfig(window_s=window)
    report = MetricReport(config={"av_align": av_config.to_dict(),
                                  "embedders": {k: v.name for k, v in embedders.items()}})

    def one_clip(job) -> dict:
        clip = ingest_media(job.clip, fps=job.fps, sample_rate=job.sample_rate)
        frames_edit, wave_edit, rate = _read_output_dir(Path(job.out))
        if rate != job.sample_rate:
            wave_edit = np.interp(
                np.linspace(0, 1, int(len(wave_edit) * job.sample_rate / rate)),
                np.linspace(0, 1, len(wave_edit)), wave_edit)
        return evaluate_clip(
            name=Path(job.out).name,
            frames_src=list(clip.frames), frames_edited=list(frames_edit),
            waveform_src=clip.waveform, waveform_edited=wave_edit,
            sample_rate=job.sample_rate, fps=job.fps, target_prompt=job.y_trg,
            embedders=embedders, detector=None, target_object=job.target_object,
            av_config=av_config)

    # clips are independent; parallelize when every embedder allows it
    if len(jobs) > 1 and all(h.thread_safe for h in embedders.values()):
        with concurrent.futures.ThreadPoolExecutor() as pool:
            report.rows.extend(pool.map(one_clip, jobs))
    else:
        report.rows.extend(one_clip(job) for job in jobs)
    return report


def _cmd_eval(args) -> int:
    if not args.config:
        raise ConfigurationError("eval requires --config with jobs")
    _, jobs = load_config(args.config)
    if not jobs:
        raise ConfigurationError("config has no jobs to evaluate")
    embedders = _load_embedders(args.embedders, args.seed or 0)
    report = evaluate_jobs(jobs, embedders, window=args.window)
    out_dir = prepare_out_dir(args.out or "report", force=args.force)
    report.to_csv(out_dir / "report.csv")
    report.to_json(out_dir / "report.json")
    agg = report.aggregate
    print("aggregate: " + ", ".join(f"{k}={v:.4f}" if v is not None else f"{k}=absent"
                                    for k, v in agg.items()))
    print(f"report -> {out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    if not args.config:
        raise ConfigurationError("sweep requires --config with at least one job")
    config, jobs = load_config(args.config)
    config = _apply_cli_overrides(config, args)
    if not jobs:
        raise ConfigurationError("config has no jobs to sweep over")
    job = jobs[0]
    out_root = prepare_out_dir(args.out or "sweep", force=args.force)
    embedders = _load_embedders(args.embedders, config.seed)

    rows = []
    for value in args.values:
        merged = dict(job.config(config).to_dict())
        if args.param == "tau":
            merged["tau_a"] = merged["tau_v"] = float(value)
        elif args.param == "grid":
            merged["n_g"] = int(value)
        run_config = EditConfig.from_mapping(merged, path="sweep")
        run_dir = out_root / f"{args.param}_{value}"
        prompts = PromptPair(y_trg=job.y_trg, y_src=job.y_src)
        run_one_edit(job.clip, prompts, run_dir, run_config, args.backend,
                     fps=job.fps, sample_rate=job.sample_rate, force=True)
        sweep_job = JobSpec(clip=job.clip, y_trg=job.y_trg, out=str(run_dir),
                            y_src=job.y_src, fps=job.fps, sample_rate=job.sample_rate,
                            target_object=job.target_object)
        report = evaluate_jobs([sweep_job], embedders, window=args.window)
        row = {"value": float(value), **report.aggregate}
        rows.append(row)
        print(f"{args.param}={value}: " + ", ".join(
            f"{k}={v:.4f}" for k, v in report.aggregate.items() if v is not None))

    import csv
    with open(out_root / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    _plot_sweep(rows, args.param, out_root / "sweep.png")
    print(f"sweep -> {out_root}")
    return 0


def _plot_sweep(rows, param: str, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    metrics = ("dino", "lpaps", "av_align")
    fig, axes = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 3))
    xs = [r["value"] for r in rows]
    for ax, metric in zip(axes, metrics):
        ys = [r[metric] for r in rows]
        ax.plot(xs, ys, marker="o")
        ax.set_xlabel(param)
        ax.set_title(metric)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config document (YAML/JSON)")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--force", action="store_true",
                        help="replace a non-empty output directory")
    parser.add_argument("--backend", action="append", metavar="DESCRIPTOR",
                        help="backend adapter descriptor JSON (repeat per modality)")
    parser.add_argument("--pairing-variant", choices=("eq7-as-written", "eq7-plus-intramodal"))
    parser.add_argument("--steps", type=int, help="override total optimization steps")
    parser.add_argument("--tau-a", type=float, help="audio relevance threshold")
    parser.add_argument("--tau-v", type=float, help="video relevance threshold")
    parser.add_argument("--debug-relevance", action="store_true",
                        help="dump per-step relevance heatmaps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avdds",
        description="Zero-shot joint audio-video editing by cross-modal delta denoising")
    sub = parser.add_subparsers(dest="command", required=True)

    p_edit = sub.add_parser("edit", help="edit a single clip")
    _add_common(p_edit)
    p_edit.add_argument("--clip", help="video file or frame directory (+wav)")
    p_edit.add_argument("--y-trg", help="target prompt")
    p_edit.add_argument("--y-src", help="source prompt (optional)")
    p_edit.add_argument("--fps", type=float, default=4.0)
    p_edit.add_argument("--sample-rate", type=int, default=16000)
    p_edit.set_defaults(func=_cmd_edit)

    p_batch = sub.add_parser("batch", help="run every job in a config")
    _add_common(p_batch)
    p_batch.add_argument("--workers", type=int, default=1)
    p_batch.set_defaults(func=_cmd_batch)

    p_eval = sub.add_parser("eval", help="compute metrics over finished outputs")
    _add_common(p_eval)
    p_eval.add_argument("--embedders", default="stub",
                        help="'stub' or 'package.module:factory' returning embedder handles")
    p_eval.add_argument("--window", type=float, default=0.1,
                        help="audio-visual alignment matching window, seconds")
    p_eval.set_defaults(func=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="threshold/grid ablation over one job")
    _add_common(p_sweep)
    p_sweep.add_argument("--param", choices=("tau", "grid"), default="tau")
    p_sweep.add_argument("--values", nargs="+", type=float, required=True)
    p_sweep.add_argument("--embedders", default="stub")
    p_sweep.add_argument("--window", type=float, default=0.1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_self = sub.add_parser("selftest", help="run the toy-backend oracle battery")
    p_self.set_defaults(func=lambda args: run_selftest())
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, FileExistsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
