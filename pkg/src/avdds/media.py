"""Media ingestion, mel spectrograms, and output writing.

Clips come in as a video container (frames read with OpenCV, audio from a
same-stem sidecar wav or an ffmpeg binary when present) or as a frame
directory plus wav. Frames are resampled to the configured fps and the
waveform to the backend's expected rate; audio enters the latent pipeline as
a log-mel spectrogram whose parameters live in the audio backend descriptor.
"""

from __future__ import annotations

import json
import shutil
import subprocess
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image
from scipy import signal
from scipy.io import wavfile

from .exceptions import ConfigurationError
from .latents import AudioLatent, VideoLatent

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass
class MediaClip:
    frames: np.ndarray  # (T, H, W, 3) uint8
    fps: float
    waveform: np.ndarray  # mono float in [-1, 1]
    sample_rate: int

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ConfigurationError("frames must have shape (T, H, W, 3)")
        if self.waveform.ndim != 1:
            raise ConfigurationError("waveform must be mono")

    @property
    def duration(self) -> float:
        return len(self.waveform) / self.sample_rate

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])


def _load_wav(path: Path) -> tuple[np.ndarray, int]:
    rate, raw = wavfile.read(path)
    raw = np.asarray(raw)
    values = raw.astype(np.float64)
    if values.ndim == 2:
        values = values.mean(axis=1)
    if np.issubdtype(raw.dtype, np.integer):
        info = np.iinfo(raw.dtype)
        values = values / max(abs(info.min), info.max)
    return values, int(rate)


def _resample_waveform(waveform: np.ndarray, orig_sr: int, target_sr: int) -> np.ndarray:
    if orig_sr == target_sr:
        return waveform
    frac = Fraction(target_sr, orig_sr).limit_denominator(1000)
    return signal.resample_poly(waveform, frac.numerator, frac.denominator)


def _resample_frames(frames: np.ndarray, native_fps: float, target_fps: float) -> np.ndarray:
    if abs(native_fps - target_fps) < 1e-9:
        return frames
    duration = frames.shape[0] / native_fps
    n_out = max(1, int(round(duration * target_fps)))
    src = [min(frames.shape[0] - 1, int((k + 0.5) / target_fps * native_fps))
           for k in range(n_out)]
    return frames[np.asarray(src)]


def _frames_from_directory(path: Path) -> np.ndarray:
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise ConfigurationError(f"no image frames found in {path}")
    frames = [np.asarray(Image.open(p).convert("RGB")) for p in files]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ConfigurationError(f"frames in {path} have mixed resolutions: {sorted(shapes)}")
    return np.stack(frames, axis=0)


def _frames_from_video(path: Path) -> tuple[np.ndarray, float]:
    import cv2
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise ConfigurationError(f"cannot open video file {path}")
    native_fps = cap.get(cv2.CAP_PROP_FPS) or 0.0
    frames = []
    while True:
        ok, frame = cap.read()
        if not ok:
            break
        frames.append(frame[:, :, ::-1].copy())  # BGR -> RGB
    cap.release()
    if not frames:
        raise ConfigurationError(f"no frames decoded from {path}")
    if native_fps <= 0:
        raise ConfigurationError(f"video {path} reports no frame rate")
    return np.stack(frames, axis=0), float(native_fps)


def _audio_for_video(path: Path) -> tuple[np.ndarray, int]:
    sidecar = path.with_suffix(".wav")
    if sidecar.exists():
        return _load_wav(sidecar)
    ffmpeg = shutil.which("ffmpeg")
    if ffmpeg is None:
        raise ConfigurationError(
            f"no audio for {path}: provide a sidecar {sidecar.name} or install ffmpeg")
    tmp = path.with_suffix(".extracted.wav")
    try:
        subprocess.run([ffmpeg, "-y", "-i", str(path), "-ac", "1", str(tmp)],
                       check=True, capture_output=True)
        return _load_wav(tmp)
    finally:
        tmp.unlink(missing_ok=True)


def ingest_media(path, *, fps: float = 4.0, sample_rate: int = 16000) -> MediaClip:
    """Load a clip and normalize it to the configured fps and sample rate.

    ``path`` is either a video file (frames at the container's native rate,
    resampled to ``fps``) or a directory of numbered frames plus a single wav
    (directory frames are taken to already be at ``fps``). Frame span and
    audio duration must agree within one frame period.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"clip path does not exist: {path}")
    if path.is_dir():
        frames = _frames_from_directory(path)
        wavs = sorted(path.glob("*.wav"))
        if len(wavs) != 1:
            raise ConfigurationError(f"frame directory {path} must contain exactly one wav, "
                                     f"found {len(wavs)}")
        waveform, orig_sr = _load_wav(wavs[0])
        audio_duration = len(waveform) / orig_sr
        native_fps = float(fps)  # directory frames carry no rate of their own
    else:
        frames, native_fps = _frames_from_video(path)
        waveform, orig_sr = _audio_for_video(path)
        audio_duration = len(waveform) / orig_sr

    frame_span = frames.shape[0] / native_fps
    if abs(frame_span - audio_duration) > 1.0 / native_fps:
        raise ConfigurationError(
            f"duration mismatch: {frame_span:.3f}s of frames vs {audio_duration:.3f}s of audio")

    frames = _resample_frames(frames, native_fps, fps)
    waveform = _resample_waveform(waveform, orig_sr, sample_rate)
    return MediaClip(frames=frames.astype(np.uint8), fps=float(fps),
                     waveform=np.asarray(waveform, dtype=np.float64),
                     sample_rate=int(sample_rate))


# --- mel spectrogram ------------------------------------------------------------

def _mel_scale(freq: np.ndarray) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + freq / 700.0)


def _mel_inverse(mel: np.ndarray) -> np.ndarray:
    return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int,
                   fmin: float = 0.0, fmax: Optional[float] = None) -> np.ndarray:
    """Triangular mel filters (HTK scale), shape (n_mels, n_fft//2 + 1)."""
    fmax = fmax if fmax is not None else sample_rate / 2.0
    freqs = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    mel_points = np.linspace(_mel_scale(np.asarray(fmin)), _mel_scale(np.asarray(fmax)), n_mels + 2)
    hz_points = _mel_inverse(mel_points)
    bank = np.zeros((n_mels, freqs.size))
    for m in range(n_mels):
        lo, center, hi = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        rising = (freqs - lo) / max(center - lo, 1e-12)
        falling = (hi - freqs) / max(hi - center, 1e-12)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def mel_spectrogram(waveform: np.ndarray, sample_rate: int, *, n_mels: int = 64,
                    hop_s: float = 0.010, win_s: float = 0.025,
                    fmin: float = 0.0, fmax: Optional[float] = None) -> np.ndarray:
    """Log power mel spectrogram, shape (n_mels, frames)."""
    nperseg = max(16, int(round(win_s * sample_rate)))
    hop = max(1, int(round(hop_s * sample_rate)))
    _, _, spec = signal.stft(waveform, fs=sample_rate, nperseg=nperseg,
                             noverlap=nperseg - hop, boundary="zeros")
    power = np.abs(spec) ** 2
    bank = mel_filterbank(sample_rate, nperseg, n_mels, fmin, fmax)
    mel = bank @ power
    return np.log10(np.maximum(mel, 1e-10))


# --- outputs --------------------------------------------------------------------

def _to_grayscale_png(values: np.ndarray, path: Path) -> None:
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = arr.min(), arr.max()
    scaled = np.zeros_like(arr) if hi == lo else (arr - lo) / (hi - lo)
    Image.fromarray((scaled * 255).astype(np.uint8), mode="L").save(path)


def write_relevance_heatmaps(debug_payload: dict, out_dir, step: int) -> None:
    """Dump per-step relevance maps as grayscale images (debug flag path)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ah, aw = debug_payload["patch_hw_audio"]
    _to_grayscale_png(debug_payload["relevance_audio_target"].reshape(ah, aw),
                      out_dir / f"step_{step:04d}_audio.png")
    vh, vw = debug_payload["patch_hw_video"]
    video = debug_payload["relevance_video_target"]
    for m in range(video.shape[0]):
        _to_grayscale_png(video[m].reshape(vh, vw),
                          out_dir / f"step_{step:04d}_video_grid{m}.png")


def _write_video_container(frames: np.ndarray, fps: float, path: Path) -> bool:
    import cv2
    height, width = frames.shape[1:3]
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"),
                             max(fps, 1.0), (width, height))
    if not writer.isOpened():
        return False
    for frame in frames:
        writer.write(frame[:, :, ::-1])  # RGB -> BGR
    writer.release()
    return True


def prepare_out_dir(out_dir, force: bool = False) -> Path:
    """Create the output directory; refuse to write into a non-empty one
    unless forced (forcing wipes it)."""
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()):
        if not force:
            raise FileExistsError(f"output directory {out_dir} is not empty; pass --force to replace")
        shutil.rmtree(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def write_outputs(edited_video: VideoLatent, edited_audio: AudioLatent,
                  video_backend, audio_backend, out_dir, run_log,
                  resolved_config: dict, *, force: bool = False,
                  source_clip: Optional[MediaClip] = None,
                  sample_rate: int = 16000) -> Path:
    """Decode and persist one finished edit.

    Layout: frames/ (numbered pngs), video.avi, audio.wav, spectrogram.png,
    runlog.jsonl, config.resolved. Cleans up the directory on write failure.
    """
    out_dir = prepare_out_dir(out_dir, force=force)
    try:
        frames = video_backend.decode_media(edited_video.data)
        frames_dir = out_dir / "frames"
        frames_dir.mkdir()
        for i, frame in enumerate(frames):
            Image.fromarray(frame).save(frames_dir / f"frame_{i:04d}.png")
        _write_video_container(frames, edited_video.frame_rate, out_dir / "video.avi")

        waveform = audio_backend.decode_waveform(edited_audio.data, edited_audio.duration,
                                                 sample_rate)
        pcm = np.clip(waveform, -1.0, 1.0)
        wavfile.write(out_dir / "audio.wav", sample_rate, (pcm * 32767).astype(np.int16))

        edited_mel = audio_backend.decode_media(edited_audio.data)
        if source_clip is not None:
            source_mel = mel_spectrogram(source_clip.waveform, source_clip.sample_rate,
                                         n_mels=edited_mel.shape[0])
            h = min(source_mel.shape[0], edited_mel.shape[0])
            pad = np.full((h, 4), source_mel.min())
            side_by_side = np.concatenate(
                [source_mel[:h], pad, _fit_width(edited_mel[:h], source_mel.shape[1])], axis=1)
        else:
            side_by_side = edited_mel
        _to_grayscale_png(side_by_side[::-1], out_dir / "spectrogram.png")

        run_log.to_jsonl(out_dir / "runlog.jsonl")
        (out_dir / "config.resolved").write_text(json.dumps(resolved_config, indent=2) + "\n")
    except Exception:
        shutil.rmtree(out_dir, ignore_errors=True)
        raise
    return out_dir


def _fit_width(arr: np.ndarray, width: int) -> np.ndarray:
    if arr.shape[1] == width:
        return arr
    src = np.linspace(0.0, 1.0, arr.shape[1])
    dst = np.linspace(0.0, 1.0, width)
    return np.stack([np.interp(dst, src, row) for row in arr], axis=0)
