"""Edit-quality metrics over pluggable embedder backends.

Semantic metrics (frame consistency, prompt alignment, structure
preservation, audio fidelity, joint similarity) are cosine/L2 kernels over
embeddings produced by opaque handles; the repo ships deterministic stub
embedders so the harness is fully testable without model weights. The
audio-visual alignment score is self-contained: spectral-flux audio onsets
and frame-difference motion peaks, greedily matched within a time window and
scored as intersection over union.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage, signal

from .exceptions import ConfigurationError
from .rng import split_stream

METRIC_COLUMNS = ("clip_f", "clip_t", "obj", "dino", "clap", "lpaps", "ib", "av_align")


@dataclass
class EmbedderHandle:
    """Opaque embedding backend for one metric family.

    ``kind`` is one of image-text / audio-text / image-self-sup /
    audio-visual-joint. Embed callables must be deterministic per input;
    ``embed_audio`` may return a list of per-layer vectors (used by lpaps).
    """

    kind: str
    dim: int
    embed_image: Optional[Callable] = None
    embed_text: Optional[Callable] = None
    embed_audio: Optional[Callable] = None
    thread_safe: bool = True
    name: str = ""


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0:
        return 0.0
    return float(np.dot(a, b) / denom)


def clip_f(frames: Sequence[np.ndarray], embedder: EmbedderHandle) -> float:
    """Mean cosine similarity between embeddings of consecutive frames."""
    if len(frames) < 2:
        raise ConfigurationError("frame consistency needs at least two frames")
    embs = [embedder.embed_image(f) for f in frames]
    sims = [_cos(embs[i], embs[i + 1]) for i in range(len(embs) - 1)]
    return float(np.mean(sims))


def clip_t(frames: Sequence[np.ndarray], prompt: str, embedder: EmbedderHandle) -> float:
    """Mean cosine similarity of each frame embedding to the prompt embedding."""
    if not prompt:
        raise ConfigurationError("prompt must be nonempty")
    if len(frames) < 1:
        raise ConfigurationError("need at least one frame")
    text = embedder.embed_text(prompt)
    return float(np.mean([_cos(embedder.embed_image(f), text) for f in frames]))


def dino_sim(frames_src: Sequence[np.ndarray], frames_edited: Sequence[np.ndarray],
             embedder: EmbedderHandle) -> float:
    """Frame-wise structure preservation between source and edited frames."""
    if len(frames_src) != len(frames_edited):
        raise ConfigurationError(
            f"misaligned frame counts: {len(frames_src)} vs {len(frames_edited)}")
    if len(frames_src) < 1:
        raise ConfigurationError("need at least one frame")
    sims = [_cos(embedder.embed_image(a), embedder.embed_image(b))
            for a, b in zip(frames_src, frames_edited)]
    return float(np.mean(sims))


def clap_sim(waveform: np.ndarray, sample_rate: int, prompt: str,
             embedder: EmbedderHandle) -> float:
    """Cosine similarity between the audio embedding and the prompt embedding."""
    if not prompt:
        raise ConfigurationError("prompt must be nonempty")
    audio_emb = embedder.embed_audio(waveform, sample_rate)
    if isinstance(audio_emb, (list, tuple)):
        audio_emb = audio_emb[0]
    return _cos(audio_emb, embedder.embed_text(prompt))


def ib_sim(frames: Sequence[np.ndarray], waveform: np.ndarray, sample_rate: int,
           embedder: EmbedderHandle) -> float:
    """Joint audio-visual similarity: mean frame embedding vs audio embedding."""
    if len(frames) < 1:
        raise ConfigurationError("need at least one frame")
    video_emb = np.mean([np.asarray(embedder.embed_image(f), dtype=np.float64)
                         for f in frames], axis=0)
    audio_emb = embedder.embed_audio(waveform, sample_rate)
    if isinstance(audio_emb, (list, tuple)):
        audio_emb = audio_emb[0]
    return _cos(video_emb, audio_emb)


def lpaps(waveform_src: np.ndarray, waveform_edited: np.ndarray, sample_rate: int,
          embedder: EmbedderHandle) -> float:
    """Perceptual audio distance: L2 between embeddings, summed over layers."""
    e_src = embedder.embed_audio(waveform_src, sample_rate)
    e_edit = embedder.embed_audio(waveform_edited, sample_rate)
    if not isinstance(e_src, (list, tuple)):
        e_src, e_edit = [e_src], [e_edit]
    total = 0.0
    for a, b in zip(e_src, e_edit):
        total += float(np.linalg.norm(np.asarray(a, dtype=np.float64)
                                      - np.asarray(b, dtype=np.float64)))
    return total


def obj_score(frames: Sequence[np.ndarray], target_object: str,
              detector: Optional[Callable]) -> Optional[float]:
    """Mean over frames of the max detection confidence for the target phrase.

    Returns None (metric absent, not zero) when no detector is available.
    """
    if detector is None:
        return None
    per_frame = []
    for frame in frames:
        confs = detector(frame, target_object)
        if confs is None:
            confs = []
        elif np.isscalar(confs):
            confs = [float(confs)]
        per_frame.append(max((float(c) for c in confs), default=0.0))
    return float(np.mean(per_frame)) if per_frame else 0.0


# --- audio-visual alignment --------------------------------------------------

@dataclass(frozen=True)
class AvAlignConfig:
    """Peak-picking parameters, logged into every report.

    ``min_separation_s`` suppresses double-triggers on one physical onset
    (an attack spanning two hops would otherwise peak twice).
    """

    hop_s: float = 0.010
    frame_s: float = 0.040
    prominence: float = 0.10
    min_height: float = 0.20
    window_s: float = 0.10
    min_separation_s: float = 0.03

    def to_dict(self) -> dict:
        return {"hop_s": self.hop_s, "frame_s": self.frame_s,
                "prominence": self.prominence, "min_height": self.min_height,
                "window_s": self.window_s, "min_separation_s": self.min_separation_s}


@dataclass
class AvAlignResult:
    score: float
    audio_peaks: np.ndarray
    video_peaks: np.ndarray
    degenerate: bool = False


def _pick_peaks(envelope: np.ndarray, times: np.ndarray, dt: float,
                config: AvAlignConfig) -> np.ndarray:
    if envelope.size < 3:
        return np.empty(0)
    peak = envelope.max()
    if peak <= 0:
        return np.empty(0)
    norm = envelope / peak
    distance = max(1, int(round(config.min_separation_s / dt)))
    idx, _ = signal.find_peaks(norm, height=config.min_height,
                               prominence=config.prominence, distance=distance)
    return times[idx]


def detect_audio_onsets(waveform: np.ndarray, sample_rate: int,
                        config: AvAlignConfig = AvAlignConfig()) -> np.ndarray:
    """Onset times from spectral-flux peak picking."""
    nperseg = max(8, int(round(config.frame_s * sample_rate)))
    hop = max(1, int(round(config.hop_s * sample_rate)))
    noverlap = max(0, nperseg - hop)
    if len(waveform) < nperseg:
        return np.empty(0)
    _, times, spec = signal.stft(waveform, fs=sample_rate, nperseg=nperseg,
                                 noverlap=noverlap, boundary=None, padded=False)
    mag = np.abs(spec)
    if mag.shape[1] < 2:
        return np.empty(0)
    flux = np.maximum(mag[:, 1:] - mag[:, :-1], 0.0).sum(axis=0)
    return _pick_peaks(flux, times[1:], config.hop_s, config)


def detect_motion_peaks(frames: Sequence[np.ndarray], fps: float,
                        config: AvAlignConfig = AvAlignConfig()) -> np.ndarray:
    """Visual change times from frame-difference energy peak picking."""
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim == 4:
        arr = arr.mean(axis=-1)
    if arr.shape[0] < 2:
        return np.empty(0)
    energy = ((arr[1:] - arr[:-1]) ** 2).mean(axis=(1, 2))
    times = np.arange(1, arr.shape[0]) / fps
    return _pick_peaks(energy, times, 1.0 / fps, config)


def peak_iou(audio_peaks, video_peaks, window: float) -> float:
    """Greedy nearest matching of peak sets; IoU of matched vs all peaks.

    Pairs are consumed in order of time distance (symmetric tiebreak), each
    peak matched at most once. Both sets empty scores 1.0, exactly one empty
    scores 0.0.
    """
    a = sorted(float(t) for t in audio_peaks)
    v = sorted(float(t) for t in video_peaks)
    if not a and not v:
        return 1.0
    if not a or not v:
        return 0.0
    candidates = sorted(
        ((abs(ta - tv), ta + tv, i, j) for i, ta in enumerate(a) for j, tv in enumerate(v)
         if abs(ta - tv) <= window),
        key=lambda c: (c[0], c[1]))
    used_a, used_v = set(), set()
    matches = 0
    for _, _, i, j in candidates:
        if i in used_a or j in used_v:
            continue
        used_a.add(i)
        used_v.add(j)
        matches += 1
    return matches / (len(a) + len(v) - matches)


def av_align_details(waveform: np.ndarray, sample_rate: int,
                     frames: Sequence[np.ndarray], fps: float,
                     window: float = 0.1,
                     config: AvAlignConfig = AvAlignConfig()) -> AvAlignResult:
    audio_peaks = detect_audio_onsets(waveform, sample_rate, config)
    video_peaks = detect_motion_peaks(frames, fps, config)
    score = peak_iou(audio_peaks, video_peaks, window)
    degenerate = audio_peaks.size == 0 and video_peaks.size == 0
    return AvAlignResult(score=score, audio_peaks=audio_peaks,
                         video_peaks=video_peaks, degenerate=degenerate)


def av_align(waveform: np.ndarray, sample_rate: int, frames: Sequence[np.ndarray],
             fps: float, window: float = 0.1,
             config: AvAlignConfig = AvAlignConfig()) -> float:
    return av_align_details(waveform, sample_rate, frames, fps, window, config).score


# --- report -------------------------------------------------------------------

def aggregate_rows(rows: Sequence[dict]) -> dict:
    """Arithmetic mean per metric column over rows where the value is present."""
    out = {}
    for col in METRIC_COLUMNS:
        values = [r[col] for r in rows if r.get(col) is not None]
        out[col] = float(np.mean(values)) if values else None
    return out


@dataclass
class MetricReport:
    """Per-clip metric rows plus their aggregate, mirroring the usual
    video-only / audio-only / joint-AV table layout."""

    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def aggregate(self) -> dict:
        return aggregate_rows(self.rows)

    def to_json(self, path) -> None:
        payload = {"config": self.config, "rows": self.rows, "aggregate": self.aggregate}
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("clip",) + METRIC_COLUMNS)
            for row in self.rows:
                writer.writerow([row.get("clip", "")]
                                + [row.get(col) for col in METRIC_COLUMNS])
            agg = self.aggregate
            writer.writerow(["mean"] + [agg[col] for col in METRIC_COLUMNS])


def evaluate_clip(name: str,
                  frames_src: Sequence[np.ndarray], frames_edited: Sequence[np.ndarray],
                  waveform_src: np.ndarray, waveform_edited: np.ndarray,
                  sample_rate: int, fps: float, target_prompt: str,
                  embedders: dict, detector: Optional[Callable] = None,
                  target_object: Optional[str] = None,
                  av_config: AvAlignConfig = AvAlignConfig()) -> dict:
    """All metric kernels for one clip; returns a report row."""
    image_text = embedders["image_text"]
    audio_text = embedders["audio_text"]
    image_self = embedders["image_self"]
    av_joint = embedders["av_joint"]
    return {
        "clip": name,
        "clip_f": clip_f(frames_edited, image_text),
        "clip_t": clip_t(frames_edited, target_prompt, image_text),
        "obj": obj_score(frames_edited, target_object or target_prompt, detector),
        "dino": dino_sim(frames_src, frames_edited, image_self),
        "clap": clap_sim(waveform_edited, sample_rate, target_prompt, audio_text),
        "lpaps": lpaps(waveform_src, waveform_edited, sample_rate, audio_text),
        "ib": ib_sim(frames_edited, waveform_edited, sample_rate, av_joint),
        "av_align": av_align(waveform_edited, sample_rate, frames_edited, fps,
                             window=av_config.window_s, config=av_config),
    }


# --- stub embedders -------------------------------------------------------------

def _stub_image_vector(frame: np.ndarray, projection: np.ndarray) -> np.ndarray:
    gray = np.asarray(frame, dtype=np.float64)
    if gray.ndim == 3:
        gray = gray.mean(axis=-1)
    zoom = (8 / gray.shape[0], 8 / gray.shape[1])
    pooled = ndimage.zoom(gray, zoom, order=1).ravel() / 255.0
    return projection.T @ pooled


def _stub_audio_vector(waveform: np.ndarray, projection: np.ndarray) -> np.ndarray:
    wave = np.asarray(waveform, dtype=np.float64).ravel()
    envelope = np.abs(wave)
    pos = np.linspace(0.0, 1.0, envelope.size) if envelope.size else np.zeros(1)
    pooled = np.interp(np.linspace(0.0, 1.0, 64), pos, envelope if envelope.size else np.zeros(1))
    return projection.T @ pooled


def _stub_text_vector(text: str, seed: int, dim: int) -> np.ndarray:
    return split_stream(seed, "stub-text", text).standard_normal(dim)


def make_stub_embedders(seed: int = 0, dim: int = 32) -> dict:
    """Deterministic seeded-projection embedders standing in for CLIP / CLAP /
    DINO / ImageBind-class models. Desk-testable placeholders only; scores
    they produce carry no semantic meaning.
    """
    p_img = split_stream(seed, "stub-proj", "image").standard_normal((64, dim))
    p_img2 = split_stream(seed, "stub-proj", "image-self").standard_normal((64, dim))
    p_aud = split_stream(seed, "stub-proj", "audio").standard_normal((64, dim))
    p_aud2 = split_stream(seed, "stub-proj", "audio-layer2").standard_normal((64, dim // 2))
    p_av_img = split_stream(seed, "stub-proj", "av-image").standard_normal((64, dim))
    p_av_aud = split_stream(seed, "stub-proj", "av-audio").standard_normal((64, dim))

    image_text = EmbedderHandle(
        kind="image-text", dim=dim, name="stub-image-text",
        embed_image=lambda f: _stub_image_vector(f, p_img),
        embed_text=lambda t: _stub_text_vector(t, seed, dim))
    audio_text = EmbedderHandle(
        kind="audio-text", dim=dim, name="stub-audio-text",
        embed_audio=lambda w, sr: [_stub_audio_vector(w, p_aud),
                                   _stub_audio_vector(w, p_aud2)],
        embed_text=lambda t: _stub_text_vector(t, seed + 1, dim))
    image_self = EmbedderHandle(
        kind="image-self-sup", dim=dim, name="stub-image-self",
        embed_image=lambda f: _stub_image_vector(f, p_img2))
    av_joint = EmbedderHandle(
        kind="audio-visual-joint", dim=dim, name="stub-av-joint",
        embed_image=lambda f: _stub_image_vector(f, p_av_img),
        embed_audio=lambda w, sr: _stub_audio_vector(w, p_av_aud))
    return {"image_text": image_text, "audio_text": audio_text,
            "image_self": image_self, "av_joint": av_joint}
