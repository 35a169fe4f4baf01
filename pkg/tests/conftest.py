import numpy as np
import pytest
import torch

from avdds import AudioLatent, PromptPair, VideoLatent, make_toy_backend
from avdds.rng import split_stream


@pytest.fixture
def toy_audio_backend():
    return make_toy_backend("audio", (2, 3, 3), n_text_tokens=4, seed=3)


@pytest.fixture
def toy_backend_pair():
    video = make_toy_backend("video-grid", (3, 4, 4), n_text_tokens=4, seed=5, frame_hw=(2, 2))
    audio = make_toy_backend("audio", (3, 4, 4), n_text_tokens=4, seed=6)
    return video, audio


@pytest.fixture
def small_latents():
    rng = split_stream(0, "fixture-latents")
    video = VideoLatent(torch.from_numpy(rng.standard_normal((8, 3, 2, 2))), frame_rate=4.0)
    audio = AudioLatent(torch.from_numpy(rng.standard_normal((3, 4, 4))), duration=2.0)
    return video, audio


@pytest.fixture
def prompts():
    return PromptPair(y_src="a dog barking in a room", y_trg="a lion roaring in a room")


def make_clip_dir(root, n_frames=8, size=32, seconds=2.0, sr=8000, seed=0):
    """Synthetic frame directory + wav for media tests."""
    from PIL import Image
    from scipy.io import wavfile

    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n_frames):
        frame = rng.integers(0, 255, size=(size, size, 3), dtype=np.uint8)
        Image.fromarray(frame).save(root / f"frame_{i:04d}.png")
    t = np.arange(int(seconds * sr)) / sr
    wave = (0.2 * np.sin(2 * np.pi * 440 * t)).astype(np.float32)
    wavfile.write(root / "audio.wav", sr, (wave * 32767).astype(np.int16))
    return root
