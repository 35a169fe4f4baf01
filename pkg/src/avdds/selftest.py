"""Built-in oracle battery for the toy backend (CLI ``selftest`` verb).

A condensed, self-contained subset of the acceptance checks: handy for
verifying an installation without the test suite. Each check recomputes its
expected value independently of the code path it exercises.
"""

from __future__ import annotations

import math

import numpy as np
import torch

from .backends.toy import make_toy_backend
from .contrastive import info_nce
from .editor import EditConfig, run_edit, schedule_weights
from .grid import GridSpec, pack_grid, shuffle_frames, unpack_grid
from .guidance import cfg_predict, dds_gradient, dds_loss
from .latents import AudioLatent, DiffusionTimestep, PromptPair, VideoLatent
from .relevance import minmax_normalize, threshold_patches
from .rng import split_stream


def _check_cfg() -> None:
    rng = split_stream(7, "selftest-cfg")
    cond = torch.from_numpy(rng.standard_normal((3, 4)))
    null = torch.from_numpy(rng.standard_normal((3, 4)))
    assert torch.equal(cfg_predict(cond, null, 0.0), cond)
    assert torch.equal(cfg_predict(cond, null, -1.0), null)
    omega = 7.5
    expected = (1 + omega) * cond - omega * null
    assert torch.allclose(cfg_predict(cond, null, omega), expected, atol=1e-12)


def _check_dds() -> None:
    rng = split_stream(7, "selftest-dds")
    a = torch.from_numpy(rng.standard_normal((2, 3)))
    b = torch.from_numpy(rng.standard_normal((2, 3)))
    assert float(dds_loss(a, a)) == 0.0
    assert torch.equal(dds_gradient(a, a), torch.zeros_like(a))
    assert torch.equal(dds_gradient(a, b), -dds_gradient(b, a))


def _check_relevance() -> None:
    out = minmax_normalize(np.array([2.0, 4.0, 6.0]))
    assert np.allclose(out.scores, [0.0, 0.5, 1.0])
    flat = minmax_normalize(np.array([3.0, 3.0, 3.0]))
    assert np.all(flat.scores == 0.0) and bool(flat.degenerate.any())
    sets = threshold_patches(np.array([0.9, 0.5, 0.85]), 0.8)
    assert sets.positive.tolist() == [0, 2] and sets.negative.tolist() == [1]


def _check_info_nce() -> None:
    e1 = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
    value = float(info_nce(e1, e1, alpha=1.0))
    assert abs(value - math.log(1.0 + math.exp(-1.0))) < 1e-9
    rng = split_stream(7, "selftest-nce")
    x = torch.from_numpy(rng.standard_normal((5, 6)))
    y = torch.from_numpy(rng.standard_normal((5, 6)))
    # independent double-loop evaluation
    def cos(u, v):
        return float(torch.dot(u, v) / (torch.linalg.norm(u) * torch.linalg.norm(v)))
    alpha = 0.07
    total = 0.0
    for i in range(5):
        num = math.exp(cos(x[i], y[i]) / alpha)
        den = sum(math.exp(cos(x[i], y[j]) / alpha) for j in range(5))
        total += -math.log(num / den)
    assert abs(float(info_nce(x, y, alpha)) - total / 5) < 1e-10


def _check_grid() -> None:
    rng = split_stream(7, "selftest-grid")
    frames = torch.from_numpy(rng.standard_normal((40, 2, 2, 2)))
    spec = GridSpec(n_g=2, frames=40)
    assert spec.num_grids == 10
    perm = shuffle_frames(40, split_stream(7, "selftest-perm"))
    assert torch.equal(unpack_grid(pack_grid(frames, spec, perm), spec, perm), frames)


def _check_schedule() -> None:
    config = EditConfig()
    assert schedule_weights(14, config)[:3] == (2000.0, 1000.0, 0.0)
    assert schedule_weights(15, config)[:3] == (4000.0, 5000.0, 10.0)
    assert schedule_weights(0, config)[3] == 1.0


def _check_toy_gradient() -> None:
    backend = make_toy_backend("audio", (2, 3, 3), n_text_tokens=4, seed=3)
    emb = backend.encode_text("dog")
    t = DiffusionTimestep(t=0.5, backend_index=backend.noise_schedule.index_for(0.5))
    z = torch.from_numpy(split_stream(7, "selftest-grad").standard_normal((2, 3, 3)))
    z.requires_grad_(True)
    loss = backend.predict_noise(z, emb, t).eps_hat.square().sum()
    loss.backward()
    direction = torch.from_numpy(split_stream(7, "selftest-dir").standard_normal((2, 3, 3)))
    direction /= torch.linalg.vector_norm(direction)
    h = 1e-4
    with torch.no_grad():
        f_plus = backend.predict_noise(z + h * direction, emb, t).eps_hat.square().sum()
        f_minus = backend.predict_noise(z - h * direction, emb, t).eps_hat.square().sum()
    fd = float((f_plus - f_minus) / (2 * h))
    analytic = float((z.grad * direction).sum())
    assert abs(fd - analytic) / max(abs(analytic), 1e-12) < 1e-4


def _check_end_to_end() -> None:
    video_backend = make_toy_backend("video-grid", (2, 4, 4), n_text_tokens=4, seed=5, frame_hw=(2, 2))
    audio_backend = make_toy_backend("audio", (2, 4, 4), n_text_tokens=4, seed=6)
    rng = split_stream(7, "selftest-e2e")
    video = VideoLatent(torch.from_numpy(rng.standard_normal((4, 2, 2, 2))), frame_rate=4.0)
    audio = AudioLatent(torch.from_numpy(rng.standard_normal((2, 4, 4))), duration=1.0)
    prompts = PromptPair(y_src="dog barking", y_trg="lion roaring")
    config = EditConfig(total_steps=20, warmup_steps=5, lambda_cmds=1.0,
                        video_dds_scale=(2.0, 4.0), audio_dds_scale=(1.0, 5.0),
                        tau_a=0.6, tau_v=0.6, grad_clip=None, seed=11)
    v1, a1, log1 = run_edit(video, audio, prompts, (video_backend, audio_backend), config)
    v2, a2, log2 = run_edit(video, audio, prompts, (video_backend, audio_backend), config)
    assert torch.equal(v1.data, v2.data) and torch.equal(a1.data, a2.data)
    assert log1.dumps() == log2.dumps()
    assert len(log1.records) == 20


CHECKS = [
    ("cfg identities", _check_cfg),
    ("dds zero case and antisymmetry", _check_dds),
    ("relevance normalize and threshold", _check_relevance),
    ("contrastive oracle", _check_info_nce),
    ("grid roundtrip", _check_grid),
    ("schedule table", _check_schedule),
    ("toy backend gradient vs finite differences", _check_toy_gradient),
    ("end-to-end determinism", _check_end_to_end),
]


def run_selftest() -> int:
    failures = 0
    for name, check in CHECKS:
        try:
            check()
        except Exception as exc:  # noqa: BLE001 - report and continue
            failures += 1
            print(f"[FAIL] {name}: {exc}")
        else:
            print(f"[ ok ] {name}")
    print(f"{len(CHECKS) - failures}/{len(CHECKS)} selftest checks passed")
    return 1 if failures else 0
