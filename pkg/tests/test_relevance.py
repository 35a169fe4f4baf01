import logging

import numpy as np
import pytest
import torch

from avdds import (
    ConfigurationError,
    DiffusionTimestep,
    ShapeError,
    ThresholdConfig,
    minmax_normalize,
    relevance_scores,
    threshold_patches,
)
from avdds.backends.base import LayerProbe, ProbeData
from avdds.rng import split_stream


def _probes_from_logits(logits: np.ndarray) -> ProbeData:
    """Build probes whose Q K^T equals the given matrix (K = identity)."""
    n_q, n_k = logits.shape
    queries = torch.from_numpy(np.asarray(logits, dtype=np.float64))
    keys = torch.eye(n_k, dtype=torch.float64)
    hidden = torch.zeros((n_q, n_k), dtype=torch.float64)
    return ProbeData(layers={"layer": LayerProbe(queries=queries, keys=keys,
                                                 hidden=hidden, patch_hw=(1, n_q))})


class TestRelevanceScores:
    def test_row_max(self):
        scores = relevance_scores(_probes_from_logits(np.array([[1.0, 2.0], [3.0, 0.0]])))
        assert np.allclose(scores, [2.0, 3.0])

    def test_single_token_column(self):
        scores = relevance_scores(_probes_from_logits(np.array([[0.7], [-1.2], [3.0]])))
        assert np.allclose(scores, [0.7, -1.2, 3.0])

    def test_toy_probe_oracle(self, toy_audio_backend):
        # explicit matrix-product recomputation from the probed Q, K
        backend = toy_audio_backend
        z = torch.from_numpy(split_stream(0, "rel").standard_normal((2, 3, 3)))
        t = DiffusionTimestep(t=0.5, backend_index=backend.noise_schedule.index_for(0.5))
        probes = backend.predict_noise(z, backend.encode_text("dog"), t, capture_probes=True).probes
        probe = probes.layers["attn0"]
        manual = (probe.queries.detach().numpy() @ probe.keys.detach().numpy().T).max(axis=1)
        assert np.allclose(relevance_scores(probes), manual, atol=1e-12)

    def test_multi_layer_mean_of_normalized(self):
        l1 = LayerProbe(queries=torch.tensor([[2.0], [4.0], [6.0]], dtype=torch.float64),
                        keys=torch.eye(1, dtype=torch.float64),
                        hidden=torch.zeros((3, 1), dtype=torch.float64), patch_hw=(1, 3))
        l2 = LayerProbe(queries=torch.tensor([[9.0], [3.0], [6.0]], dtype=torch.float64),
                        keys=torch.eye(1, dtype=torch.float64),
                        hidden=torch.zeros((3, 1), dtype=torch.float64), patch_hw=(1, 3))
        probes = ProbeData(layers={"a": l1, "b": l2})
        # per-layer min-max: [0, .5, 1] and [1, 0, .5]; mean = [.5, .25, .75]
        assert np.allclose(relevance_scores(probes), [0.5, 0.25, 0.75])

    def test_video_batched_scores(self, toy_backend_pair):
        video, _ = toy_backend_pair
        z = torch.from_numpy(split_stream(1, "rel").standard_normal((3, 3, 4, 4)))
        t = DiffusionTimestep(t=0.5, backend_index=video.noise_schedule.index_for(0.5))
        probes = video.predict_noise(z, video.encode_text("dog"), t, capture_probes=True).probes
        scores = relevance_scores(probes)
        assert scores.shape == (3, 16)

    def test_empty_probes_rejected(self):
        with pytest.raises(ConfigurationError):
            ProbeData(layers={})


class TestMinMaxNormalize:
    def test_basic(self):
        assert np.allclose(minmax_normalize(np.array([2.0, 4.0, 6.0])).scores, [0.0, 0.5, 1.0])
        assert np.allclose(minmax_normalize(np.array([0.1, 0.5, 0.9])).scores, [0.0, 0.5, 1.0])

    def test_degenerate_constant_flagged(self, caplog):
        with caplog.at_level(logging.WARNING):
            out = minmax_normalize(np.array([3.0, 3.0, 3.0]))
        assert np.all(out.scores == 0.0)
        assert bool(out.degenerate.any())
        assert any("constant relevance" in m for m in caplog.messages)

    def test_bounds_and_extremes(self):
        for i in range(200):
            raw = split_stream(2, "mm", i).standard_normal(17)
            out = minmax_normalize(raw).scores
            assert out.min() == 0.0 and out.max() == 1.0
            assert np.all((out >= 0.0) & (out <= 1.0))

    def test_affine_invariance(self):
        for i in range(1000):
            rng = split_stream(3, "affine", i)
            raw = rng.standard_normal(9)
            a = float(rng.uniform(0.1, 10.0))
            b = float(rng.uniform(-5.0, 5.0))
            base = minmax_normalize(raw).scores
            scaled = minmax_normalize(a * raw + b).scores
            assert np.allclose(base, scaled, atol=1e-9)

    def test_per_row_normalization_for_video(self):
        raw = np.array([[0.0, 1.0, 2.0], [10.0, 30.0, 20.0]])
        out = minmax_normalize(raw)
        assert np.allclose(out.scores[0], [0.0, 0.5, 1.0])
        assert np.allclose(out.scores[1], [0.0, 1.0, 0.5])
        assert out.degenerate.shape == (2,)

    def test_mixed_degenerate_rows(self):
        raw = np.array([[1.0, 1.0], [0.0, 2.0]])
        out = minmax_normalize(raw)
        assert np.all(out.scores[0] == 0.0)
        assert np.allclose(out.scores[1], [0.0, 1.0])
        assert out.degenerate.tolist() == [True, False]

    def test_empty_rejected(self):
        with pytest.raises(ConfigurationError):
            minmax_normalize(np.array([]))


class TestThresholdPatches:
    def test_example_partition(self):
        sets = threshold_patches(np.array([0.9, 0.5, 0.85]), 0.8)
        assert sets.positive.tolist() == [0, 2]
        assert sets.negative.tolist() == [1]

    def test_tie_goes_negative(self):
        sets = threshold_patches(np.array([0.8]), 0.8)
        assert sets.positive.size == 0
        assert sets.negative.tolist() == [0]

    def test_default_threshold_config(self):
        config = ThresholdConfig()
        assert config.tau_a == 0.8 and config.tau_v == 0.8

    def test_partition_property(self):
        for i in range(100):
            rng = split_stream(4, "part", i)
            scores = rng.uniform(0, 1, size=12)
            tau = float(rng.uniform(0, 1))
            sets = threshold_patches(scores, tau)
            merged = np.sort(np.concatenate([sets.positive, sets.negative]))
            assert np.array_equal(merged, np.arange(12))

    def test_monotone_in_tau(self):
        scores = split_stream(5, "mono").uniform(0, 1, size=20)
        previous = None
        for tau in np.linspace(0.0, 1.0, 11):
            current = set(threshold_patches(scores, float(tau)).positive.tolist())
            if previous is not None:
                assert current.issubset(previous)
            previous = current

    def test_tau_range_checked(self):
        with pytest.raises(ConfigurationError):
            threshold_patches(np.array([0.5]), 1.5)

    def test_video_map_requires_row_iteration(self):
        with pytest.raises(ShapeError):
            threshold_patches(np.zeros((2, 4)), 0.5)
