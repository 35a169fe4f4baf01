import numpy as np
import pytest
import torch

from avdds import (
    ConfigurationError,
    EmbeddingBatch,
    PatchIndexSets,
    align_counts,
    sample_negative,
    sample_positive,
)
from avdds.rng import split_stream


def _batch(n, d=3, tag="b"):
    vectors = torch.from_numpy(split_stream(0, "batch", tag).standard_normal((n, d)))
    return EmbeddingBatch(vectors=vectors, origin=("audio", "target", "positive"),
                          source_indices=np.arange(n))


class TestPatchIndexSets:
    def test_disjointness_enforced(self):
        with pytest.raises(ConfigurationError):
            PatchIndexSets(positive=np.array([0, 1]), negative=np.array([1, 2]))

    def test_embedding_batch_length_check(self):
        with pytest.raises(ConfigurationError):
            EmbeddingBatch(vectors=torch.zeros((2, 3)), origin=("a", "b", "c"),
                           source_indices=np.array([0]))


class TestSamplePositive:
    def test_counts_and_subset(self):
        hidden = torch.from_numpy(split_stream(1, "h").standard_normal((8, 3)))
        idx = PatchIndexSets(positive=np.array([0, 1, 2, 3]), negative=np.array([4, 5, 6, 7]),
                             modality="audio", branch="target")
        batch = sample_positive(hidden, idx, 0.5, split_stream(0, "pos"))
        assert len(batch) == 2
        assert set(batch.source_indices.tolist()) <= {0, 1, 2, 3}
        assert torch.equal(batch.vectors, hidden[torch.from_numpy(batch.source_indices)])

    def test_ceiling_keeps_single_patch(self):
        hidden = torch.zeros((4, 2), dtype=torch.float64)
        idx = PatchIndexSets(positive=np.array([2]), negative=np.array([0, 1, 3]))
        batch = sample_positive(hidden, idx, 0.5, split_stream(0, "pos"))
        assert len(batch) == 1 and batch.source_indices.tolist() == [2]

    def test_empty_positive_set(self):
        hidden = torch.zeros((4, 2), dtype=torch.float64)
        idx = PatchIndexSets(positive=np.array([], dtype=np.int64), negative=np.arange(4))
        batch = sample_positive(hidden, idx, 0.5, split_stream(0, "pos"))
        assert len(batch) == 0
        assert batch.vectors.shape == (0, 2)

    def test_deterministic_per_stream(self):
        hidden = torch.from_numpy(split_stream(2, "h").standard_normal((10, 3)))
        idx = PatchIndexSets(positive=np.arange(10), negative=np.array([], dtype=np.int64))
        a = sample_positive(hidden, idx, 0.5, split_stream(7, "pos", 3))
        b = sample_positive(hidden, idx, 0.5, split_stream(7, "pos", 3))
        assert np.array_equal(a.source_indices, b.source_indices)

    def test_no_duplicates(self):
        hidden = torch.zeros((16, 2), dtype=torch.float64)
        idx = PatchIndexSets(positive=np.arange(16), negative=np.array([], dtype=np.int64))
        for i in range(50):
            batch = sample_positive(hidden, idx, 0.9, split_stream(8, "dup", i))
            assert len(set(batch.source_indices.tolist())) == len(batch)

    def test_rate_validation(self):
        hidden = torch.zeros((4, 2), dtype=torch.float64)
        idx = PatchIndexSets(positive=np.arange(4), negative=np.array([], dtype=np.int64))
        for bad in (0.0, -0.5, 1.5):
            with pytest.raises(ConfigurationError):
                sample_positive(hidden, idx, bad, split_stream(0, "pos"))

    def test_grad_connection_preserved(self):
        hidden = torch.from_numpy(split_stream(3, "h").standard_normal((6, 3)))
        hidden.requires_grad_(True)
        idx = PatchIndexSets(positive=np.arange(6), negative=np.array([], dtype=np.int64))
        batch = sample_positive(hidden, idx, 0.5, split_stream(0, "pos"))
        assert batch.vectors.requires_grad
        batch.vectors.sum().backward()
        assert hidden.grad is not None


class TestSampleNegative:
    def test_counts_per_branch(self):
        hidden_src = torch.zeros((12, 2), dtype=torch.float64)
        hidden_trg = torch.ones((12, 2), dtype=torch.float64)
        idx_src = PatchIndexSets(positive=np.array([10, 11]), negative=np.arange(10),
                                 modality="audio", branch="source")
        idx_trg = PatchIndexSets(positive=np.array([0, 1]), negative=np.arange(2, 12),
                                 modality="audio", branch="target")
        src, trg = sample_negative(hidden_src, hidden_trg, idx_src, idx_trg, 0.8,
                                   split_stream(0, "neg"))
        assert len(src) == 8 and len(trg) == 8  # ceil(0.8 * 10)
        assert set(src.source_indices.tolist()) <= set(idx_src.negative.tolist())
        assert set(trg.source_indices.tolist()) <= set(idx_trg.negative.tolist())
        assert src.origin == ("audio", "source", "negative")
        assert trg.origin == ("audio", "target", "negative")

    def test_branches_use_own_sets(self):
        hidden = torch.zeros((4, 2), dtype=torch.float64)
        idx_src = PatchIndexSets(positive=np.array([], dtype=np.int64), negative=np.array([0, 1]))
        idx_trg = PatchIndexSets(positive=np.array([], dtype=np.int64), negative=np.array([2, 3]))
        src, trg = sample_negative(hidden, hidden, idx_src, idx_trg, 1.0, split_stream(0, "neg"))
        assert set(src.source_indices.tolist()) == {0, 1}
        assert set(trg.source_indices.tolist()) == {2, 3}


class TestAlignCounts:
    def test_trims_longer_only(self):
        a, b = _batch(5, tag="a5"), _batch(3, tag="b3")
        a2, b2 = align_counts(a, b, split_stream(0, "al"))
        assert len(a2) == 3 and len(b2) == 3
        assert b2 is b  # untouched

    def test_equal_lengths_identity(self):
        a, b = _batch(4, tag="a4"), _batch(4, tag="b4")
        a2, b2 = align_counts(a, b, split_stream(0, "al"))
        assert a2 is a and b2 is b

    def test_survivor_order_preserved(self):
        a = _batch(6, tag="a6")
        b = _batch(2, tag="b2")
        for i in range(30):
            a2, _ = align_counts(a, b, split_stream(1, "al", i))
            kept = a2.source_indices
            assert np.all(np.diff(kept) > 0)  # original ascending order kept
            assert torch.equal(a2.vectors, a.vectors[torch.from_numpy(kept)])

    def test_uniform_survival_frequencies(self):
        # oracle: dropping 4 -> 2 uniformly keeps each element with p = 1/2;
        # 1e4 trials put the empirical rate within +/- 0.02
        a = _batch(4, tag="mc-a")
        b = _batch(2, tag="mc-b")
        hits = np.zeros(4)
        trials = 10_000
        for i in range(trials):
            a2, _ = align_counts(a, b, split_stream(2, "mc", i))
            hits[a2.source_indices] += 1
        freqs = hits / trials
        assert np.all(np.abs(freqs - 0.5) < 0.02)
