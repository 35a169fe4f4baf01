import itertools

import numpy as np
import pytest
import torch

from avdds import (
    ConfigurationError,
    FramePermutation,
    GridSpec,
    ShapeError,
    pack_grid,
    shuffle_frames,
    unpack_grid,
)
from avdds.grid import frame_to_grid_patch, grid_patch_to_frame
from avdds.rng import split_stream


def _frames(f, c=2, h=2, w=2, tag="frames"):
    return torch.from_numpy(split_stream(0, "grid", tag, f).standard_normal((f, c, h, w)))


class TestGridSpec:
    def test_appendix_setup(self):
        spec = GridSpec(n_g=2, frames=40)
        assert spec.num_grids == 10
        assert spec.per_grid == 4

    def test_divisibility_enforced(self):
        with pytest.raises(ConfigurationError):
            GridSpec(n_g=2, frames=10)
        with pytest.raises(ConfigurationError):
            GridSpec(n_g=3, frames=8)

    def test_bounds(self):
        with pytest.raises(ConfigurationError):
            GridSpec(n_g=0, frames=4)
        with pytest.raises(ConfigurationError):
            GridSpec(n_g=1, frames=0)


class TestShuffleFrames:
    def test_single_frame_identity(self):
        perm = shuffle_frames(1, split_stream(0, "p"))
        assert perm.perm.tolist() == [0]

    def test_valid_permutation(self):
        for i in range(50):
            perm = shuffle_frames(12, split_stream(1, "p", i))
            assert np.array_equal(np.sort(perm.perm), np.arange(12))

    def test_invalid_perm_rejected(self):
        with pytest.raises(ConfigurationError):
            FramePermutation(perm=np.array([0, 0, 2]))

    def test_uniform_over_permutations(self):
        # oracle: 4 frames have 24 permutations; 1e4 draws put each empirical
        # frequency within 1/24 +/- 0.01
        counts = {p: 0 for p in itertools.permutations(range(4))}
        trials = 10_000
        for i in range(trials):
            perm = shuffle_frames(4, split_stream(2, "mc", i))
            counts[tuple(perm.perm.tolist())] += 1
        for count in counts.values():
            assert abs(count / trials - 1 / 24) < 0.01

    def test_inverse(self):
        perm = shuffle_frames(9, split_stream(3, "p"))
        assert np.array_equal(perm.perm[perm.inverse], np.arange(9))


class TestPackUnpack:
    @pytest.mark.parametrize("frames,n_g", [(40, 2), (36, 3), (16, 4), (4, 1)])
    def test_roundtrip_bitwise(self, frames, n_g):
        spec = GridSpec(n_g=n_g, frames=frames)
        z = _frames(frames, tag=f"rt{n_g}")
        perm = shuffle_frames(frames, split_stream(4, "p", n_g))
        packed = pack_grid(z, spec, perm)
        assert packed.shape == (spec.num_grids, 2, 2 * n_g, 2 * n_g)
        assert torch.equal(unpack_grid(packed, spec, perm), z)

    def test_identity_layout_n_g_1(self):
        spec = GridSpec(n_g=1, frames=4)
        z = _frames(4, tag="id")
        identity = FramePermutation(perm=np.arange(4))
        assert torch.equal(pack_grid(z, spec, identity), z)

    def test_tile_placement(self):
        # tile (r, c) of grid m holds frame perm[m*n_g^2 + r*n_g + c]
        spec = GridSpec(n_g=2, frames=4)
        z = _frames(4, tag="tiles")
        perm = FramePermutation(perm=np.array([2, 0, 3, 1]))
        packed = pack_grid(z, spec, perm)
        assert torch.equal(packed[0, :, 0:2, 0:2], z[2])
        assert torch.equal(packed[0, :, 0:2, 2:4], z[0])
        assert torch.equal(packed[0, :, 2:4, 0:2], z[3])
        assert torch.equal(packed[0, :, 2:4, 2:4], z[1])

    def test_wrong_perm_preserves_frame_multiset(self):
        spec = GridSpec(n_g=2, frames=8)
        z = _frames(8, tag="wp")
        perm_a = shuffle_frames(8, split_stream(5, "a"))
        perm_b = shuffle_frames(8, split_stream(5, "b"))
        assert not np.array_equal(perm_a.perm, perm_b.perm)
        recovered = unpack_grid(pack_grid(z, spec, perm_a), spec, perm_b)
        assert not torch.equal(recovered, z)
        sort = lambda t: np.sort(t.reshape(8, -1).numpy(), axis=0)
        assert np.array_equal(sort(recovered), sort(z))

    def test_shape_validation(self):
        spec = GridSpec(n_g=2, frames=4)
        perm = shuffle_frames(4, split_stream(6, "p"))
        with pytest.raises(ShapeError):
            pack_grid(torch.zeros(5, 2, 2, 2), spec, perm)
        with pytest.raises(ConfigurationError):
            pack_grid(torch.zeros(4, 2, 2, 2), spec, FramePermutation(perm=np.arange(8)))
        with pytest.raises(ShapeError):
            unpack_grid(torch.zeros(2, 2, 4, 4), spec, perm)

    def test_gradient_passes_through_packing(self):
        spec = GridSpec(n_g=2, frames=4)
        z = _frames(4, tag="grad").requires_grad_(True)
        perm = shuffle_frames(4, split_stream(7, "p"))
        pack_grid(z, spec, perm).sum().backward()
        assert torch.equal(z.grad, torch.ones_like(z))


class TestIndexMapping:
    def test_roundtrip_all_patches(self):
        spec = GridSpec(n_g=2, frames=8)
        perm = shuffle_frames(8, split_stream(8, "p"))
        frame_hw = (3, 2)
        grid_hw = (frame_hw[0] * spec.n_g, frame_hw[1] * spec.n_g)
        for m in range(spec.num_grids):
            for q in range(grid_hw[0] * grid_hw[1]):
                frame, row, col = grid_patch_to_frame(spec, perm, frame_hw, m, q)
                assert 0 <= frame < 8 and 0 <= row < 3 and 0 <= col < 2
                assert frame_to_grid_patch(spec, perm, frame_hw, frame, row, col) == (m, q)

    def test_mapping_consistent_with_packing(self):
        # the latent value at grid patch (m, q) equals the mapped frame pixel
        spec = GridSpec(n_g=2, frames=4)
        frame_hw = (2, 2)
        z = _frames(4, tag="map")
        perm = shuffle_frames(4, split_stream(9, "p"))
        packed = pack_grid(z, spec, perm)
        grid_w = frame_hw[1] * spec.n_g
        for q in range(16):
            frame, row, col = grid_patch_to_frame(spec, perm, frame_hw, 0, q)
            gr, gc = divmod(q, grid_w)
            assert torch.equal(packed[0, :, gr, gc], z[frame, :, row, col])
