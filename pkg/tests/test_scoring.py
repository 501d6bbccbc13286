import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as npst

from vismap import ConfigError, GrayImage, ValidationError, biased_confidence, local_entropy_score


def gray(arr):
    return GrayImage(np.asarray(arr, dtype=np.uint8))


class TestGrayImage:
    def test_from_flat(self):
        img = GrayImage.from_flat(3, 2, [0, 1, 2, 3, 4, 5])
        assert img.width == 3 and img.height == 2
        assert img.pixels[1, 2] == 5

    def test_flat_size_checked(self):
        with pytest.raises(ValidationError):
            GrayImage.from_flat(3, 2, [0, 1, 2])

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            gray(np.zeros((0, 4)))

    def test_read_only(self):
        img = gray([[1, 2], [3, 4]])
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 9


class TestLocalEntropyScore:
    @pytest.mark.parametrize("patch", [1, 2, 4, 8])
    def test_constant_image_is_zero(self, patch):
        img = gray(np.full((8, 8), 128))
        assert local_entropy_score(img, patch) == 0.0

    def test_two_symbol_tile(self):
        # Two equiprobable intensities carry exactly 1 bit of 8.
        img = gray([[0, 255], [255, 0]])
        assert local_entropy_score(img, 2) == pytest.approx(0.125, abs=1e-9)

    def test_uniform_random_near_max(self):
        rng = np.random.default_rng(42)
        img = gray(rng.integers(0, 256, size=(16, 16)))
        assert local_entropy_score(img, 16) > 0.85

    def test_partial_edge_tiles_discarded(self):
        rng = np.random.default_rng(0)
        base = rng.integers(0, 256, size=(4, 4))
        padded = np.full((5, 5), 255)
        padded[:4, :4] = base
        assert local_entropy_score(gray(padded), 2) == local_entropy_score(gray(base), 2)

    def test_patch_larger_than_image(self):
        with pytest.raises(ConfigError, match="exceeds"):
            local_entropy_score(gray([[0, 0], [0, 0]]), 3)

    def test_patch_below_one(self):
        with pytest.raises(ConfigError):
            local_entropy_score(gray([[0]]), 0)

    def test_shuffle_within_tile_invariant(self):
        rng = np.random.default_rng(7)
        pixels = rng.integers(0, 256, size=(4, 8))
        img = gray(pixels)
        shuffled = pixels.copy()
        # permute the pixels of the second 4x4 tile only
        tile = shuffled[:, 4:].ravel()
        rng.shuffle(tile)
        shuffled[:, 4:] = tile.reshape(4, 4)
        assert local_entropy_score(img, 4) == local_entropy_score(gray(shuffled), 4)

    @given(
        npst.arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12))),
        st.integers(1, 4),
    )
    def test_score_in_unit_interval(self, pixels, patch):
        if patch > min(pixels.shape):
            return
        score = local_entropy_score(GrayImage(pixels), patch)
        assert 0.0 <= score <= 1.0


class TestBiasedConfidence:
    def test_zero_bias_is_identity(self):
        assert biased_confidence(2.0, 0.5, 0.0) == 2.0

    def test_positive_bias_raises_score(self):
        assert biased_confidence(2.0, 1.0, 0.5) == 3.0

    def test_negative_bias_lowers_score(self):
        assert biased_confidence(2.0, 0.5, -0.4) == pytest.approx(1.6, abs=1e-12)

    def test_negative_score_rejected(self):
        with pytest.raises(ValidationError):
            biased_confidence(-0.1, 0.5, 0.0)

    def test_memorability_range_checked(self):
        with pytest.raises(ValidationError):
            biased_confidence(1.0, 1.5, 0.0)

    @given(
        st.floats(0.0, 100.0),
        st.floats(0.0, 1.0),
        st.floats(0.0, 1.0),
        st.floats(-2.0, 2.0),
        st.floats(0.0, 1.0),
    )
    def test_linear_in_memorability(self, score, m1, m2, b_mem, alpha):
        # f(score, a*m1 + (1-a)*m2) == a*f(score, m1) + (1-a)*f(score, m2)
        blend = alpha * m1 + (1 - alpha) * m2
        lhs = biased_confidence(score, blend, b_mem)
        rhs = alpha * biased_confidence(score, m1, b_mem) + (1 - alpha) * biased_confidence(
            score, m2, b_mem
        )
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)
