import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vismap import (
    DescriptorMatrix,
    DescriptorStore,
    DimensionMismatch,
    Frame,
    MissingReference,
    SceneGallery,
    Traversal,
    ValidationError,
    euclidean_distance,
    mean_gallery_distance,
)
from vismap.core import position_distance, position_midpoint

from conftest import make_traversal

finite32 = st.floats(
    min_value=-1e4, max_value=1e4, allow_nan=False, allow_infinity=False, width=32
)


@st.composite
def vector_pair(draw, max_dim=16):
    dim = draw(st.integers(min_value=1, max_value=max_dim))
    a = draw(st.lists(finite32, min_size=dim, max_size=dim))
    b = draw(st.lists(finite32, min_size=dim, max_size=dim))
    return a, b


class TestEuclideanDistance:
    def test_identity(self):
        assert euclidean_distance([0, 0], [0, 0]) == 0.0

    def test_3_4_5(self):
        assert euclidean_distance([3, 0], [0, 4]) == 5.0

    def test_hand_sum(self):
        # sqrt(1 + 4 + 9)
        assert euclidean_distance([1, 1, 1], [2, 3, 4]) == math.sqrt(14.0)

    def test_dimension_mismatch_names_both(self):
        with pytest.raises(DimensionMismatch, match="3 vs 4"):
            euclidean_distance([1, 2, 3], [1, 2, 3, 4])

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            euclidean_distance([float("nan"), 0.0], [0.0, 0.0])

    @given(vector_pair())
    def test_symmetry(self, pair):
        a, b = pair
        assert euclidean_distance(a, b) == euclidean_distance(b, a)

    @given(vector_pair())
    def test_non_negative(self, pair):
        a, b = pair
        assert euclidean_distance(a, b) >= 0.0


def _gallery_setup(rows):
    traversal = make_traversal(np.asarray(rows, dtype=np.float32))
    store = DescriptorStore.from_traversals(traversal)
    gallery = SceneGallery.from_indices("g", "t", range(len(rows)))
    return gallery, store


class TestMeanGalleryDistance:
    def test_zero_for_matching_singleton(self):
        gallery, store = _gallery_setup([[0.0, 0.0]])
        assert mean_gallery_distance([0, 0], gallery, store) == 0.0

    def test_hand_sum(self):
        gallery, store = _gallery_setup([[3.0, 0.0], [0.0, 4.0], [0.0, 0.0]])
        assert mean_gallery_distance([0, 0], gallery, store) == 7.0 / 3.0

    def test_duplicate_descriptor_values_allowed(self):
        gallery, store = _gallery_setup([[1.0, 0.0], [1.0, 0.0]])
        assert mean_gallery_distance([1, 0], gallery, store) == 0.0

    def test_missing_reference_lists_the_pair(self):
        gallery, store = _gallery_setup([[1.0, 0.0]])
        bad = SceneGallery("g", (("t", 0), ("elsewhere", 7)))
        with pytest.raises(MissingReference, match=r"\('elsewhere', 7\)"):
            mean_gallery_distance([0, 0], bad, store)

    def test_query_dim_checked(self):
        gallery, store = _gallery_setup([[1.0, 0.0]])
        with pytest.raises(DimensionMismatch):
            mean_gallery_distance([0, 0, 0], gallery, store)

    @given(st.data())
    @settings(max_examples=50)
    def test_permutation_invariance(self, data):
        n = data.draw(st.integers(min_value=1, max_value=8))
        dim = data.draw(st.integers(min_value=1, max_value=6))
        rows = data.draw(
            st.lists(
                st.lists(finite32, min_size=dim, max_size=dim), min_size=n, max_size=n
            )
        )
        query = data.draw(st.lists(finite32, min_size=dim, max_size=dim))
        perm = data.draw(st.permutations(range(n)))
        traversal = make_traversal(np.asarray(rows, dtype=np.float32))
        store = DescriptorStore.from_traversals(traversal)
        original = SceneGallery.from_indices("g", "t", range(n))
        shuffled = SceneGallery.from_indices("g", "t", perm)
        assert mean_gallery_distance(query, original, store) == mean_gallery_distance(
            query, shuffled, store
        )

    @pytest.mark.parametrize("scale", [0.01, 1.0, 100.0])
    def test_scaling_scales_the_mean(self, rng, scale):
        rows = rng.normal(size=(6, 5)).astype(np.float32)
        query = rng.normal(size=5)
        gallery, store = _gallery_setup(rows)
        scaled_gallery, scaled_store = _gallery_setup(rows * np.float32(scale))
        base = mean_gallery_distance(query, gallery, store)
        scaled = mean_gallery_distance(query * scale, scaled_gallery, scaled_store)
        assert scaled == pytest.approx(scale * base, rel=1e-6)


class TestFrame:
    def test_memorability_range(self):
        with pytest.raises(ValidationError, match="memorability"):
            Frame(id="x", index=0, position=0.0, memorability=1.5)

    def test_planar_position_coerced(self):
        fr = Frame(id="x", index=0, position=(1, 2))
        assert fr.position == (1.0, 2.0)

    def test_bad_planar_length(self):
        with pytest.raises(ValidationError):
            Frame(id="x", index=0, position=(1.0, 2.0, 3.0))

    def test_negative_index(self):
        with pytest.raises(ValidationError):
            Frame(id="x", index=-1, position=0.0)

    def test_is_scene(self):
        assert Frame(id="x", index=0, position=0.0, label="bridge").is_scene
        assert not Frame(id="x", index=0, position=0.0).is_scene


class TestDescriptorMatrix:
    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError, match="row 1, column 0"):
            DescriptorMatrix([[1.0, 2.0], [np.inf, 0.0]])

    def test_rejects_1d(self):
        with pytest.raises(ValidationError):
            DescriptorMatrix([1.0, 2.0])

    def test_read_only(self):
        m = DescriptorMatrix([[1.0, 2.0]])
        with pytest.raises(ValueError):
            m.values[0, 0] = 3.0

    def test_equality_is_bitwise(self):
        a = DescriptorMatrix([[1.0, 2.0]])
        b = DescriptorMatrix([[1.0, 2.0]])
        c = DescriptorMatrix([[1.0, 2.000001]])
        assert a == b
        assert a != c


class TestTraversal:
    def test_index_alignment_enforced(self):
        frames = (Frame(id="a", index=0, position=0.0),)
        with pytest.raises(ValidationError, match="frames"):
            Traversal("t", frames, DescriptorMatrix([[1.0], [2.0]]))

    def test_indices_must_be_consecutive(self):
        frames = (
            Frame(id="a", index=0, position=0.0),
            Frame(id="b", index=2, position=1.0),
        )
        with pytest.raises(ValidationError, match="consecutive"):
            Traversal("t", frames, DescriptorMatrix([[1.0], [2.0]]))

    def test_route_positions_monotonic(self):
        frames = (
            Frame(id="a", index=0, position=5.0),
            Frame(id="b", index=1, position=4.0),
        )
        with pytest.raises(ValidationError, match="decreases"):
            Traversal("t", frames, DescriptorMatrix([[1.0], [2.0]]))

    def test_equal_route_positions_allowed(self):
        t = make_traversal([[1.0], [2.0]], positions=[3.0, 3.0])
        assert len(t) == 2

    def test_mixed_variants_rejected(self):
        frames = (
            Frame(id="a", index=0, position=0.0),
            Frame(id="b", index=1, position=(1.0, 1.0)),
        )
        with pytest.raises(ValidationError, match="mixes"):
            Traversal("t", frames, DescriptorMatrix([[1.0], [2.0]]))

    def test_duplicate_ids_rejected(self):
        frames = (
            Frame(id="a", index=0, position=0.0),
            Frame(id="a", index=1, position=1.0),
        )
        with pytest.raises(ValidationError, match="duplicate"):
            Traversal("t", frames, DescriptorMatrix([[1.0], [2.0]]))

    def test_planar_positions(self):
        t = make_traversal([[1.0], [2.0]], positions=[(0.0, 0.0), (3.0, 4.0)])
        assert t.is_planar
        assert t.positions().shape == (2, 2)


class TestSceneGallery:
    def test_rejects_empty(self):
        with pytest.raises(ValidationError, match="no members"):
            SceneGallery("g", ())

    def test_rejects_duplicate_references(self):
        with pytest.raises(ValidationError, match="duplicate"):
            SceneGallery("g", (("t", 1), ("t", 1)))

    def test_rejects_empty_name(self):
        with pytest.raises(ValidationError):
            SceneGallery("", (("t", 1),))


class TestDescriptorStore:
    def test_dim_consistency(self):
        a = make_traversal([[1.0, 2.0]], name="a")
        b = make_traversal([[1.0, 2.0, 3.0]], name="b")
        store = DescriptorStore.from_traversals(a)
        with pytest.raises(DimensionMismatch):
            store.add(b)

    def test_duplicate_names_rejected(self):
        a = make_traversal([[1.0]], name="a")
        store = DescriptorStore.from_traversals(a)
        with pytest.raises(ValidationError):
            store.add(a)

    def test_row_out_of_range(self):
        store = DescriptorStore.from_traversals(make_traversal([[1.0]]))
        with pytest.raises(MissingReference):
            store.row("t", 5)


class TestPositionHelpers:
    def test_route_distance(self):
        assert position_distance(3.0, 10.0) == 7.0

    def test_planar_distance(self):
        assert position_distance((0.0, 0.0), (3.0, 4.0)) == 5.0

    def test_mixed_variants_rejected(self):
        with pytest.raises(ValidationError):
            position_distance(1.0, (1.0, 2.0))

    def test_midpoints(self):
        assert position_midpoint(0.0, 10.0) == 5.0
        assert position_midpoint((0.0, 0.0), (4.0, 6.0)) == (2.0, 3.0)
