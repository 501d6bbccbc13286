"""Shared builders for in-memory traversals used across the test suite."""

import numpy as np
import pytest

from vismap import DescriptorMatrix, Frame, Traversal


def make_traversal(
    descriptors,
    positions=None,
    labels=None,
    memorability=None,
    name="t",
    timestamps=None,
):
    """Build a traversal from a descriptor matrix and optional per-frame fields."""
    values = np.asarray(descriptors, dtype=np.float32)
    n = values.shape[0]
    if positions is None:
        positions = [10.0 * i for i in range(n)]
    if labels is None:
        labels = ["undefined"] * n
    frames = tuple(
        Frame(
            id=f"{name}-{i}",
            index=i,
            position=positions[i],
            timestamp=None if timestamps is None else timestamps[i],
            label=labels[i],
            memorability=None if memorability is None else memorability[i],
        )
        for i in range(n)
    )
    return Traversal(name=name, frames=frames, descriptors=DescriptorMatrix(values))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
