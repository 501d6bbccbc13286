"""Scene retrieval: classify a query descriptor against scene galleries at test time.

The predicted class is the gallery with the smallest mean Euclidean distance
to the query; that winning mean is the confidence score (lower = more
confident). Ties break to the lexicographically smallest class name.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    DescriptorStore,
    SceneGallery,
    Traversal,
    _as_float64_vector,
    mean_distance_to_rows,
)
from .errors import DimensionMismatch, ValidationError, VismapError


@dataclass(frozen=True)
class Classification:
    """Result of classifying one query descriptor.

    ``confidence_score`` is the winning class's mean gallery distance and
    always equals ``per_class_scores[class_name]``.
    """

    class_name: str
    confidence_score: float
    per_class_scores: dict

    def __post_init__(self):
        if self.class_name not in self.per_class_scores:
            raise ValidationError(f"winning class {self.class_name!r} missing from scores")
        if self.per_class_scores[self.class_name] != self.confidence_score:
            raise ValidationError("confidence_score must equal the winning class score")
        best = min(self.per_class_scores.values())
        if self.confidence_score != best:
            raise ValidationError("class_name must be the argmin of per_class_scores")


class SceneClassifier:
    """Immutable classifier over user-defined scene galleries.

    Gallery member rows are resolved once at construction; classify is pure
    and safe to run concurrently.
    """

    def __init__(self, galleries, store: DescriptorStore):
        galleries = list(galleries)
        if len(galleries) < 2:
            raise ValidationError(f"need at least 2 galleries, got {len(galleries)}")
        names = [g.class_name for g in galleries]
        if len(set(names)) != len(names):
            raise ValidationError(f"gallery class names must be distinct, got {names}")
        resolved = {g.class_name: store.resolve(g) for g in galleries}
        dims = {rows.shape[1] for rows in resolved.values()}
        if len(dims) != 1:
            raise DimensionMismatch(f"galleries disagree on descriptor dim: {sorted(dims)}")
        self._dim = dims.pop()
        # Lexicographic iteration order implements the tie-break.
        self._ordered = sorted(resolved.items())
        self._galleries = tuple(galleries)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def class_names(self) -> tuple:
        return tuple(name for name, _ in self._ordered)

    @property
    def galleries(self) -> tuple:
        return self._galleries

    def classify(self, query) -> Classification:
        q = _as_float64_vector(query)
        if q.shape[0] != self._dim:
            raise DimensionMismatch(
                f"descriptor dimensions differ: query {q.shape[0]} vs galleries {self._dim}"
            )
        scores = {}
        best_name = None
        best_score = None
        for name, rows in self._ordered:
            score = mean_distance_to_rows(q, rows)
            scores[name] = score
            if best_score is None or score < best_score:
                best_name = name
                best_score = score
        return Classification(best_name, best_score, scores)

    def classify_traversal(self, traversal: Traversal) -> list:
        """Elementwise classify; output order matches frame index order."""
        results = []
        for fr in traversal.frames:
            try:
                results.append(self.classify(traversal.descriptors.row(fr.index)))
            except VismapError as exc:
                raise type(exc)(f"frame {fr.index}: {exc}") from exc
        return results


def classify(query, classifier: SceneClassifier) -> Classification:
    return classifier.classify(query)


def classify_traversal(traversal: Traversal, classifier: SceneClassifier) -> list:
    return classifier.classify_traversal(traversal)


def galleries_from_ranges(traversal_name: str, ranges_by_class: dict) -> list:
    """Build galleries from {class name: [[start, stop], ...]} half-open index ranges."""
    galleries = []
    for name, ranges in ranges_by_class.items():
        indices = []
        for pair in ranges:
            start, stop = int(pair[0]), int(pair[1])
            if stop <= start:
                raise ValidationError(
                    f"gallery {name!r}: empty or inverted range [{start}, {stop})"
                )
            indices.extend(range(start, stop))
        galleries.append(SceneGallery.from_indices(name, traversal_name, indices))
    return galleries
