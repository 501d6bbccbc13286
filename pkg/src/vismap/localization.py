"""Windowed nearest-neighbor localization of query frames against a visual map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Traversal, UNDEFINED_LABEL, position_distance
from .errors import ConfigError, DimensionMismatch, ValidationError
from .sampling import VisualMap

CATEGORY_SCENE = "scene"
CATEGORY_UNDEFINED = "undefined"


@dataclass(frozen=True)
class LocalizationConfig:
    """Window and correctness settings.

    Exactly one of ``window_frames`` (candidate map frames nearest the query's
    ground-truth position) or ``window_m`` (all map frames within a radius)
    must be set. A retrieval counts as correct when the retrieved frame lies
    within ``correct_tol_m`` of the query's ground-truth position.
    """

    window_frames: int | None = None
    window_m: float | None = None
    correct_tol_m: float = 25.0

    def __post_init__(self):
        if (self.window_frames is None) == (self.window_m is None):
            raise ConfigError("set exactly one of window_frames / window_m")
        if self.window_frames is not None and self.window_frames <= 0:
            raise ConfigError(f"window_frames must be > 0, got {self.window_frames}")
        if self.window_m is not None and self.window_m <= 0:
            raise ConfigError(f"window_m must be > 0, got {self.window_m}")
        if self.correct_tol_m <= 0:
            raise ConfigError(f"correct_tol_m must be > 0, got {self.correct_tol_m}")


class MapView:
    """Positions and float64 descriptors of a map's selected frames, ready for search."""

    def __init__(self, vmap: VisualMap, traversal: Traversal):
        if vmap.traversal != traversal.name:
            raise ValidationError(
                f"map belongs to {vmap.traversal!r}, not {traversal.name!r}"
            )
        if len(vmap) == 0:
            raise ValidationError("cannot localize against an empty map")
        idx = np.asarray(vmap.selected, dtype=np.int64)
        if idx[-1] >= len(traversal):
            raise ValidationError(
                f"map index {idx[-1]} out of range for traversal of {len(traversal)} frames"
            )
        self.map_indices = idx
        self.positions = traversal.positions()[idx]
        self.descriptors = traversal.descriptors.values[idx].astype(np.float64)
        self.frame_positions = [traversal.frames[i].position for i in vmap.selected]
        self.planar = traversal.is_planar

    def __len__(self) -> int:
        return len(self.map_indices)


def _position_distances(view: MapView, position) -> np.ndarray:
    planar_query = isinstance(position, (tuple, list, np.ndarray))
    if planar_query != view.planar:
        raise ValidationError("query and map use different position variants")
    if view.planar:
        delta = view.positions - np.asarray(position, dtype=np.float64)
        return np.sqrt((delta * delta).sum(axis=1))
    return np.abs(view.positions - float(position))


def localize(query_position, query_descriptor, view: MapView, cfg: LocalizationConfig):
    """Retrieve the map frame index for one query, or None when out of coverage.

    Candidates are the map frames nearest the query's ground-truth position;
    among them the frame with minimal descriptor distance wins, ties going to
    the lowest map index.
    """
    q = np.asarray(query_descriptor, dtype=np.float64).ravel()
    if q.shape[0] != view.descriptors.shape[1]:
        raise DimensionMismatch(
            f"descriptor dimensions differ: query {q.shape[0]} vs map "
            f"{view.descriptors.shape[1]}"
        )
    pos_d = _position_distances(view, query_position)
    if cfg.window_frames is not None:
        k = min(cfg.window_frames, len(view))
        order = np.lexsort((view.map_indices, pos_d))[:k]
        candidates = np.sort(order)
    else:
        candidates = np.nonzero(pos_d <= cfg.window_m)[0]
    if candidates.size == 0:
        return None
    delta = view.descriptors[candidates] - q
    dd = np.sqrt((delta * delta).sum(axis=1))
    best = candidates[int(np.argmin(dd))]
    return int(view.map_indices[best])


@dataclass(frozen=True)
class QueryOutcome:
    query_index: int
    retrieved_index: int | None
    correct: bool
    category: str


@dataclass(frozen=True)
class LocalizationReport:
    """Per-query outcomes plus per-category accuracy percentages.

    Accuracy is None for a category with no queries. Deltas against a baseline
    report come in two forms: absolute percentage points and percent relative
    to the baseline value.
    """

    outcomes: tuple
    accuracy_scene: float | None
    accuracy_undefined: float | None

    @staticmethod
    def _accuracy(outcomes) -> float | None:
        if not outcomes:
            return None
        return 100.0 * sum(1 for o in outcomes if o.correct) / len(outcomes)

    @classmethod
    def from_outcomes(cls, outcomes) -> "LocalizationReport":
        outcomes = tuple(outcomes)
        scene = [o for o in outcomes if o.category == CATEGORY_SCENE]
        undef = [o for o in outcomes if o.category == CATEGORY_UNDEFINED]
        return cls(outcomes, cls._accuracy(scene), cls._accuracy(undef))

    def delta_vs(self, baseline: "LocalizationReport") -> dict:
        def points(ours, base):
            if ours is None or base is None:
                return None
            return ours - base

        def relative(ours, base):
            if ours is None or base is None or base == 0:
                return None
            return 100.0 * (ours - base) / base

        return {
            "scene_points": points(self.accuracy_scene, baseline.accuracy_scene),
            "undefined_points": points(self.accuracy_undefined, baseline.accuracy_undefined),
            "scene_relative": relative(self.accuracy_scene, baseline.accuracy_scene),
            "undefined_relative": relative(
                self.accuracy_undefined, baseline.accuracy_undefined
            ),
        }


def evaluate_localization(
    queries: Traversal,
    view: MapView,
    cfg: LocalizationConfig,
    excluded_query_indices=frozenset(),
) -> LocalizationReport:
    """Localize every non-excluded query frame and score per-category accuracy.

    A query is correct when the retrieved map frame lies within
    ``correct_tol_m`` of the query's ground-truth position; an empty candidate
    window counts as incorrect. Frames used as gallery references should be
    passed in ``excluded_query_indices`` so they are not measured.
    """
    excluded = frozenset(int(i) for i in excluded_query_indices)
    outcomes = []
    for fr in queries.frames:
        if fr.index in excluded:
            continue
        retrieved = localize(fr.position, queries.descriptors.row(fr.index), view, cfg)
        if retrieved is None:
            correct = False
        else:
            slot = int(np.searchsorted(view.map_indices, retrieved))
            correct = (
                position_distance(view.frame_positions[slot], fr.position)
                <= cfg.correct_tol_m
            )
        outcomes.append(
            QueryOutcome(
                query_index=fr.index,
                retrieved_index=retrieved,
                correct=correct,
                category=CATEGORY_SCENE if fr.label != UNDEFINED_LABEL else CATEGORY_UNDEFINED,
            )
        )
    return LocalizationReport.from_outcomes(outcomes)


def report_to_json_dict(report: LocalizationReport, baseline=None) -> dict:
    data = {
        "accuracy_scene": report.accuracy_scene,
        "accuracy_undefined": report.accuracy_undefined,
        "queries": [
            {
                "query_index": o.query_index,
                "retrieved_index": o.retrieved_index,
                "correct": o.correct,
                "category": o.category,
            }
            for o in report.outcomes
        ],
    }
    if baseline is not None:
        data["delta_vs_baseline"] = report.delta_vs(baseline)
    return data


def report_from_json_dict(data: dict) -> LocalizationReport:
    outcomes = tuple(
        QueryOutcome(
            query_index=int(q["query_index"]),
            retrieved_index=None if q["retrieved_index"] is None else int(q["retrieved_index"]),
            correct=bool(q["correct"]),
            category=str(q["category"]),
        )
        for q in data["queries"]
    )
    return LocalizationReport.from_outcomes(outcomes)
