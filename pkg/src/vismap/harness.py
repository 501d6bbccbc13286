"""Experiment protocols and report writers.

Three protocols, each seeded and reproducible byte for byte:

  * k-fold scene classification: per class, frames split into equal
    sequential sections used in turn as reference galleries.
  * coverage at a fixed budget: each strategy sources a growing fraction of
    the map (ranked by its own score) while gap-midpoint distance sampling
    fills the rest; reports the percentage of available scene frames included.
  * localization deltas: the same hybrid maps localize query traversals and
    are compared per category against the fraction-0 distance baseline.

Gallery reference frames (by default 25% of each scene class, 10% of
undefined, seeded random) are excluded from map candidacy and from the
coverage denominator; the budget stays a fraction of the full traversal, so
the missing frames are compensated by other selections.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import (
    DescriptorStore,
    SceneGallery,
    Traversal,
    UNDEFINED_LABEL,
)
from .errors import ConfigError
from .localization import LocalizationConfig, MapView, evaluate_localization
from .retrieval import SceneClassifier
from .sampling import (
    PROVENANCE_CONTEXT,
    PROVENANCE_MEMORABILITY,
    SamplerConfig,
    VisualMap,
    enforce_budget,
    sample_dmc,
)

STRATEGY_DISTANCE = "distance"
STRATEGY_MEMORABILITY = "memorability"
STRATEGY_CONTEXT = "context"
STRATEGY_DMC = "dmc"
STRATEGIES = (STRATEGY_DISTANCE, STRATEGY_MEMORABILITY, STRATEGY_CONTEXT, STRATEGY_DMC)


# ---------------------------------------------------------------------------
# k-fold scene classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldSpec:
    """Per label, the traversal's frames split into fold_count sequential sections."""

    fold_count: int
    sections: dict

    def __post_init__(self):
        if self.fold_count < 2:
            raise ConfigError(f"fold_count must be >= 2, got {self.fold_count}")
        for label, secs in self.sections.items():
            if len(secs) != self.fold_count:
                raise ConfigError(f"class {label!r} has {len(secs)} sections")
            flat = [i for sec in secs for i in sec]
            if sorted(flat) != flat or len(set(flat)) != len(flat):
                raise ConfigError(f"class {label!r}: sections must partition in order")

    @classmethod
    def from_traversal(cls, traversal: Traversal, fold_count: int = 4) -> "FoldSpec":
        by_label = {}
        for fr in traversal.frames:
            by_label.setdefault(fr.label, []).append(fr.index)
        sections = {}
        for label in sorted(by_label):
            idxs = by_label[label]
            if len(idxs) < fold_count:
                raise ConfigError(
                    f"class {label!r} has {len(idxs)} frames; cannot split into "
                    f"{fold_count} sequential sections"
                )
            sections[label] = tuple(
                tuple(int(i) for i in part) for part in np.array_split(idxs, fold_count)
            )
        return cls(fold_count=fold_count, sections=sections)


@dataclass(frozen=True)
class FoldResult:
    fold: int
    reference_indices: tuple
    test_indices: tuple
    per_class_accuracy: dict


@dataclass(frozen=True)
class ClassificationEvalReport:
    folds: tuple
    per_class_accuracy: dict
    scene_average: float
    undefined_accuracy: float | None


def run_classification_eval(
    traversal: Traversal, folds: FoldSpec, classifier_factory=None
) -> ClassificationEvalReport:
    """For each fold, build galleries from that section and classify the rest.

    Per-class accuracy is averaged across folds; the scene-class average is
    reported separately from undefined accuracy. ``classifier_factory`` maps
    (galleries, store) to an object with a ``classify(vector)`` method and
    defaults to SceneClassifier.
    """
    if classifier_factory is None:
        classifier_factory = SceneClassifier
    store = DescriptorStore.from_traversals(traversal)
    labels = sorted(folds.sections)
    fold_results = []
    for k in range(folds.fold_count):
        galleries = [
            SceneGallery.from_indices(label, traversal.name, folds.sections[label][k])
            for label in labels
        ]
        reference = {i for g in galleries for _, i in g.member_rows}
        classifier = classifier_factory(galleries, store)
        correct = {label: 0 for label in labels}
        total = {label: 0 for label in labels}
        test_indices = []
        for fr in traversal.frames:
            if fr.index in reference or fr.label not in total:
                continue
            test_indices.append(fr.index)
            total[fr.label] += 1
            predicted = classifier.classify(traversal.descriptors.row(fr.index)).class_name
            if predicted == fr.label:
                correct[fr.label] += 1
        accuracy = {
            label: 100.0 * correct[label] / total[label]
            for label in labels
            if total[label] > 0
        }
        fold_results.append(
            FoldResult(
                fold=k,
                reference_indices=tuple(sorted(reference)),
                test_indices=tuple(test_indices),
                per_class_accuracy=accuracy,
            )
        )
    per_class = {}
    for label in labels:
        values = [fr.per_class_accuracy[label] for fr in fold_results if label in fr.per_class_accuracy]
        if values:
            per_class[label] = sum(values) / len(values)
    scene_values = [v for label, v in per_class.items() if label != UNDEFINED_LABEL]
    if not scene_values:
        raise ConfigError("no scene classes to evaluate")
    return ClassificationEvalReport(
        folds=tuple(fold_results),
        per_class_accuracy=per_class,
        scene_average=sum(scene_values) / len(scene_values),
        undefined_accuracy=per_class.get(UNDEFINED_LABEL),
    )


# ---------------------------------------------------------------------------
# Shared experiment plumbing: references, galleries, sourcing pools
# ---------------------------------------------------------------------------


def select_reference_indices(
    traversal: Traversal,
    rng: np.random.Generator,
    scene_fraction: float = 0.25,
    undefined_fraction: float = 0.10,
) -> frozenset:
    """Seeded random reference frames per class (at least one per class present)."""
    by_label = {}
    for fr in traversal.frames:
        by_label.setdefault(fr.label, []).append(fr.index)
    refs = []
    for label in sorted(by_label):
        idxs = np.asarray(by_label[label])
        fraction = undefined_fraction if label == UNDEFINED_LABEL else scene_fraction
        k = min(len(idxs), max(1, int(round(fraction * len(idxs)))))
        refs.extend(int(i) for i in rng.choice(idxs, size=k, replace=False))
    return frozenset(refs)


def galleries_from_references(traversal: Traversal, reference_indices) -> list:
    by_label = {}
    for i in sorted(reference_indices):
        by_label.setdefault(traversal.frames[i].label, []).append(i)
    return [
        SceneGallery.from_indices(label, traversal.name, idxs)
        for label, idxs in sorted(by_label.items())
    ]


@dataclass(frozen=True)
class ExperimentContext:
    """Everything the coverage and localization protocols share for one traversal."""

    traversal: Traversal
    config: SamplerConfig
    classifier: SceneClassifier
    classifications: tuple
    reference_indices: frozenset
    seed: int

    @classmethod
    def build(
        cls,
        traversal: Traversal,
        config: SamplerConfig,
        seed: int,
        scene_ref_fraction: float = 0.25,
        undefined_ref_fraction: float = 0.10,
    ) -> "ExperimentContext":
        rng = np.random.default_rng(seed)
        refs = select_reference_indices(
            traversal, rng, scene_ref_fraction, undefined_ref_fraction
        )
        galleries = galleries_from_references(traversal, refs)
        store = DescriptorStore.from_traversals(traversal)
        classifier = SceneClassifier(galleries, store)
        classifications = tuple(classifier.classify_traversal(traversal))
        config = replace(config, excluded_indices=refs)
        return cls(traversal, config, classifier, classifications, refs, seed)

    def with_threshold_from_scene_quantile(self, quantile: float) -> "ExperimentContext":
        """Same context with threshold_S set to a quantile of the non-reference
        scene frames' confidence scores (a data-calibrated threshold)."""
        if not 0.0 <= quantile <= 1.0:
            raise ConfigError(f"scene quantile {quantile} outside [0, 1]")
        scores = [
            self.classifications[fr.index].confidence_score
            for fr in self.traversal.frames
            if fr.is_scene and fr.index not in self.reference_indices
        ]
        if not scores:
            raise ConfigError("no non-reference scene frames to calibrate a threshold on")
        threshold = float(np.quantile(scores, quantile))
        return replace(self, config=replace(self.config, threshold_S=threshold))

    def scene_available(self) -> list:
        return [
            fr.index
            for fr in self.traversal.frames
            if fr.is_scene and fr.index not in self.reference_indices
        ]


def sourcing_pool(ctx: ExperimentContext, strategy: str) -> list:
    """Strategy admissions as (index, provenance), best first.

    Memorability ranks every frame by its score and context ranks every
    scene-classified frame by confidence, so the sourcing fraction acts as
    the strategy's effective threshold (taking the top k admits exactly the
    frames a threshold at the k-th score would). The combined sampler keeps
    its admission order and its configured thresholds; the distance strategy
    sources nothing (it is the fill).
    """
    traversal, config = ctx.traversal, ctx.config
    excluded = config.excluded_indices
    if strategy == STRATEGY_DISTANCE:
        return []
    if strategy == STRATEGY_MEMORABILITY:
        frames = [
            fr
            for fr in traversal.frames
            if fr.index not in excluded and fr.memorability is not None
        ]
        frames.sort(key=lambda fr: (-fr.memorability, fr.index))
        return [(fr.index, PROVENANCE_MEMORABILITY) for fr in frames]
    if strategy == STRATEGY_CONTEXT:
        rows = []
        for fr in traversal.frames:
            if fr.index in excluded:
                continue
            cls = ctx.classifications[fr.index]
            if cls.class_name != UNDEFINED_LABEL:
                rows.append((cls.confidence_score, fr.index))
        rows.sort()
        return [(i, PROVENANCE_CONTEXT) for _, i in rows]
    if strategy == STRATEGY_DMC:
        vmap = sample_dmc(traversal, ctx.classifier, config, ctx.classifications)
        return list(zip(vmap.selected, vmap.provenance))
    raise ConfigError(f"unknown strategy {strategy!r} (expected one of {STRATEGIES})")


def build_hybrid_map(ctx: ExperimentContext, strategy: str, fraction: float) -> VisualMap:
    """fraction * budget frames from the strategy's pool, distance fill to budget."""
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError(f"fraction {fraction} outside [0, 1]")
    budget = ctx.config.budget_count(ctx.traversal)
    k = int(round(fraction * budget))
    sourced = sourcing_pool(ctx, strategy)[:k]
    sourced.sort()
    vmap = VisualMap(
        ctx.traversal.name,
        tuple(i for i, _ in sourced),
        tuple(p for _, p in sourced),
    )
    return enforce_budget(vmap, ctx.traversal, ctx.config)


# ---------------------------------------------------------------------------
# Coverage at a fixed budget
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageCell:
    strategy: str
    fraction: float
    scene_inclusion_pct: float
    map_size: int
    sourced: int


@dataclass(frozen=True)
class CoverageReport:
    cells: tuple
    budget_fraction: float
    seed: int
    scene_available: int
    reference_count: int

    def cell(self, strategy: str, fraction: float) -> CoverageCell:
        for c in self.cells:
            if c.strategy == strategy and c.fraction == fraction:
                return c
        raise KeyError(f"no cell for ({strategy}, {fraction})")


def run_coverage_experiment(
    ctx: ExperimentContext, strategies, fractions
) -> CoverageReport:
    """Scene-frame inclusion per (strategy, sourcing fraction) at the fixed budget."""
    available = set(ctx.scene_available())
    if not available:
        raise ConfigError("traversal has no scene frames outside the reference set")
    cells = []
    for strategy in strategies:
        pool_size = len(sourcing_pool(ctx, strategy))
        for fraction in fractions:
            vmap = build_hybrid_map(ctx, strategy, fraction)
            included = sum(1 for i in vmap.selected if i in available)
            budget = ctx.config.budget_count(ctx.traversal)
            cells.append(
                CoverageCell(
                    strategy=strategy,
                    fraction=float(fraction),
                    scene_inclusion_pct=100.0 * included / len(available),
                    map_size=len(vmap),
                    sourced=min(pool_size, int(round(fraction * budget))),
                )
            )
    return CoverageReport(
        cells=tuple(cells),
        budget_fraction=ctx.config.budget_fraction,
        seed=ctx.seed,
        scene_available=len(available),
        reference_count=len(ctx.reference_indices),
    )


# ---------------------------------------------------------------------------
# Localization deltas against the distance baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalizationCell:
    strategy: str
    fraction: float
    accuracy_scene: float | None
    accuracy_undefined: float | None
    scene_delta_points: float | None
    undefined_delta_points: float | None
    scene_delta_relative: float | None
    undefined_delta_relative: float | None


@dataclass(frozen=True)
class LocalizationGrid:
    cells: tuple
    baseline_scene: float | None
    baseline_undefined: float | None
    seed: int

    def cell(self, strategy: str, fraction: float) -> LocalizationCell:
        for c in self.cells:
            if c.strategy == strategy and c.fraction == fraction:
                return c
        raise KeyError(f"no cell for ({strategy}, {fraction})")


def _mean_or_none(values) -> float | None:
    values = [v for v in values if v is not None]
    if not values:
        return None
    return sum(values) / len(values)


def _evaluate_map(ctx: ExperimentContext, vmap: VisualMap, queries, loc_cfg):
    """Mean per-category accuracy over the query traversals (equal weight each).

    When a query traversal shares the map traversal's name it is treated as
    another pass over the same route with aligned frame indices, so the
    gallery reference frames are excluded from its measured queries too.
    """
    view = MapView(vmap, ctx.traversal)
    scene, undefined = [], []
    for q in queries:
        excluded = ctx.reference_indices if q.name == ctx.traversal.name else frozenset()
        report = evaluate_localization(q, view, loc_cfg, excluded_query_indices=excluded)
        scene.append(report.accuracy_scene)
        undefined.append(report.accuracy_undefined)
    return _mean_or_none(scene), _mean_or_none(undefined)


def run_localization_experiment(
    ctx: ExperimentContext,
    query_traversals,
    strategies,
    fractions,
    loc_cfg: LocalizationConfig,
) -> LocalizationGrid:
    """Build hybrid maps per (strategy, fraction) and report accuracy deltas.

    Deltas are absolute percentage points and percent relative to the
    fraction-0 distance baseline; the point form is the default presentation.
    """
    queries = list(query_traversals)
    if not queries:
        raise ConfigError("need at least one query traversal")
    baseline_map = build_hybrid_map(ctx, STRATEGY_DISTANCE, 0.0)
    base_scene, base_undefined = _evaluate_map(ctx, baseline_map, queries, loc_cfg)

    def points(ours, base):
        return None if ours is None or base is None else ours - base

    def relative(ours, base):
        if ours is None or base is None or base == 0:
            return None
        return 100.0 * (ours - base) / base

    cells = []
    for strategy in strategies:
        for fraction in fractions:
            vmap = build_hybrid_map(ctx, strategy, fraction)
            scene, undefined = _evaluate_map(ctx, vmap, queries, loc_cfg)
            cells.append(
                LocalizationCell(
                    strategy=strategy,
                    fraction=float(fraction),
                    accuracy_scene=scene,
                    accuracy_undefined=undefined,
                    scene_delta_points=points(scene, base_scene),
                    undefined_delta_points=points(undefined, base_undefined),
                    scene_delta_relative=relative(scene, base_scene),
                    undefined_delta_relative=relative(undefined, base_undefined),
                )
            )
    return LocalizationGrid(
        cells=tuple(cells),
        baseline_scene=base_scene,
        baseline_undefined=base_undefined,
        seed=ctx.seed,
    )


# ---------------------------------------------------------------------------
# Report writers: plot-ready long-format CSV plus a JSON sidecar
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_sidecar(path, config: dict, seed: int) -> None:
    payload = {"seed": seed, "config": config}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_classification_csv(report: ClassificationEvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "accuracy_pct"])
        for label in sorted(report.per_class_accuracy):
            writer.writerow([label, _fmt(report.per_class_accuracy[label])])
        writer.writerow(["scene_average", _fmt(report.scene_average)])
        if report.undefined_accuracy is not None:
            writer.writerow(["undefined", _fmt(report.undefined_accuracy)])


def write_coverage_csv(report: CoverageReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["strategy", "fraction", "scene_inclusion_pct", "map_size", "sourced"]
        )
        for c in report.cells:
            writer.writerow(
                [c.strategy, _fmt(c.fraction), _fmt(c.scene_inclusion_pct), c.map_size, c.sourced]
            )


def write_localization_csv(grid: LocalizationGrid, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "strategy",
                "fraction",
                "accuracy_scene",
                "accuracy_undefined",
                "scene_delta_points",
                "undefined_delta_points",
                "scene_delta_relative",
                "undefined_delta_relative",
            ]
        )
        for c in grid.cells:
            writer.writerow(
                [
                    c.strategy,
                    _fmt(c.fraction),
                    _fmt(c.accuracy_scene),
                    _fmt(c.accuracy_undefined),
                    _fmt(c.scene_delta_points),
                    _fmt(c.undefined_delta_points),
                    _fmt(c.scene_delta_relative),
                    _fmt(c.undefined_delta_relative),
                ]
            )
