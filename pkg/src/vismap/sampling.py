"""Visual map construction: distance, memorability, contextual, and combined sampling.

The combined sampler walks the traversal once, tracking the distance moved
since the last admitted frame, and applies a fixed admission ladder per frame:

  (a) classified "undefined"                          -> discard
  (b) biased confidence < threshold_S                 -> admit, provenance "context"
  (c) moved > dist_min and memorability > threshold   -> admit, provenance "memorability"
  (d) moved > dist_max                                -> admit, provenance "dist_max_fallback"
  (e) otherwise                                       -> discard

The distance counter resets on every admission and is unbounded before the
first one, so the first admissible frame always enters. All threshold
comparisons are strict; boundary equality never admits. Note the ladder puts
no distance floor under branch (b): consecutive context admissions at
near-zero spacing are possible by design.
"""

from __future__ import annotations

import bisect
import heapq
import logging
from dataclasses import dataclass

from .core import Traversal, position_distance, position_midpoint, UNDEFINED_LABEL
from .errors import ConfigError, ValidationError
from .retrieval import SceneClassifier
from .scoring import biased_confidence

logger = logging.getLogger(__name__)

PROVENANCE_DISTANCE = "distance"
PROVENANCE_MEMORABILITY = "memorability"
PROVENANCE_CONTEXT = "context"
PROVENANCE_DIST_MAX = "dist_max_fallback"
PROVENANCES = (
    PROVENANCE_DISTANCE,
    PROVENANCE_MEMORABILITY,
    PROVENANCE_CONTEXT,
    PROVENANCE_DIST_MAX,
)

# Trim order when a map exceeds its budget; context frames are protected.
_DROP_TIERS = (PROVENANCE_DIST_MAX, PROVENANCE_MEMORABILITY, PROVENANCE_DISTANCE)


@dataclass(frozen=True)
class SamplerConfig:
    """All sampler parameters.

    ``threshold_S`` is in raw descriptor-distance units (confidence scores are
    distances). ``b_mem`` is signed; the default -0.2 makes memorable frames
    more likely to pass the contextual check. ``budget_fraction`` is the
    target map size as a fraction of the traversal's frames.
    """

    dist_interval_m: float = 10.0
    threshold_mem: float = 0.5
    threshold_S: float = 1.0
    b_mem: float = -0.2
    dist_min_m: float = 10.0
    dist_max_m: float = 50.0
    budget_fraction: float = 1.0
    excluded_indices: frozenset = frozenset()

    def __post_init__(self):
        if self.dist_interval_m <= 0:
            raise ConfigError(f"dist_interval_m must be > 0, got {self.dist_interval_m}")
        if not 0.0 <= self.threshold_mem <= 1.0:
            raise ConfigError(f"threshold_mem {self.threshold_mem} outside [0, 1]")
        if self.threshold_S < 0:
            raise ConfigError(f"threshold_S must be >= 0, got {self.threshold_S}")
        if not self.dist_min_m < self.dist_max_m:
            raise ConfigError(
                f"dist_min_m ({self.dist_min_m}) must be < dist_max_m ({self.dist_max_m})"
            )
        if not 0.0 < self.budget_fraction <= 1.0:
            raise ConfigError(f"budget_fraction {self.budget_fraction} outside (0, 1]")
        object.__setattr__(
            self, "excluded_indices", frozenset(int(i) for i in self.excluded_indices)
        )

    def budget_count(self, traversal: Traversal) -> int:
        return int(round(self.budget_fraction * len(traversal)))


@dataclass(frozen=True)
class VisualMap:
    """Ordered subset of a traversal's frames with per-frame admission provenance."""

    traversal: str
    selected: tuple
    provenance: tuple

    def __post_init__(self):
        selected = tuple(int(i) for i in self.selected)
        provenance = tuple(self.provenance)
        object.__setattr__(self, "selected", selected)
        object.__setattr__(self, "provenance", provenance)
        if len(selected) != len(provenance):
            raise ValidationError(
                f"selected ({len(selected)}) and provenance ({len(provenance)}) differ"
            )
        for prov in provenance:
            if prov not in PROVENANCES:
                raise ValidationError(f"unknown provenance {prov!r}")
        if selected and selected[0] < 0:
            raise ValidationError(f"frame indices must be >= 0, got {selected[0]}")
        if any(b <= a for a, b in zip(selected, selected[1:])):
            raise ValidationError("selected indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.selected)

    def count_by_provenance(self) -> dict:
        counts = {}
        for prov in self.provenance:
            counts[prov] = counts.get(prov, 0) + 1
        return counts


def _ordered_map(traversal_name, entries) -> VisualMap:
    entries = sorted(entries)
    return VisualMap(
        traversal_name,
        tuple(i for i, _ in entries),
        tuple(p for _, p in entries),
    )


def _check_excluded(traversal: Traversal, excluded) -> frozenset:
    excluded = frozenset(int(i) for i in excluded)
    out_of_range = [i for i in excluded if not 0 <= i < len(traversal)]
    if out_of_range:
        raise ConfigError(f"excluded indices out of range: {sorted(out_of_range)}")
    return excluded


def _require_memorability(traversal: Traversal) -> None:
    missing = [fr.index for fr in traversal.frames if fr.memorability is None]
    if missing:
        raise ConfigError(
            f"traversal {traversal.name!r}: {len(missing)} frames lack memorability "
            f"(first at index {missing[0]}); this sampler requires it"
        )


def sample_distance(traversal: Traversal, interval_m: float, excluded=frozenset()) -> VisualMap:
    """Select the first non-excluded frame, then every frame >= interval_m after the last pick."""
    if interval_m <= 0:
        raise ConfigError(f"interval_m must be > 0, got {interval_m}")
    excluded = _check_excluded(traversal, excluded)
    entries = []
    last_pos = None
    for fr in traversal.frames:
        if fr.index in excluded:
            continue
        if last_pos is None or position_distance(fr.position, last_pos) >= interval_m:
            entries.append((fr.index, PROVENANCE_DISTANCE))
            last_pos = fr.position
    return _ordered_map(traversal.name, entries)


def sample_memorability(
    traversal: Traversal, threshold_mem: float, excluded=frozenset()
) -> VisualMap:
    """Select exactly the frames with memorability strictly above the threshold."""
    _require_memorability(traversal)
    excluded = _check_excluded(traversal, excluded)
    entries = [
        (fr.index, PROVENANCE_MEMORABILITY)
        for fr in traversal.frames
        if fr.index not in excluded and fr.memorability > threshold_mem
    ]
    return _ordered_map(traversal.name, entries)


def sample_contextual(
    traversal: Traversal,
    classifier: SceneClassifier,
    threshold_S: float,
    excluded=frozenset(),
    classifications=None,
) -> VisualMap:
    """Select frames classified as a scene class with confidence distance below threshold_S.

    ``classifications`` may carry precomputed per-frame results (index aligned)
    to avoid reclassifying across samplers.
    """
    excluded = _check_excluded(traversal, excluded)
    if classifications is None:
        classifications = classifier.classify_traversal(traversal)
    entries = []
    for fr in traversal.frames:
        if fr.index in excluded:
            continue
        cls = classifications[fr.index]
        if cls.class_name != UNDEFINED_LABEL and cls.confidence_score < threshold_S:
            entries.append((fr.index, PROVENANCE_CONTEXT))
    return _ordered_map(traversal.name, entries)


def sample_dmc(
    traversal: Traversal,
    classifier: SceneClassifier,
    config: SamplerConfig,
    classifications=None,
) -> VisualMap:
    """Single forward pass applying the admission ladder documented in the module header."""
    _require_memorability(traversal)
    excluded = _check_excluded(traversal, config.excluded_indices)
    if classifications is None:
        classifications = classifier.classify_traversal(traversal)
    entries = []
    last_pos = None
    for fr in traversal.frames:
        if fr.index in excluded:
            continue
        cls = classifications[fr.index]
        mem = fr.memorability
        score = biased_confidence(cls.confidence_score, mem, config.b_mem)
        if cls.class_name == UNDEFINED_LABEL:
            continue
        if score < config.threshold_S:
            entries.append((fr.index, PROVENANCE_CONTEXT))
            last_pos = fr.position
            continue
        moved = float("inf") if last_pos is None else position_distance(fr.position, last_pos)
        if moved > config.dist_min_m and mem > config.threshold_mem:
            entries.append((fr.index, PROVENANCE_MEMORABILITY))
            last_pos = fr.position
        elif moved > config.dist_max_m:
            entries.append((fr.index, PROVENANCE_DIST_MAX))
            last_pos = fr.position
    return _ordered_map(traversal.name, entries)


def _nearest_retained_distance(idx, entries, positions, planar) -> float:
    """Distance from a selected frame to its nearest other selected frame.

    ``entries`` must be sorted by index. On 1-D routes positions are monotone
    in index, so only the two index-neighbors can be nearest.
    """
    slot = bisect.bisect_left(entries, (idx,))
    best = float("inf")
    if planar:
        for other_idx, _ in entries:
            if other_idx != idx:
                best = min(best, position_distance(positions[idx], positions[other_idx]))
        return best
    if slot > 0:
        best = min(best, position_distance(positions[idx], positions[entries[slot - 1][0]]))
    if slot + 1 < len(entries):
        best = min(best, position_distance(positions[idx], positions[entries[slot + 1][0]]))
    return best


def _trim_to_budget(entries, budget, positions, planar):
    entries = sorted(entries)
    while len(entries) > budget:
        tier = next(
            (t for t in _DROP_TIERS if any(p == t for _, p in entries)),
            None,
        )
        if tier is None:
            # Only context frames remain; drop oldest (lowest index) first.
            entries.pop(0)
            continue
        drop = min(
            (e for e in entries if e[1] == tier),
            key=lambda e: (
                _nearest_retained_distance(e[0], entries, positions, planar),
                e[0],
            ),
        )
        entries.remove(drop)
    return entries


def _nearest_candidate(candidates, lo, hi, positions, mid, planar):
    """Lowest-index candidate in (lo, hi) nearest to the gap midpoint, or None."""
    left = bisect.bisect_right(candidates, lo)
    right = bisect.bisect_left(candidates, hi)
    if left >= right:
        return None
    if planar:
        return min(
            candidates[left:right],
            key=lambda c: (position_distance(positions[c], mid), c),
        )
    # 1-D positions are monotone in index: bisect to the midpoint, then
    # compare the two neighbors (equal distance prefers the lower index).
    slice_positions = [positions[c] for c in candidates[left:right]]
    at = bisect.bisect_left(slice_positions, mid)
    best = None
    for k in (at - 1, at):
        if 0 <= k < len(slice_positions):
            c = candidates[left + k]
            key = (abs(slice_positions[k] - mid), c)
            if best is None or key < best[0]:
                best = (key, c)
    return best[1]


def _pad_to_budget(entries, budget, traversal, excluded):
    """Insert unselected frames at the midpoints of the largest position gaps.

    Gaps run between consecutive selected frames, with the route's first and
    last frame positions as virtual boundaries. Candidates must lie strictly
    inside a gap's index interval; ties go to the leftmost gap then the lower
    frame index. Inserting into a gap splits it in two; other gaps are
    untouched, so a max-heap over gaps stays consistent.
    """
    entries = list(entries)
    n = len(traversal)
    planar = traversal.is_planar
    positions = [fr.position for fr in traversal.frames]
    selected = {i for i, _ in entries}
    candidates = sorted(
        i for i in range(n) if i not in selected and i not in excluded
    )

    def gap_item(lo, lo_pos, hi, hi_pos):
        return (-position_distance(lo_pos, hi_pos), lo, hi, lo_pos, hi_pos)

    anchors = sorted(selected)
    bounds = (
        [(-1, positions[0])]
        + [(i, positions[i]) for i in anchors]
        + [(n, positions[-1])]
    )
    heap = [
        gap_item(lo, lo_pos, hi, hi_pos)
        for (lo, lo_pos), (hi, hi_pos) in zip(bounds, bounds[1:])
    ]
    heapq.heapify(heap)
    while len(entries) < budget and candidates:
        if not heap:
            # Only degenerate gaps remain; take lowest remaining indices.
            pick = candidates.pop(0)
            entries.append((pick, PROVENANCE_DISTANCE))
            continue
        _, lo, hi, lo_pos, hi_pos = heapq.heappop(heap)
        mid = position_midpoint(lo_pos, hi_pos)
        pick = _nearest_candidate(candidates, lo, hi, positions, mid, planar)
        if pick is None:
            continue
        entries.append((pick, PROVENANCE_DISTANCE))
        candidates.remove(pick)
        heapq.heappush(heap, gap_item(lo, lo_pos, pick, positions[pick]))
        heapq.heappush(heap, gap_item(pick, positions[pick], hi, hi_pos))
    return entries


def enforce_budget(vmap: VisualMap, traversal: Traversal, config: SamplerConfig) -> VisualMap:
    """Trim or pad a map to round(budget_fraction * frame count) frames.

    Trimming drops non-context frames closest to a retained neighbor first
    (fallback, then memorability, then distance provenance; ties to the lower
    index). Context frames are dropped only when they alone exceed the budget,
    oldest first, with a warning logged. Padding inserts unselected frames at
    the largest position-gap midpoints with provenance "distance".
    """
    excluded = _check_excluded(traversal, config.excluded_indices)
    overlap = set(vmap.selected) & excluded
    if overlap:
        raise ConfigError(f"map contains excluded indices: {sorted(overlap)}")
    budget = config.budget_count(traversal)
    entries = list(zip(vmap.selected, vmap.provenance))
    if len(entries) == budget:
        return vmap
    if len(entries) > budget:
        n_context = sum(1 for _, p in entries if p == PROVENANCE_CONTEXT)
        if budget < n_context:
            logger.warning(
                "budget %d is below the %d context frames in map %r; trimming "
                "context frames oldest first",
                budget,
                n_context,
                vmap.traversal,
            )
        positions = [fr.position for fr in traversal.frames]
        entries = _trim_to_budget(entries, budget, positions, traversal.is_planar)
    else:
        entries = _pad_to_budget(entries, budget, traversal, excluded)
    return _ordered_map(vmap.traversal, entries)


def empty_map(traversal: Traversal) -> VisualMap:
    return VisualMap(traversal.name, (), ())


def budgeted_distance_map(traversal: Traversal, config: SamplerConfig) -> VisualMap:
    """The budget-exact distance baseline: pad an empty map up to the budget."""
    return enforce_budget(empty_map(traversal), traversal, config)


def map_to_json_dict(vmap: VisualMap) -> dict:
    return {
        "traversal": vmap.traversal,
        "selected": [
            {"index": i, "provenance": p} for i, p in zip(vmap.selected, vmap.provenance)
        ],
    }


def map_from_json_dict(data: dict) -> VisualMap:
    rows = data["selected"]
    return VisualMap(
        data["traversal"],
        tuple(int(r["index"]) for r in rows),
        tuple(str(r["provenance"]) for r in rows),
    )
