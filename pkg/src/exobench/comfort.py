"""Perceived-pressure body maps, satisfaction questionnaires, direction polls.

The body map is a fixed 200 x 300 cell grid (row-major flat indices) with
four disjoint anatomical regions.  Participants mark cells at intensity
1 (light) .. 3 (painful); overlapping marks keep the maximum intensity per
cell.  A region's score is the intensity-weighted fraction of its area
that is marked, so it lives in [0, 3].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GRID_WIDTH = 200
GRID_HEIGHT = 300
N_CELLS = GRID_WIDTH * GRID_HEIGHT
MAX_INTENSITY = 3
INTENSITY_LABELS = {1: "light", 2: "uncomfortable", 3: "painful"}

# Region layout as half-open (x0, y0, x1, y1) rectangles on the front-facing
# silhouette; a region may own several rectangles (left + right side), but
# regions never overlap.
_REGION_RECTS: dict[str, tuple[tuple[int, int, int, int], ...]] = {
    "upper_arm": ((0, 60, 20, 200), (180, 60, 200, 200)),
    "armpit": ((20, 70, 50, 100), (150, 70, 180, 100)),
    "flank": ((30, 100, 50, 260), (150, 100, 170, 260)),
    "torso": ((50, 80, 150, 260),),
}

REGIONS = tuple(_REGION_RECTS)
TEMPLATE_VERSION = "torso-template-1"


class UnknownRegion(ValueError):
    pass


class EmptySet(ValueError):
    pass


def region_cells(region: str) -> np.ndarray:
    """Sorted flat cell indices belonging to a region."""
    try:
        rects = _REGION_RECTS[region]
    except KeyError:
        raise UnknownRegion(f"unknown region {region!r}") from None
    idx: list[np.ndarray] = []
    for x0, y0, x1, y1 in rects:
        ys, xs = np.mgrid[y0:y1, x0:x1]
        idx.append((ys * GRID_WIDTH + xs).ravel())
    return np.sort(np.concatenate(idx))


def template_asset() -> dict:
    """Versioned template: grid size and per-region cell lists, JSON-ready."""
    return {
        "version": TEMPLATE_VERSION,
        "width": GRID_WIDTH,
        "height": GRID_HEIGHT,
        "regions": {r: [int(c) for c in region_cells(r)] for r in REGIONS},
    }


def cell_xy(index: int) -> tuple[int, int]:
    if not 0 <= index < N_CELLS:
        raise ValueError(f"cell index {index} out of range")
    return index % GRID_WIDTH, index // GRID_WIDTH


@dataclass(frozen=True)
class Mark:
    """One stroke: the cells it covers and its intensity (1 light .. 3 painful)."""

    cells: tuple[int, ...]
    intensity: int

    def __post_init__(self):
        if not 1 <= self.intensity <= MAX_INTENSITY:
            raise ValueError(f"intensity {self.intensity} outside 1..{MAX_INTENSITY}")
        cells = tuple(int(c) for c in self.cells)
        for c in cells:
            if not 0 <= c < N_CELLS:
                raise ValueError(f"cell index {c} out of range")
        object.__setattr__(self, "cells", cells)


@dataclass(frozen=True)
class PressureMap:
    participant: str
    version: str
    marks: tuple[Mark, ...]

    @classmethod
    def from_json(cls, obj: dict) -> "PressureMap":
        marks = tuple(
            Mark(cells=tuple(m["cells"]), intensity=int(m["intensity"]))
            for m in obj.get("marks", [])
        )
        return cls(participant=str(obj["participant"]), version=str(obj["version"]),
                   marks=marks)

    def to_json(self) -> dict:
        return {
            "participant": self.participant,
            "version": self.version,
            "marks": [{"cells": list(m.cells), "intensity": m.intensity}
                      for m in self.marks],
        }


def load_pressure_map(path: str | Path) -> PressureMap:
    with open(path) as fh:
        return PressureMap.from_json(json.load(fh))


def intensity_grid(marks) -> np.ndarray:
    """Flat per-cell intensity, maximum across overlapping marks."""
    grid = np.zeros(N_CELLS, dtype=np.uint8)
    for mark in marks:
        cells = np.fromiter(mark.cells, dtype=np.int64)
        np.maximum.at(grid, cells, mark.intensity)
    return grid


def score_region(marks, region: str) -> float:
    """Intensity-weighted marked fraction of one region, in [0, 3].

    score = sum over levels of level * (cells at that level) / (region area);
    the area normalizer makes a fully painful region score exactly 3.
    """
    cells = region_cells(region)
    levels = intensity_grid(marks)[cells]
    total = len(cells)
    return float(sum(
        level * int(np.count_nonzero(levels == level)) / total
        for level in range(1, MAX_INTENSITY + 1)
    ))


def region_scores(pmap: PressureMap) -> dict[str, float]:
    return {region: score_region(pmap.marks, region) for region in REGIONS}


def aggregate_maps(maps) -> dict[str, float]:
    """Mean region score across participants (one map per participant)."""
    maps = list(maps)
    if not maps:
        raise EmptySet("no maps to aggregate")
    acc = {r: 0.0 for r in REGIONS}
    for pmap in maps:
        for r, s in region_scores(pmap).items():
            acc[r] += s
    return {r: acc[r] / len(maps) for r in REGIONS}


@dataclass(frozen=True, slots=True)
class RegionComparison:
    region: str
    mean_v1: float
    mean_v2: float
    rel_change_pct: float | None  # None when the v1 mean is zero
    abs_change: float


def compare_versions(maps_v1, maps_v2) -> list[RegionComparison]:
    """Group mean per region for each device version plus the relative change."""
    m1 = aggregate_maps(maps_v1)
    m2 = aggregate_maps(maps_v2)
    rows = []
    for region in REGIONS:
        a, b = m1[region], m2[region]
        rows.append(RegionComparison(
            region=region,
            mean_v1=a,
            mean_v2=b,
            rel_change_pct=None if a == 0 else 100.0 * (b - a) / a,
            abs_change=b - a,
        ))
    return rows


# Satisfaction questionnaire: the eight device items, each rated 0..5.
QUEST_ITEMS = (
    "size",
    "weight",
    "adjustability",
    "safety",
    "durability",
    "ease_of_use",
    "comfort",
    "effectiveness",
)
QUEST_SCALE = (0.0, 5.0)


class DuplicateResponse(ValueError):
    """Same participant answered the same device version twice."""


@dataclass(frozen=True)
class QuestForm:
    participant: str
    version: str
    scores: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.scores) - set(QUEST_ITEMS)
        if unknown:
            raise ValueError(f"unknown items: {sorted(unknown)}")
        lo, hi = QUEST_SCALE
        for item, v in self.scores.items():
            if not lo <= v <= hi:
                raise ValueError(f"{item} score {v} outside {lo}..{hi}")


@dataclass(frozen=True, slots=True)
class ItemDelta:
    """Change of one item between device versions.

    delta_pct is the relative change 100 * (v2 - v1) / v1; when the v1
    value is zero it cannot be formed, so the absolute change stands in
    and the item is flagged zero_baseline.
    """

    item: str
    v1: float
    v2: float
    delta_abs: float
    delta_pct: float | None
    zero_baseline: bool


def quest_item_deltas(scores_v1: dict, scores_v2: dict) -> list[ItemDelta]:
    """Per-item relative variation between two forms (or two sets of means)."""
    if set(scores_v1) != set(scores_v2):
        raise ValueError("forms cover different item sets")
    deltas = []
    for item in QUEST_ITEMS:
        if item not in scores_v1:
            continue
        v1 = float(scores_v1[item])
        v2 = float(scores_v2[item])
        zero = v1 == 0.0
        deltas.append(ItemDelta(
            item=item,
            v1=v1,
            v2=v2,
            delta_abs=v2 - v1,
            delta_pct=None if zero else 100.0 * (v2 - v1) / v1,
            zero_baseline=zero,
        ))
    return deltas


@dataclass(frozen=True, slots=True)
class GroupItemDelta:
    """Across-participant summary of one item's relative variation."""

    item: str
    mean_pct: float
    sem_pct: float
    n: int
    n_zero_baseline: int


def quest_group_deltas(forms_v1, forms_v2) -> list[GroupItemDelta]:
    """Pair forms by participant, then mean +/- SEM of per-participant
    relative deltas per item; zero-baseline participants are excluded from
    that item's percentage and counted."""
    by_p1 = {f.participant: f for f in forms_v1}
    by_p2 = {f.participant: f for f in forms_v2}
    shared = sorted(set(by_p1) & set(by_p2))
    if not shared:
        raise EmptySet("no participant answered both versions")
    out = []
    items = [i for i in QUEST_ITEMS if i in next(iter(by_p1.values())).scores]
    for item in items:
        pcts = []
        zeros = 0
        for p in shared:
            d = quest_item_deltas(by_p1[p].scores, by_p2[p].scores)
            entry = next(e for e in d if e.item == item)
            if entry.zero_baseline:
                zeros += 1
            else:
                pcts.append(entry.delta_pct)
        if pcts:
            mean = float(np.mean(pcts))
            sem = float(np.std(pcts, ddof=1) / np.sqrt(len(pcts))) if len(pcts) > 1 else 0.0
        else:
            mean = float("nan")
            sem = float("nan")
        out.append(GroupItemDelta(item=item, mean_pct=mean, sem_pct=sem,
                                  n=len(pcts), n_zero_baseline=zeros))
    return out


# Perceived-assistance direction poll.
DIRECTIONS = ("front", "side", "oblique")


@dataclass(frozen=True, slots=True)
class DirectionResponse:
    participant: str
    version: str
    direction: str

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, "
                             f"got {self.direction!r}")


def direction_tally(responses) -> dict[str, dict[str, int]]:
    """Histogram of perceived directions per device version.

    One response per participant per version; a second response from the
    same participant for the same version raises DuplicateResponse.
    """
    seen: set[tuple[str, str]] = set()
    tally: dict[str, dict[str, int]] = {}
    for r in responses:
        key = (r.participant, r.version)
        if key in seen:
            raise DuplicateResponse(f"participant {r.participant!r} already "
                                    f"answered for version {r.version!r}")
        seen.add(key)
        per_version = tally.setdefault(r.version, {d: 0 for d in DIRECTIONS})
        per_version[r.direction] += 1
    return tally
