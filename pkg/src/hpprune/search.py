"""Exact nearest-filter search over a pyramid candidate set.

For any level whose cells each aggregate f base elements,
f * d2(level) <= d2(base) for every filter pair (block means contract
squared distances by at most the block size).  The search seeds a best
squared distance from the candidate with the nearest root mean, then
scans outward in root order: a candidate is dropped as soon as one of
its level bounds already reaches the current best, and a whole scan
direction stops once the root bound alone rejects while moving away
from the key root.  The result is always the exact argmin of the base
squared distance, ties going to the smaller label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pyramid import HybridPyramid, PyramidIndex, build_index, level_factor


def level_distance_sq(a: HybridPyramid, b: HybridPyramid, level: int) -> float:
    """Squared distance between the cell vectors of one level."""
    if a.shape != b.shape:
        raise ValueError(f"pyramid shapes differ: {a.shape} vs {b.shape}")
    va = a.level_values(level)
    vb = b.level_values(level)
    diff = va - vb
    return float(diff @ diff)


def base_distance_sq(a: HybridPyramid, b: HybridPyramid) -> float:
    """Squared distance between absolute weights (the base level)."""
    if a.shape != b.shape:
        raise ValueError(f"pyramid shapes differ: {a.shape} vs {b.shape}")
    diff = a.base.ravel() - b.base.ravel()
    return float(diff @ diff)


def search_window(root_key: float, d_min: float, root_factor: float) -> tuple[float, float]:
    """Root-mean interval that can still contain a filter closer than d_min."""
    if d_min < 0:
        raise ValueError(f"d_min must be >= 0, got {d_min}")
    if root_factor <= 0:
        raise ValueError(f"root_factor must be > 0, got {root_factor}")
    half = d_min / math.sqrt(root_factor)
    return (root_key - half, root_key + half)


@dataclass
class SearchStats:
    candidates_examined: int = 0
    window_rejections: int = 0
    level_rejections: int = 0
    base_evaluations: int = 0


@dataclass(frozen=True)
class Rejection:
    label: int
    level: int
    bound: float
    best_sq_at_time: float


@dataclass(frozen=True)
class SearchResult:
    best_index: int
    distance_sq: float
    stats: SearchStats
    rejections: tuple[Rejection, ...] = field(default=(), repr=False)


class CandidateSet:
    """Pyramids plus their root index, ready for repeated queries."""

    def __init__(self, pyramids: Sequence[HybridPyramid]):
        ordered = sorted(pyramids, key=lambda p: p.filter_index)
        if not ordered:
            raise ValueError("candidate set is empty")
        shape = ordered[0].shape
        for p in ordered:
            if p.shape != shape:
                raise ValueError(f"mixed pyramid shapes: {shape} vs {p.shape}")
        self.pyramids = ordered
        self.shape = shape
        self.index: PyramidIndex = build_index(ordered)
        by_label = {p.filter_index: p for p in ordered}
        self._by_position = [by_label[int(lab)] for lab in self.index.S]

    def __len__(self) -> int:
        return len(self.pyramids)

    def at_position(self, pos: int) -> HybridPyramid:
        return self._by_position[pos]


def _nearest_root_position(roots: np.ndarray, key_root: float) -> int:
    # ties pick the lower sorted position
    i = int(np.searchsorted(roots, key_root))
    if i == 0:
        return 0
    if i == len(roots):
        return len(roots) - 1
    if key_root - roots[i - 1] <= roots[i] - key_root:
        return i - 1
    return i


def find_closest(
    key: HybridPyramid,
    candidates: CandidateSet,
    *,
    use_level_bounds: bool = True,
    record_rejections: bool = False,
) -> SearchResult:
    """Exact nearest candidate to ``key`` under the base squared distance.

    The caller is responsible for excluding the key itself from the
    candidate set.  With ``use_level_bounds=False`` only the root window
    is used, which never evaluates fewer bases than the full descent.
    """
    if key.shape != candidates.shape:
        raise ValueError(f"key shape {key.shape} != candidate shape {candidates.shape}")
    s, m, k = key.shape
    roots = candidates.index.roots_sorted
    n = len(candidates)
    stats = SearchStats()
    rejections: list[Rejection] = []

    pos0 = _nearest_root_position(roots, key.root)
    seed = candidates.at_position(pos0)
    best_sq = base_distance_sq(key, seed)
    best_label = seed.filter_index
    stats.candidates_examined += 1
    stats.base_evaluations += 1

    root_f = float(level_factor(s, m, k, 0))
    levels_to_check = range(1, key.num_levels - 1) if use_level_bounds else range(0)

    def consider(pos: int) -> bool:
        """Examine one candidate; return False if its side can stop."""
        nonlocal best_sq, best_label
        cand = candidates.at_position(pos)
        label = cand.filter_index
        stats.candidates_examined += 1
        droot = float(roots[pos]) - key.root
        bound = root_f * droot * droot
        if bound > best_sq or (bound == best_sq and label > best_label):
            stats.window_rejections += 1
            if record_rejections:
                rejections.append(Rejection(label, 0, bound, best_sq))
            # moving away from the key root, every further root is worse
            moving_away = (pos < pos0 and roots[pos] < key.root) or (
                pos > pos0 and roots[pos] > key.root
            )
            return not (moving_away and bound > best_sq)
        for level in levels_to_check:
            bound = level_factor(s, m, k, level) * level_distance_sq(key, cand, level)
            if bound > best_sq or (bound == best_sq and label > best_label):
                stats.level_rejections += 1
                if record_rejections:
                    rejections.append(Rejection(label, level, bound, best_sq))
                return True
        d2 = base_distance_sq(key, cand)
        stats.base_evaluations += 1
        if d2 < best_sq or (d2 == best_sq and label < best_label):
            best_sq = d2
            best_label = label
        return True

    left = pos0 - 1
    right = pos0 + 1
    left_alive = left >= 0
    right_alive = right < n
    take_left = True
    while left_alive or right_alive:
        if take_left and left_alive or not right_alive:
            if not consider(left):
                left_alive = False
            else:
                left -= 1
                left_alive = left >= 0
        else:
            if not consider(right):
                right_alive = False
            else:
                right += 1
                right_alive = right < n
        take_left = not take_left

    return SearchResult(
        best_index=best_label,
        distance_sq=best_sq,
        stats=stats,
        rejections=tuple(rejections),
    )
