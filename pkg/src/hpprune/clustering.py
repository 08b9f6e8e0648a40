"""Median-root clustering of conv filters under the pyramid distance.

Representatives are real filters: after each assignment pass every
cluster re-elects the member whose root mean is the median of the
cluster's root means (even cardinality takes the lower middle, ties go
to the lower label).  Iteration stops when the representative set
repeats, or after max_iter passes (flagged, not fatal).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .parallel import thread_map
from .pyramid import HybridPyramid, build_index
from .search import CandidateSet, find_closest


@dataclass(frozen=True)
class Cluster:
    representative: int
    members: tuple[int, ...]  # sorted labels, representative included


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple[Cluster, ...]
    iteration_count: int
    converged: bool

    def representatives(self) -> list[int]:
        return [c.representative for c in self.clusters]

    def to_dict(self) -> dict:
        return {
            "clusters": [
                {"representative": c.representative, "members": list(c.members)}
                for c in self.clusters
            ],
            "iterations": self.iteration_count,
            "converged": self.converged,
        }


def _check_cluster_count(n: int, c: int) -> None:
    if not 1 <= c <= n:
        raise ValueError(f"cluster count {c} outside 1..{n}")


def init_representatives(
    pyramids: Sequence[HybridPyramid],
    c: int,
    strategy: str = "even-spaced",
    random_state=None,
) -> list[int]:
    """Pick c starting representatives, returned as sorted labels.

    "even-spaced" takes the filters at sorted-root positions
    ceil((2t - 1) * n / (2c)), t = 1..c.  "seeded-random" samples c
    distinct filters and requires a random_state.
    """
    n = len(pyramids)
    _check_cluster_count(n, c)
    if strategy == "even-spaced":
        index = build_index(pyramids)
        positions = [-(-((2 * t - 1) * n) // (2 * c)) - 1 for t in range(1, c + 1)]
        return sorted(int(index.S[p]) for p in positions)
    if strategy == "seeded-random":
        if random_state is None:
            raise ValueError("seeded-random strategy requires a random_state")
        rng = np.random.default_rng(random_state)
        labels = np.array(sorted(p.filter_index for p in pyramids))
        return sorted(int(x) for x in rng.choice(labels, size=c, replace=False))
    raise ValueError(f"unknown strategy {strategy!r}")


def assign(pyramids: Sequence[HybridPyramid], representatives: Sequence[int]) -> ClusterSet:
    """One assignment pass: every filter joins its closest representative."""
    reps = sorted(set(int(r) for r in representatives))
    by_label = {p.filter_index: p for p in pyramids}
    if len(by_label) != len(pyramids):
        raise ValueError("pyramid labels must be unique")
    missing = [r for r in reps if r not in by_label]
    if missing:
        raise ValueError(f"representatives {missing} are not in the filter set")
    candidates = CandidateSet([by_label[r] for r in reps])
    members: dict[int, list[int]] = {r: [r] for r in reps}
    keys = [p for p in pyramids if p.filter_index not in members]
    homes = thread_map(lambda p: find_closest(p, candidates).best_index, keys)
    for p, home in zip(keys, homes):
        members[home].append(p.filter_index)
    clusters = tuple(Cluster(r, tuple(sorted(members[r]))) for r in reps)
    return ClusterSet(clusters=clusters, iteration_count=1, converged=False)


def _median_label(member_labels: Sequence[int], roots: dict[int, float]) -> int:
    ranked = sorted(member_labels, key=lambda lab: (roots[lab], lab))
    return ranked[(len(ranked) - 1) // 2]


def cluster(
    pyramids: Sequence[HybridPyramid],
    c: int,
    strategy: str = "even-spaced",
    random_state=None,
    max_iter: int = 100,
) -> ClusterSet:
    """Iterate assign + median re-election to a representative fixed point."""
    _check_cluster_count(len(pyramids), c)
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    roots = {p.filter_index: p.root for p in pyramids}
    reps = init_representatives(pyramids, c, strategy, random_state)
    result = None
    for iteration in range(1, max_iter + 1):
        passed = assign(pyramids, reps)
        new_clusters = tuple(
            Cluster(_median_label(cl.members, roots), cl.members) for cl in passed.clusters
        )
        new_reps = sorted(cl.representative for cl in new_clusters)
        converged = new_reps == reps
        result = ClusterSet(
            clusters=tuple(sorted(new_clusters, key=lambda cl: cl.representative)),
            iteration_count=iteration,
            converged=converged,
        )
        if converged:
            return result
        reps = new_reps
    return result
