"""Per-filter mean pyramids and the sorted root-mean index.

A filter with C = s * 4**m channels (s not divisible by 4, m maximal)
splits into s sub-pyramids.  Sub-pyramid g tiles its 4**m kernels
row-major on a 2**m x 2**m grid, giving a base matrix of side 2**m * k
over the absolute weights.  One k x k mean step collapses each kernel to
a cell, then m successive 2 x 2 mean steps shrink the matrix to a single
sub-root.  The common root is the mean of the sub-roots, i.e. of all
k*k*C absolute weights.

Levels are addressed shallowest-first by a global index: level 0 is the
common root when s > 1 (for s == 1 the lone sub-root is the root), the
last level is the base.  ``level_factor`` returns the number of base
elements aggregated per cell at a level; multiplying a squared level
distance by that factor lower-bounds the squared base distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model_io import FilterTensor, LayerSpec
from .parallel import thread_map
from .validation import as_filter_matrix, infer_channels


def decompose_channels(channels: int) -> tuple[int, int]:
    """Split a channel count as channels = s * 4**m with m maximal."""
    if channels < 1:
        raise ValueError(f"channel count must be >= 1, got {channels}")
    s, m = channels, 0
    while s % 4 == 0:
        s //= 4
        m += 1
    return s, m


def n_levels(s: int, m: int) -> int:
    """Number of levels: sub-root..base per sub-pyramid, plus a common root when s > 1."""
    return m + 3 if s > 1 else m + 2


def level_factor(s: int, m: int, k: int, level: int) -> int:
    """Base elements aggregated per cell at a global level index."""
    total = n_levels(s, m)
    if not 0 <= level < total:
        raise ValueError(f"level {level} out of range for shape (s={s}, m={m}): 0..{total - 1}")
    if s > 1:
        if level == 0:
            return s * 4**m * k * k
        sub = level - 1
    else:
        sub = level
    if sub == m + 1:
        return 1
    return 4 ** (m - sub) * k * k


@dataclass(frozen=True)
class HybridPyramid:
    """Mean pyramid over one filter's absolute weights."""

    filter_index: int
    s: int
    m: int
    k: int
    root: float
    # sub_levels[j] has shape (s, side, side): j = 0 is the sub-roots,
    # j = m has side 2**m, j = m + 1 is the base with side 2**m * k.
    sub_levels: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.s, self.m, self.k)

    @property
    def num_levels(self) -> int:
        return n_levels(self.s, self.m)

    @property
    def base(self) -> np.ndarray:
        return self.sub_levels[-1]

    def level_values(self, level: int) -> np.ndarray:
        """Flattened cell values at a global level index, shallowest first."""
        if not 0 <= level < self.num_levels:
            raise ValueError(f"level {level} out of range 0..{self.num_levels - 1}")
        if self.s > 1:
            if level == 0:
                return np.array([self.root])
            return self.sub_levels[level - 1].ravel()
        return self.sub_levels[level].ravel()

    def cell_count(self) -> int:
        """Total stored cells; one block mean was computed per non-base cell."""
        total = sum(lv.size for lv in self.sub_levels)
        return total + (1 if self.s > 1 else 0)

    def to_dict(self) -> dict:
        """JSON-friendly dump, shallowest level first."""
        levels = []
        for j, lv in enumerate(self.sub_levels):
            levels.append(
                {
                    "side": int(lv.shape[1]),
                    "sub_pyramids": [cell.ravel().tolist() for cell in lv],
                }
            )
        return {
            "filter_index": self.filter_index,
            "s": self.s,
            "m": self.m,
            "k": self.k,
            "root": self.root,
            "levels": levels,
        }


def _pyramid_from_abs(abs_weights: np.ndarray, filter_index: int) -> HybridPyramid:
    channels, k, _ = abs_weights.shape
    s, m = decompose_channels(channels)
    grid = 2**m
    base = (
        abs_weights.reshape(s, grid, grid, k, k)
        .transpose(0, 1, 3, 2, 4)
        .reshape(s, grid * k, grid * k)
    )
    levels = [base]
    cur = base.reshape(s, grid, k, grid, k).mean(axis=(2, 4))
    levels.append(cur)
    for _ in range(m):
        half = cur.shape[1] // 2
        cur = cur.reshape(s, half, 2, half, 2).mean(axis=(2, 4))
        levels.append(cur)
    root = float(cur.mean())
    return HybridPyramid(
        filter_index=filter_index,
        s=s,
        m=m,
        k=k,
        root=root,
        sub_levels=tuple(reversed(levels)),
    )


def build_pyramid(filt: FilterTensor, layer: LayerSpec) -> HybridPyramid:
    """Build the pyramid for one filter of the given layer."""
    weights = np.asarray(filt.weights, dtype=np.float64)
    expected = (layer.in_channels, layer.kernel_side, layer.kernel_side)
    if weights.shape != expected:
        raise ValueError(f"filter {filt.filter_index}: weights shape {weights.shape} != {expected}")
    if not np.all(np.isfinite(weights)):
        raise ValueError(f"filter {filt.filter_index}: weights contain non-finite values")
    return _pyramid_from_abs(np.abs(weights), filt.filter_index)


def build_layer_pyramids(tensors: Sequence[FilterTensor], layer: LayerSpec) -> list[HybridPyramid]:
    """Build every filter's pyramid for a layer."""
    return thread_map(lambda t: build_pyramid(t, layer), tensors)


def build_pyramids_from_matrix(X, kernel_side: int) -> list[HybridPyramid]:
    """Build pyramids from a (n_filters, channels * k * k) matrix; labels are row positions."""
    X = as_filter_matrix(X, kernel_side)
    channels = infer_channels(X.shape[1], kernel_side)

    def one(i):
        row = np.abs(X[i]).reshape(channels, kernel_side, kernel_side)
        return _pyramid_from_abs(row, i)

    return thread_map(one, range(X.shape[0]))


@dataclass(frozen=True)
class PyramidIndex:
    """Filters ordered by root mean.

    S[i] is the label of the filter with the i-th smallest root (ties by
    label ascending); O inverts it, mapping label to sorted position.
    """

    S: np.ndarray
    roots_sorted: np.ndarray
    O: dict[int, int] = field(repr=False)

    def position(self, label: int) -> int:
        return self.O[label]

    def __len__(self) -> int:
        return len(self.S)


def build_index(pyramids: Sequence[HybridPyramid]) -> PyramidIndex:
    """Sort pyramids by root mean, ties broken by label ascending."""
    if not pyramids:
        raise ValueError("cannot index an empty pyramid set")
    labels = np.array([p.filter_index for p in pyramids])
    if len(set(labels.tolist())) != len(labels):
        raise ValueError("pyramid labels must be unique")
    roots = np.array([p.root for p in pyramids])
    order = np.lexsort((labels, roots))
    S = labels[order]
    return PyramidIndex(
        S=S,
        roots_sorted=roots[order],
        O={int(lab): pos for pos, lab in enumerate(S)},
    )
