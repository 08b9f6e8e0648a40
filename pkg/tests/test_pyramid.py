import json

import numpy as np
import pytest

from hpprune import (
    FilterTensor,
    build_index,
    build_layer_pyramids,
    build_pyramid,
    build_pyramids_from_matrix,
    decompose_channels,
    level_factor,
    n_levels,
)

from conftest import make_layer, make_tensors
from oracles import direct_mean


def test_decompose_anchor_values():
    assert decompose_channels(512) == (2, 4)
    assert decompose_channels(256) == (1, 4)
    assert decompose_channels(128) == (2, 3)
    assert decompose_channels(96) == (6, 2)
    assert decompose_channels(64) == (1, 3)
    assert decompose_channels(3) == (3, 0)
    assert decompose_channels(1) == (1, 0)


def test_decompose_property_exhaustive():
    for channels in range(1, 2049):
        s, m = decompose_channels(channels)
        assert s * 4**m == channels
        assert s % 4 != 0
        assert m >= 0


def test_level_count_anchors():
    assert n_levels(*decompose_channels(512)) == 7
    assert n_levels(*decompose_channels(256)) == 6
    assert n_levels(*decompose_channels(128)) == 6
    assert n_levels(*decompose_channels(64)) == 5
    assert n_levels(*decompose_channels(96)) == 5
    assert n_levels(*decompose_channels(384)) == 6
    assert n_levels(*decompose_channels(3)) == 3
    assert n_levels(*decompose_channels(1)) == 2


def test_level_factor_anchors():
    # deepest conv of the 512-wide stack: common root covers 2*4^4 kernels
    assert level_factor(2, 4, 3, 0) == 2 * 256 * 9
    # 11x11 kernels over 3 channels: root covers 3*121 weights
    assert level_factor(3, 0, 11, 0) == 363
    # base cells always stand for themselves
    assert level_factor(2, 4, 3, n_levels(2, 4) - 1) == 1
    assert level_factor(1, 0, 3, 1) == 1
    # single sub-pyramid: level 0 is the sub-root
    assert level_factor(1, 4, 3, 0) == 256 * 9


def test_level_factor_counts_elements_per_cell():
    rng = np.random.default_rng(11)
    for channels in (1, 2, 3, 8, 12, 48):
        s, m = decompose_channels(channels)
        k = 3
        layer = make_layer(1, k, channels, 1)
        filt = FilterTensor(1, rng.normal(size=(channels, k, k)))
        p = build_pyramid(filt, layer)
        total = channels * k * k
        for level in range(p.num_levels):
            cells = p.level_values(level)
            factor = level_factor(s, m, k, level)
            # cells at one level tile the filter: count * factor = total weights
            assert cells.size * factor == total


def test_root_is_mean_of_absolute_weights():
    rng = np.random.default_rng(5)
    for channels in (1, 2, 3, 5, 8, 16, 48, 96):
        layer = make_layer(1, 3, channels, 1)
        filt = FilterTensor(1, rng.normal(size=(channels, 3, 3)))
        p = build_pyramid(filt, layer)
        assert p.root == pytest.approx(direct_mean(np.abs(filt.weights)), abs=1e-12)


def test_base_tiles_kernels_row_major():
    rng = np.random.default_rng(9)
    channels, k = 8, 3  # s=2, m=1: 2x2 grid per sub-pyramid
    layer = make_layer(1, k, channels, 1)
    filt = FilterTensor(1, rng.normal(size=(channels, k, k)))
    p = build_pyramid(filt, layer)
    base = p.base
    assert base.shape == (2, 2 * k, 2 * k)
    for c in range(channels):
        g, t = divmod(c, 4)
        row, col = divmod(t, 2)
        block = base[g, row * k : (row + 1) * k, col * k : (col + 1) * k]
        np.testing.assert_allclose(block, np.abs(filt.weights[c]), atol=0)


def test_every_cell_is_the_mean_of_its_base_block():
    rng = np.random.default_rng(21)
    for channels, k in ((48, 3), (12, 2), (5, 3), (96, 5)):
        s, m = decompose_channels(channels)
        layer = make_layer(1, k, channels, 1)
        filt = FilterTensor(1, rng.normal(size=(channels, k, k)))
        p = build_pyramid(filt, layer)
        base = p.base
        side = 2**m * k
        # sub level j has side 2**j; each cell covers a (side/2**j) square of base
        for j in range(m + 1):
            lv = p.sub_levels[j]
            cell = side // 2**j
            for g in range(s):
                for i in range(2**j):
                    for jj in range(2**j):
                        block = base[g, i * cell : (i + 1) * cell, jj * cell : (jj + 1) * cell]
                        assert lv[g, i, jj] == pytest.approx(direct_mean(block), abs=1e-12)
        # sub-root mean equals the common root
        subroots = p.sub_levels[0].reshape(s)
        assert p.root == pytest.approx(float(np.mean(subroots)), abs=1e-12)


def test_level_values_shallowest_first():
    rng = np.random.default_rng(3)
    layer = make_layer(1, 3, 8, 1)
    p = build_pyramid(FilterTensor(1, rng.normal(size=(8, 3, 3))), layer)
    assert p.num_levels == 4  # root, sub-roots, 2x2 grids, base
    assert p.level_values(0).tolist() == [p.root]
    assert p.level_values(1).size == 2
    assert p.level_values(2).size == 8
    assert p.level_values(3).size == 2 * 36
    with pytest.raises(ValueError):
        p.level_values(4)


def test_build_rejects_bad_shape_and_nonfinite():
    layer = make_layer(1, 3, 8, 1)
    with pytest.raises(ValueError):
        build_pyramid(FilterTensor(1, np.zeros((7, 3, 3))), layer)
    bad = np.zeros((8, 3, 3))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        build_pyramid(FilterTensor(1, bad), layer)


def test_index_orders_by_root_with_label_tiebreak():
    layer = make_layer(1, 1, 1, 3)
    tensors = [
        FilterTensor(1, np.full((1, 1, 1), 0.3)),
        FilterTensor(2, np.full((1, 1, 1), 0.9)),
        FilterTensor(3, np.full((1, 1, 1), 0.1)),
    ]
    index = build_index(build_layer_pyramids(tensors, layer))
    assert index.S.tolist() == [3, 1, 2]
    assert index.position(3) == 0
    assert index.position(1) == 1
    assert index.position(2) == 2

    tied = [
        FilterTensor(5, np.full((1, 1, 1), 0.5)),
        FilterTensor(2, np.full((1, 1, 1), 0.5)),
        FilterTensor(9, np.full((1, 1, 1), 0.1)),
    ]
    index = build_index(build_layer_pyramids(tied, layer))
    assert index.S.tolist() == [9, 2, 5]


def test_index_roots_sorted_random():
    rng = np.random.default_rng(17)
    layer = make_layer(1, 3, 12, 20)
    pyramids = build_layer_pyramids(make_tensors(layer, rng), layer)
    index = build_index(pyramids)
    roots = {p.filter_index: p.root for p in pyramids}
    ordered = [roots[label] for label in index.S]
    assert ordered == sorted(ordered)
    assert sorted(index.S.tolist()) == sorted(roots)


def test_matrix_rows_label_zero_based():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(5, 4 * 9))
    pyramids = build_pyramids_from_matrix(X, 3)
    assert [p.filter_index for p in pyramids] == [0, 1, 2, 3, 4]
    for i, p in enumerate(pyramids):
        assert p.root == pytest.approx(np.abs(X[i]).mean(), abs=1e-12)


def test_to_dict_is_json_serializable():
    rng = np.random.default_rng(1)
    layer = make_layer(1, 3, 8, 1)
    p = build_pyramid(FilterTensor(1, rng.normal(size=(8, 3, 3))), layer)
    payload = json.loads(json.dumps(p.to_dict()))
    assert payload["filter_index"] == 1
    assert payload["s"] == 2 and payload["m"] == 1
    assert payload["root"] == pytest.approx(p.root)
    assert [lv["side"] for lv in payload["levels"]] == [1, 2, 6]
