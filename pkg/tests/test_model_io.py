import json

import numpy as np
import pytest

from hpprune import (
    FcSpec,
    FilterTensor,
    LayerResult,
    LayerSpec,
    ManifestError,
    ModelManifest,
    PruneReport,
    ReportError,
    WeightBlobError,
    alexnet_manifest,
    load_model,
    read_manifest,
    read_report,
    report_from_dict,
    report_to_dict,
    save_model,
    vgg16_manifest,
    write_report,
)
from hpprune.model_io import manifest_from_dict, manifest_to_dict, validate_manifest

from conftest import make_model


def test_round_trip_preserves_weights_to_float32(tmp_path):
    manifest, tensors = make_model([(3, 3, 6), (3, 6, 8)], seed=3)
    save_model(manifest, tensors, tmp_path)
    loaded_manifest, loaded = load_model(tmp_path)
    assert loaded_manifest == manifest
    for lid in (1, 2):
        assert [t.filter_index for t in loaded[lid]] == list(range(1, len(tensors[lid]) + 1))
        for orig, back in zip(tensors[lid], loaded[lid]):
            np.testing.assert_array_equal(
                back.weights, np.asarray(orig.weights, dtype=np.float32).astype(np.float64)
            )


def test_blob_layout_is_little_endian_filter_major(tmp_path):
    manifest, tensors = make_model([(2, 1, 2)], seed=1)
    save_model(manifest, tensors, tmp_path)
    raw = np.frombuffer((tmp_path / "layer_1.bin").read_bytes(), dtype="<f4")
    expected = np.concatenate(
        [np.asarray(t.weights, dtype=np.float32).ravel() for t in tensors[1]]
    )
    np.testing.assert_array_equal(raw, expected)


def test_manifest_json_round_trip():
    manifest = vgg16_manifest()
    again = manifest_from_dict(json.loads(json.dumps(manifest_to_dict(manifest))))
    assert again == manifest


def test_missing_manifest_raises(tmp_path):
    with pytest.raises(ManifestError):
        read_manifest(tmp_path)


def test_truncated_blob_raises_with_expected_size(tmp_path):
    manifest, tensors = make_model([(3, 3, 4)], seed=2)
    save_model(manifest, tensors, tmp_path)
    blob = tmp_path / "layer_1.bin"
    blob.write_bytes(blob.read_bytes()[:-4])
    with pytest.raises(WeightBlobError) as excinfo:
        load_model(tmp_path)
    assert str(4 * 9 * 3 * 4) in str(excinfo.value)


def test_missing_blob_raises(tmp_path):
    manifest, tensors = make_model([(3, 3, 4)], seed=2)
    save_model(manifest, tensors, tmp_path)
    (tmp_path / "layer_1.bin").unlink()
    with pytest.raises(WeightBlobError):
        load_model(tmp_path)


def test_manifest_validation_rejects_broken_channel_chain():
    layers = (
        LayerSpec(1, 3, 3, 8, 4, 4),
        LayerSpec(2, 3, 9, 4, 2, 2),  # should be in_channels=8
    )
    with pytest.raises(ManifestError):
        validate_manifest(ModelManifest("bad", layers, (FcSpec(16, 10),)))


def test_manifest_validation_rejects_unsorted_ids():
    layers = (LayerSpec(2, 3, 3, 8, 4, 4), LayerSpec(1, 3, 8, 4, 2, 2))
    with pytest.raises(ManifestError):
        validate_manifest(ModelManifest("bad", layers, (FcSpec(16, 10),)))


def test_manifest_validation_rejects_fc_mismatch():
    layers = (LayerSpec(1, 3, 3, 8, 4, 4),)
    with pytest.raises(ManifestError):
        # first fc in_dim not a multiple of the last conv width
        validate_manifest(ModelManifest("bad", layers, (FcSpec(30, 10),)))


def test_save_model_accepts_stacked_array(tmp_path):
    manifest, tensors = make_model([(3, 3, 4)], seed=5)
    stacked = np.stack([t.weights for t in tensors[1]])
    save_model(manifest, {1: stacked}, tmp_path)
    _, loaded = load_model(tmp_path)
    for i, t in enumerate(loaded[1]):
        assert t.filter_index == i + 1
        np.testing.assert_allclose(t.weights, stacked[i], atol=1e-6)


def test_report_round_trip(tmp_path):
    report = PruneReport(
        baseline_accuracy=0.92,
        accuracy=0.9175,
        layers={
            1: LayerResult(retention=0.5, retained=(1, 3, 5, 7, 9, 11)),
            2: LayerResult(retention=0.25, retained=(2, 4, 8, 16)),
        },
    )
    path = tmp_path / "report.json"
    write_report(report, path)
    again = read_report(path)
    assert again == report
    # stable serialization: sorted keys, two-space indent, trailing newline
    text = path.read_text()
    assert text.endswith("\n")
    assert json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n" == text


def test_report_validation_against_manifest():
    manifest, _ = make_model([(3, 3, 4)], seed=0)
    data = report_to_dict(
        PruneReport(0.9, 0.9, {1: LayerResult(retention=0.5, retained=(1, 9))})
    )
    with pytest.raises(ReportError):
        report_from_dict(data, manifest)  # filter 9 out of range for 4 filters


def test_report_rejects_duplicate_and_unsorted_indices():
    with pytest.raises(ReportError):
        report_from_dict(
            {
                "baseline_accuracy": 0.9,
                "accuracy": 0.9,
                "layers": {"1": {"retention": 0.5, "retained": [2, 2]}},
            }
        )
    with pytest.raises(ReportError):
        report_from_dict(
            {
                "baseline_accuracy": 0.9,
                "accuracy": 0.9,
                "layers": {"1": {"retention": 1.5, "retained": [1]}},
            }
        )


def test_reference_manifests_are_valid():
    vgg = vgg16_manifest()
    assert [spec.num_filters for spec in vgg.layers] == [
        64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512,
    ]
    assert vgg.layers[0].in_channels == 3
    assert vgg.fc[0].in_dim == 512

    alex = alexnet_manifest()
    assert [spec.num_filters for spec in alex.layers] == [96, 256, 384, 384, 256]
    assert [spec.kernel_side for spec in alex.layers] == [11, 5, 3, 3, 3]


def test_filter_indices_are_one_based_in_files(tmp_path):
    manifest, tensors = make_model([(3, 3, 4)], seed=4)
    save_model(manifest, tensors, tmp_path)
    _, loaded = load_model(tmp_path)
    assert [t.filter_index for t in loaded[1]] == [1, 2, 3, 4]
