"""Model container and pruning report IO.

A model lives in a directory: ``model.json`` (the manifest) plus one raw
weight blob per conv layer named ``layer_<id>.bin``.  Blobs are
little-endian float32, laid out filter-major, then channel-major, then
row-major inside each kernel.  Filter indices are 1-based in files,
reports, and CLI output; in-memory code keeps whatever labels it is given.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ManifestError, ReportError, WeightBlobError

MANIFEST_NAME = "model.json"

_BLOB_DTYPE = np.dtype("<f4")


@dataclass(frozen=True)
class LayerSpec:
    """One conv layer: k x k kernels over in_channels, num_filters outputs.

    out_h, out_w are the layer's output feature-map dims with any earlier
    pooling already reflected; they drive the FLOP accounting.
    """

    layer_id: int
    kernel_side: int
    in_channels: int
    num_filters: int
    out_h: int
    out_w: int


@dataclass(frozen=True)
class FcSpec:
    in_dim: int
    out_dim: int


@dataclass(frozen=True)
class ModelManifest:
    name: str
    layers: tuple[LayerSpec, ...]
    fc: tuple[FcSpec, ...]

    def layer(self, layer_id: int) -> LayerSpec:
        for spec in self.layers:
            if spec.layer_id == layer_id:
                return spec
        raise ManifestError(f"no conv layer with id {layer_id}")

    def layer_ids(self) -> list[int]:
        return [spec.layer_id for spec in self.layers]


@dataclass(frozen=True)
class FilterTensor:
    """One conv filter; weights has shape (in_channels, k, k), raw sign kept."""

    filter_index: int  # 1-based, matches file order
    weights: np.ndarray


@dataclass(frozen=True)
class LayerResult:
    retention: float
    retained: tuple[int, ...]  # sorted, 1-based


@dataclass(frozen=True)
class PruneReport:
    baseline_accuracy: float
    accuracy: float
    layers: dict[int, LayerResult]


def validate_manifest(manifest: ModelManifest) -> ModelManifest:
    """Check the structural invariants; raise ManifestError on violation."""
    if not manifest.layers:
        raise ManifestError("manifest has no conv layers")
    prev = None
    for spec in manifest.layers:
        for field in ("layer_id", "kernel_side", "in_channels", "num_filters", "out_h", "out_w"):
            value = getattr(spec, field)
            if not isinstance(value, int) or value < 1:
                raise ManifestError(f"layer {spec.layer_id}: {field} must be a positive integer")
        if prev is not None:
            if spec.layer_id <= prev.layer_id:
                raise ManifestError(
                    f"layer ids must be strictly increasing, got {prev.layer_id} then {spec.layer_id}"
                )
            if spec.in_channels != prev.num_filters:
                raise ManifestError(
                    f"layer {spec.layer_id} expects {spec.in_channels} input channels "
                    f"but layer {prev.layer_id} emits {prev.num_filters}"
                )
        prev = spec
    prev_out = None
    for i, fc in enumerate(manifest.fc):
        if fc.in_dim < 1 or fc.out_dim < 1:
            raise ManifestError(f"fc {i + 1}: dims must be positive")
        if i == 0:
            last = manifest.layers[-1]
            if fc.in_dim % last.num_filters != 0:
                raise ManifestError(
                    f"first fc in_dim {fc.in_dim} is not a multiple of the last "
                    f"conv width {last.num_filters}"
                )
        elif fc.in_dim != prev_out:
            raise ManifestError(
                f"fc {i + 1} expects {fc.in_dim} inputs but fc {i} emits {prev_out}"
            )
        prev_out = fc.out_dim
    return manifest


def manifest_to_dict(manifest: ModelManifest) -> dict:
    return {
        "name": manifest.name,
        "layers": [
            {
                "id": s.layer_id,
                "k": s.kernel_side,
                "in_channels": s.in_channels,
                "num_filters": s.num_filters,
                "out_h": s.out_h,
                "out_w": s.out_w,
            }
            for s in manifest.layers
        ],
        "fc": [{"in_dim": f.in_dim, "out_dim": f.out_dim} for f in manifest.fc],
    }


def manifest_from_dict(data: dict) -> ModelManifest:
    try:
        layers = tuple(
            LayerSpec(
                layer_id=entry["id"],
                kernel_side=entry["k"],
                in_channels=entry["in_channels"],
                num_filters=entry["num_filters"],
                out_h=entry["out_h"],
                out_w=entry["out_w"],
            )
            for entry in data["layers"]
        )
        fc = tuple(FcSpec(in_dim=entry["in_dim"], out_dim=entry["out_dim"]) for entry in data.get("fc", []))
        manifest = ModelManifest(name=data["name"], layers=layers, fc=fc)
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"manifest missing or mistyped field: {exc}") from exc
    return validate_manifest(manifest)


def read_manifest(model_dir: str | Path) -> ModelManifest:
    """Load and validate model.json without touching the weight blobs."""
    path = Path(model_dir) / MANIFEST_NAME
    if not path.is_file():
        raise ManifestError(f"no {MANIFEST_NAME} in {model_dir}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path} is not valid JSON: {exc}") from exc
    return manifest_from_dict(data)


def _blob_path(model_dir: Path, layer_id: int) -> Path:
    return model_dir / f"layer_{layer_id}.bin"


def load_model(model_dir: str | Path) -> tuple[ModelManifest, dict[int, list[FilterTensor]]]:
    """Load manifest plus every layer's filters (exactly num_filters each)."""
    model_dir = Path(model_dir)
    manifest = read_manifest(model_dir)
    tensors: dict[int, list[FilterTensor]] = {}
    for spec in manifest.layers:
        path = _blob_path(model_dir, spec.layer_id)
        if not path.is_file():
            raise WeightBlobError(f"missing weight blob {path.name}")
        expected = 4 * spec.kernel_side**2 * spec.in_channels * spec.num_filters
        raw = path.read_bytes()
        if len(raw) != expected:
            raise WeightBlobError(
                f"{path.name}: expected {expected} bytes "
                f"(4*{spec.kernel_side}^2*{spec.in_channels}*{spec.num_filters}), got {len(raw)}"
            )
        stack = np.frombuffer(raw, dtype=_BLOB_DTYPE).reshape(
            spec.num_filters, spec.in_channels, spec.kernel_side, spec.kernel_side
        )
        tensors[spec.layer_id] = [
            FilterTensor(filter_index=i + 1, weights=stack[i].copy()) for i in range(spec.num_filters)
        ]
    return manifest, tensors


def save_model(
    manifest: ModelManifest,
    tensors: Mapping[int, Sequence[FilterTensor] | np.ndarray],
    model_dir: str | Path,
) -> None:
    """Write model.json plus one blob per layer (little-endian float32)."""
    validate_manifest(manifest)
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    for spec in manifest.layers:
        if spec.layer_id not in tensors:
            raise WeightBlobError(f"no weights supplied for layer {spec.layer_id}")
        entry = tensors[spec.layer_id]
        if isinstance(entry, np.ndarray):
            stack = np.asarray(entry, dtype=np.float64)
        else:
            stack = np.stack([np.asarray(t.weights, dtype=np.float64) for t in entry])
        shape = (spec.num_filters, spec.in_channels, spec.kernel_side, spec.kernel_side)
        if stack.shape != shape:
            raise WeightBlobError(
                f"layer {spec.layer_id}: weights shape {stack.shape} != expected {shape}"
            )
        _blob_path(model_dir, spec.layer_id).write_bytes(
            np.ascontiguousarray(stack, dtype=_BLOB_DTYPE).tobytes()
        )
    (model_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest_to_dict(manifest), indent=2, sort_keys=True) + "\n"
    )


def report_to_dict(report: PruneReport) -> dict:
    return {
        "baseline_accuracy": report.baseline_accuracy,
        "accuracy": report.accuracy,
        "layers": {
            str(lid): {"retention": res.retention, "retained": list(res.retained)}
            for lid, res in report.layers.items()
        },
    }


def report_from_dict(data: dict, manifest: ModelManifest | None = None) -> PruneReport:
    try:
        layers = {}
        for key, entry in data["layers"].items():
            retained = tuple(int(i) for i in entry["retained"])
            layers[int(key)] = LayerResult(retention=float(entry["retention"]), retained=retained)
        report = PruneReport(
            baseline_accuracy=float(data["baseline_accuracy"]),
            accuracy=float(data["accuracy"]),
            layers=layers,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportError(f"report missing or mistyped field: {exc}") from exc
    for lid, res in report.layers.items():
        if not 0.0 <= res.retention <= 1.0:
            raise ReportError(f"layer {lid}: retention {res.retention} outside [0, 1]")
        if list(res.retained) != sorted(set(res.retained)):
            raise ReportError(f"layer {lid}: retained indices must be sorted and unique")
        if res.retained and res.retained[0] < 1:
            raise ReportError(f"layer {lid}: retained indices are 1-based")
        if manifest is not None:
            spec = manifest.layer(lid)
            if res.retained and res.retained[-1] > spec.num_filters:
                raise ReportError(
                    f"layer {lid}: retained index {res.retained[-1]} exceeds {spec.num_filters} filters"
                )
    return report


def write_report(report: PruneReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")


def read_report(path: str | Path, manifest: ModelManifest | None = None) -> PruneReport:
    path = Path(path)
    if not path.is_file():
        raise ReportError(f"no report at {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path} is not valid JSON: {exc}") from exc
    return report_from_dict(data, manifest)


def vgg16_manifest() -> ModelManifest:
    """The 13-conv VGG-16 configuration for 32x32 inputs, two fc layers."""
    widths = [64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512]
    spatial = [32, 32, 16, 16, 8, 8, 8, 4, 4, 4, 2, 2, 2]
    layers = []
    in_ch = 3
    for i, (w, sp) in enumerate(zip(widths, spatial), start=1):
        layers.append(
            LayerSpec(layer_id=i, kernel_side=3, in_channels=in_ch, num_filters=w, out_h=sp, out_w=sp)
        )
        in_ch = w
    fc = (FcSpec(in_dim=512, out_dim=512), FcSpec(in_dim=512, out_dim=10))
    return validate_manifest(ModelManifest(name="vgg16", layers=tuple(layers), fc=fc))


def alexnet_manifest() -> ModelManifest:
    """The 5-conv AlexNet configuration for 32x32 inputs, three fc layers."""
    layers = (
        LayerSpec(layer_id=1, kernel_side=11, in_channels=3, num_filters=96, out_h=32, out_w=32),
        LayerSpec(layer_id=2, kernel_side=5, in_channels=96, num_filters=256, out_h=8, out_w=8),
        LayerSpec(layer_id=3, kernel_side=3, in_channels=256, num_filters=384, out_h=4, out_w=4),
        LayerSpec(layer_id=4, kernel_side=3, in_channels=384, num_filters=384, out_h=4, out_w=4),
        LayerSpec(layer_id=5, kernel_side=3, in_channels=384, num_filters=256, out_h=4, out_w=4),
    )
    fc = (
        FcSpec(in_dim=1024, out_dim=4096),
        FcSpec(in_dim=4096, out_dim=4096),
        FcSpec(in_dim=4096, out_dim=10),
    )
    return validate_manifest(ModelManifest(name="alexnet", layers=layers, fc=fc))
