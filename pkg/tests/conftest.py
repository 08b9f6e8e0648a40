import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hpprune import FcSpec, FilterTensor, LayerSpec, ModelManifest, save_model

REPO_ROOT = Path(__file__).resolve().parent.parent
EVALUATOR_SCRIPT = REPO_ROOT / "evaluator" / "evaluator.py"
MAKE_MODEL_SCRIPT = REPO_ROOT / "evaluator" / "make_model.py"
WIRE_TEE_SCRIPT = REPO_ROOT / "tests" / "wire_tee.py"
GOLDEN_DIR = REPO_ROOT / "tests" / "golden"


def make_layer(layer_id, kernel_side, in_channels, num_filters, out=4):
    return LayerSpec(
        layer_id=layer_id,
        kernel_side=kernel_side,
        in_channels=in_channels,
        num_filters=num_filters,
        out_h=out,
        out_w=out,
    )


def make_tensors(spec, rng):
    return [
        FilterTensor(
            filter_index=i + 1,
            weights=rng.normal(size=(spec.in_channels, spec.kernel_side, spec.kernel_side)),
        )
        for i in range(spec.num_filters)
    ]


def make_model(layer_shapes, seed=0, name="toy"):
    """layer_shapes: list of (kernel_side, in_channels, num_filters)."""
    rng = np.random.default_rng(seed)
    layers = []
    for i, (k, cin, n) in enumerate(layer_shapes, start=1):
        layers.append(make_layer(i, k, cin, n))
    last = layers[-1]
    manifest = ModelManifest(
        name=name,
        layers=tuple(layers),
        fc=(FcSpec(last.num_filters * last.out_h * last.out_w, 10),),
    )
    tensors = {spec.layer_id: make_tensors(spec, rng) for spec in layers}
    return manifest, tensors


@pytest.fixture
def toy_model():
    return make_model([(3, 3, 12), (3, 12, 16)], seed=7)


@pytest.fixture
def toy_model_dir(tmp_path, toy_model):
    manifest, tensors = toy_model
    save_model(manifest, tensors, tmp_path / "model")
    return tmp_path / "model"


@pytest.fixture(scope="session")
def tiny_model_workdir(tmp_path_factory):
    """Directory holding tiny_model/, the trained 3-conv reference container.

    Runs with the evaluator use this directory as cwd and the relative path
    "tiny_model", which keeps recorded wire transcripts path-independent.
    """
    workdir = tmp_path_factory.mktemp("tinycnn")
    subprocess.run(
        [sys.executable, str(MAKE_MODEL_SCRIPT), "--out", "tiny_model", "--seed", "0"],
        cwd=workdir,
        check=True,
        capture_output=True,
    )
    return workdir
