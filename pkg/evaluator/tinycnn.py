"""Shared pieces of the reference evaluator: data, model, container I/O.

The model container is the same directory format the pruning toolkit
reads: model.json plus one little-endian float32 blob per conv layer,
filter-major.  Everything the toolkit does not track (conv biases and
the classifier head) lives in an aux_params.npz sidecar next to the
manifest, so this package stays self-contained and never imports the
toolkit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

MANIFEST_NAME = "model.json"
AUX_NAME = "aux_params.npz"

NUM_CLASSES = 4
IMAGE_SIDE = 8
IN_CHANNELS = 3
CONV_WIDTHS = (8, 16, 16)
TRAIN_SAMPLES = 256
TEST_SAMPLES = 256
BATCH_SIZE = 32
NOISE_SCALE = 0.35
_TEMPLATE_SEED = 1234567  # class templates are a fixed property of the task


def make_dataset(seed: int):
    """Deterministic 4-class template-plus-noise images, train and test splits."""
    template_rng = np.random.default_rng(_TEMPLATE_SEED)
    templates = template_rng.normal(
        size=(NUM_CLASSES, IN_CHANNELS, IMAGE_SIDE, IMAGE_SIDE)
    ).astype(np.float32)
    noise_rng = np.random.default_rng(seed)

    def split(count):
        labels = np.arange(count) % NUM_CLASSES
        noise = noise_rng.normal(scale=NOISE_SCALE, size=(count,) + templates.shape[1:])
        images = templates[labels] + noise.astype(np.float32)
        return (
            torch.from_numpy(images.astype(np.float32)),
            torch.from_numpy(labels.astype(np.int64)),
        )

    train_x, train_y = split(TRAIN_SAMPLES)
    test_x, test_y = split(TEST_SAMPLES)
    return train_x, train_y, test_x, test_y


class TinyCnn(nn.Module):
    """3 conv layers (3x3, padding 1) with 2x2 max pooling down to 1x1."""

    def __init__(self, widths=CONV_WIDTHS):
        super().__init__()
        w1, w2, w3 = widths
        self.conv1 = nn.Conv2d(IN_CHANNELS, w1, 3, padding=1)
        self.conv2 = nn.Conv2d(w1, w2, 3, padding=1)
        self.conv3 = nn.Conv2d(w2, w3, 3, padding=1)
        self.pool = nn.MaxPool2d(2)
        self.fc = nn.Linear(w3, NUM_CLASSES)

    def forward(self, x):
        x = self.pool(torch.relu(self.conv1(x)))  # 8x8 -> 4x4
        x = self.pool(torch.relu(self.conv2(x)))  # 4x4 -> 2x2
        x = self.pool(torch.relu(self.conv3(x)))  # 2x2 -> 1x1
        return self.fc(torch.flatten(x, 1))


def manifest_dict() -> dict:
    layers = []
    in_ch = IN_CHANNELS
    for i, (width, out) in enumerate(zip(CONV_WIDTHS, (8, 4, 2)), start=1):
        layers.append(
            {
                "id": i,
                "k": 3,
                "in_channels": in_ch,
                "num_filters": width,
                "out_h": out,
                "out_w": out,
            }
        )
        in_ch = width
    return {
        "name": "tiny-cnn",
        "layers": layers,
        "fc": [{"in_dim": CONV_WIDTHS[-1], "out_dim": NUM_CLASSES}],
    }


def save_container(model: TinyCnn, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest_dict(), sort_keys=True, indent=2) + "\n"
    )
    aux = {}
    for i, conv in enumerate((model.conv1, model.conv2, model.conv3), start=1):
        weights = conv.weight.detach().numpy().astype("<f4")
        (out_dir / f"layer_{i}.bin").write_bytes(weights.tobytes())
        aux[f"conv{i}_bias"] = conv.bias.detach().numpy().astype(np.float32)
    aux["fc_weight"] = model.fc.weight.detach().numpy().astype(np.float32)
    aux["fc_bias"] = model.fc.bias.detach().numpy().astype(np.float32)
    np.savez(out_dir / AUX_NAME, **aux)


def load_container(model_dir: str | Path) -> TinyCnn:
    model_dir = Path(model_dir)
    manifest = json.loads((model_dir / MANIFEST_NAME).read_text())
    widths = tuple(layer["num_filters"] for layer in manifest["layers"])
    if widths != CONV_WIDTHS:
        raise ValueError(f"container widths {widths} are not the tiny model {CONV_WIDTHS}")
    aux = np.load(model_dir / AUX_NAME)
    model = TinyCnn()
    in_ch = IN_CHANNELS
    for i, conv in enumerate((model.conv1, model.conv2, model.conv3), start=1):
        spec = manifest["layers"][i - 1]
        raw = (model_dir / f"layer_{i}.bin").read_bytes()
        weights = np.frombuffer(raw, dtype="<f4").reshape(
            spec["num_filters"], in_ch, spec["k"], spec["k"]
        )
        with torch.no_grad():
            conv.weight.copy_(torch.from_numpy(weights.copy()))
            conv.bias.copy_(torch.from_numpy(aux[f"conv{i}_bias"]))
        in_ch = spec["num_filters"]
    with torch.no_grad():
        model.fc.weight.copy_(torch.from_numpy(aux["fc_weight"]))
        model.fc.bias.copy_(torch.from_numpy(aux["fc_bias"]))
    return model


def slice_model(full: TinyCnn, retained: dict[int, list[int]]) -> TinyCnn:
    """Copy of the model with only the retained filters per conv layer.

    ``retained`` maps layer id (1..3) to 1-based kept filter indices.
    Removing an output filter also removes the matching input channel of
    the next layer, and the classifier column for the last conv layer.
    """
    keep = []
    for lid, width in enumerate(CONV_WIDTHS, start=1):
        indices = retained.get(lid)
        if indices is None:
            keep.append(list(range(width)))
            continue
        rows = sorted(int(i) - 1 for i in indices)
        if not rows:
            raise ValueError(f"layer {lid}: retained set is empty")
        if rows[0] < 0 or rows[-1] >= width or len(set(rows)) != len(rows):
            raise ValueError(f"layer {lid}: retained indices outside 1..{width} or repeated")
        keep.append(rows)

    pruned = TinyCnn(widths=tuple(len(rows) for rows in keep))
    convs_full = (full.conv1, full.conv2, full.conv3)
    convs_new = (pruned.conv1, pruned.conv2, pruned.conv3)
    with torch.no_grad():
        in_keep = list(range(IN_CHANNELS))
        for rows, src, dst in zip(keep, convs_full, convs_new):
            dst.weight.copy_(src.weight[rows][:, in_keep])
            dst.bias.copy_(src.bias[rows])
            in_keep = rows
        pruned.fc.weight.copy_(full.fc.weight[:, keep[-1]])
        pruned.fc.bias.copy_(full.fc.bias)
    return pruned


def accuracy(model: TinyCnn, x: torch.Tensor, y: torch.Tensor) -> float:
    model.eval()
    with torch.no_grad():
        predicted = model(x).argmax(dim=1)
    return float((predicted == y).sum().item()) / len(y)


def train(model: TinyCnn, x: torch.Tensor, y: torch.Tensor, epochs: int, lr: float) -> None:
    """Fixed-order minibatch SGD; deterministic for a given model state."""
    if epochs <= 0:
        return
    model.train()
    optimizer = torch.optim.SGD(model.parameters(), lr=lr, momentum=0.9)
    loss_fn = nn.CrossEntropyLoss()
    for _ in range(epochs):
        for start in range(0, len(x), BATCH_SIZE):
            batch_x = x[start : start + BATCH_SIZE]
            batch_y = y[start : start + BATCH_SIZE]
            optimizer.zero_grad()
            loss = loss_fn(model(batch_x), batch_y)
            loss.backward()
            optimizer.step()
