"""Build and train the desk-scale 3-conv model, then write its container.

Usage:
    python3 make_model.py --out <dir> [--seed N] [--epochs N]

Writes model.json, layer_<id>.bin per conv layer, and aux_params.npz
(conv biases plus the classifier head) into --out.  Training and data
generation are fully deterministic for a given seed.
"""

from __future__ import annotations

import argparse
import json
import sys

import torch

import tinycnn


def build_model(seed: int, epochs: int) -> tuple[tinycnn.TinyCnn, float]:
    torch.set_num_threads(1)
    torch.manual_seed(seed)
    model = tinycnn.TinyCnn()
    train_x, train_y, test_x, test_y = tinycnn.make_dataset(seed)
    tinycnn.train(model, train_x, train_y, epochs=epochs, lr=0.01)
    return model, tinycnn.accuracy(model, test_x, test_y)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="directory for the model container")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=40)
    args = parser.parse_args(argv)

    model, test_accuracy = build_model(args.seed, args.epochs)
    tinycnn.save_container(model, args.out)
    json.dump(
        {"out": args.out, "seed": args.seed, "test_accuracy": test_accuracy},
        sys.stdout,
        sort_keys=True,
    )
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
