"""Reference evaluator: a line-JSON accuracy server for the pruning driver.

Usage:
    python3 evaluator.py --model <dir> --seed N [--epochs E]

Protocol (one JSON object per line on stdin, one reply per line on stdout):
    {"cmd": "init", "model": ...}            -> {"baseline_accuracy": b}
    {"cmd": "evaluate", "retained": {...}, "epochs": E} -> {"accuracy": a}
    {"cmd": "close"}                         -> exit 0

``retained`` maps conv layer id (as a string) to the 1-based filter
indices to keep.  Each evaluate builds a copy of the trained model with
the non-retained output channels deleted (and the next layer's matching
input channels), retrains the surviving weights for the requested number
of epochs on the training split, and reports test-set accuracy.

Replies are deterministic: the same seed and the same request sequence
always produce the same replies.  A malformed request gets an error JSON
reply and a nonzero exit.  Accuracy replies are always in [0, 1].
"""

from __future__ import annotations

import argparse
import json
import sys

import torch

import tinycnn

RETRAIN_LR = 0.02


class RequestError(Exception):
    """A request that cannot be served; the server replies and exits."""


class EvalSession:
    """Holds the trained model, the dataset for the session seed, and state."""

    def __init__(self, model_dir: str, seed: int, default_epochs: int):
        self.model_dir = model_dir
        self.seed = seed
        self.default_epochs = default_epochs
        self.model = None
        self.data = None
        self.baseline = None

    def init(self) -> dict:
        torch.manual_seed(self.seed)
        self.model = tinycnn.load_container(self.model_dir)
        self.data = tinycnn.make_dataset(self.seed)
        _, _, test_x, test_y = self.data
        self.baseline = tinycnn.accuracy(self.model, test_x, test_y)
        return {"baseline_accuracy": self.baseline}

    def evaluate(self, request: dict) -> dict:
        if self.model is None:
            raise RequestError("evaluate before init")
        retained_raw = request.get("retained")
        if not isinstance(retained_raw, dict):
            raise RequestError("evaluate needs a retained mapping")
        try:
            retained = {int(lid): indices for lid, indices in retained_raw.items()}
            pruned = tinycnn.slice_model(self.model, retained)
        except (TypeError, ValueError) as exc:
            raise RequestError(str(exc)) from exc
        epochs = request.get("epochs", self.default_epochs)
        if not isinstance(epochs, int) or isinstance(epochs, bool) or epochs < 0:
            raise RequestError("epochs must be a non-negative integer")
        train_x, train_y, test_x, test_y = self.data
        torch.manual_seed(self.seed)
        tinycnn.train(pruned, train_x, train_y, epochs=epochs, lr=RETRAIN_LR)
        return {"accuracy": tinycnn.accuracy(pruned, test_x, test_y)}


def serve(session: EvalSession, in_stream, out_stream) -> int:
    def reply(payload: dict) -> None:
        out_stream.write(json.dumps(payload, sort_keys=True) + "\n")
        out_stream.flush()

    for line in in_stream:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            reply({"error": f"bad JSON: {exc}"})
            return 1
        if not isinstance(request, dict):
            reply({"error": "request must be a JSON object"})
            return 1
        cmd = request.get("cmd")
        try:
            if cmd == "init":
                reply(session.init())
            elif cmd == "evaluate":
                reply(session.evaluate(request))
            elif cmd == "close":
                reply({"ok": True})
                return 0
            else:
                raise RequestError(f"unknown cmd {cmd!r}")
        except RequestError as exc:
            reply({"error": str(exc)})
            return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", required=True, help="model container directory")
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument(
        "--epochs",
        type=int,
        default=1,
        help="retraining epochs for requests that do not state their own",
    )
    args = parser.parse_args(argv)
    torch.set_num_threads(1)
    session = EvalSession(args.model, args.seed, args.epochs)
    return serve(session, sys.stdin, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
