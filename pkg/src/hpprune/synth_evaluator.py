"""Runnable synthetic evaluator speaking the newline-JSON wire protocol.

Usage: python -m hpprune.synth_evaluator config.json

The config file holds {"baseline_accuracy": b, "layers": {"<id>":
{"size": n, "weight": w, "threshold": t}}}.  Accuracy for a retained
configuration is b - sum(w * max(0, t - retention)) over layers, a pure
function of the per-layer retained counts, so replies are bit-stable
across runs.
"""

from __future__ import annotations

import json
import sys

from .driver import serve_evaluator, synthetic_evaluator


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if len(argv) != 1:
        print("usage: python -m hpprune.synth_evaluator spec.json", file=sys.stderr)
        return 1
    with open(argv[0], "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    return serve_evaluator(synthetic_evaluator(spec))


if __name__ == "__main__":
    raise SystemExit(main())
