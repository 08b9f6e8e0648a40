"""Backward layer-by-layer retention search.

The last conv layer starts a bounded midpoint search from retention 0
over [0, 1].  Every earlier layer first probes the retention its
successor achieved; a probe within the loss budget accepts the layer
outright, otherwise the search runs over [inherited retention, 1].
Each evaluated round partitions the working set into c = ceil(R * |set|)
clusters and keeps the representatives; by default the working set is
the current survivor set (it only shrinks), with
``recluster_from_original=True`` every round re-partitions the layer's
full filter set instead.  A new midpoint that moves the cursor by less
than 0.0125 ends the layer, as does a hard cap of six evaluated rounds.
The layer keeps its last within-budget configuration, falling back to
the probe configuration (inner layers) or the full set (last layer)
when no round passed.
"""

from __future__ import annotations

import json
import math
import shlex
import subprocess
import sys
import threading
import queue
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .clustering import cluster
from .errors import EvaluatorError
from .model_io import (
    FilterTensor,
    LayerResult,
    ModelManifest,
    PruneReport,
    load_model,
)
from .pyramid import build_layer_pyramids

DEFAULT_LOSS_BUDGET = 0.005
CURSOR_THRESHOLD = 0.0125
MAX_ROUNDS = 6


# ---------------------------------------------------------------------------
# evaluators


@dataclass(frozen=True)
class LayerPenalty:
    size: int
    weight: float
    threshold: float


@dataclass(frozen=True)
class SyntheticSpec:
    """Accuracy model: baseline - sum over layers of weight * max(0, threshold - retention)."""

    baseline_accuracy: float
    layers: dict[int, LayerPenalty]

    def to_dict(self) -> dict:
        return {
            "baseline_accuracy": self.baseline_accuracy,
            "layers": {
                str(lid): {"size": p.size, "weight": p.weight, "threshold": p.threshold}
                for lid, p in self.layers.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        layers = {
            int(lid): LayerPenalty(
                size=int(entry["size"]),
                weight=float(entry["weight"]),
                threshold=float(entry["threshold"]),
            )
            for lid, entry in data["layers"].items()
        }
        return cls(baseline_accuracy=float(data["baseline_accuracy"]), layers=layers)


class SyntheticEvaluator:
    """In-process evaluator over retained-set sizes; pure and reproducible."""

    def __init__(self, spec: SyntheticSpec):
        self.spec = spec

    def initialize(self, model_ref: str = "") -> float:
        return self.spec.baseline_accuracy

    def evaluate(self, retained: Mapping[int, Sequence[int]], epochs: int = 0) -> float:
        acc = self.spec.baseline_accuracy
        for lid, pen in self.spec.layers.items():
            kept = retained.get(lid)
            r = 1.0 if kept is None else len(kept) / pen.size
            acc -= pen.weight * max(0.0, pen.threshold - r)
        return acc

    def close(self) -> None:
        pass


def synthetic_evaluator(spec: SyntheticSpec | dict) -> SyntheticEvaluator:
    if isinstance(spec, dict):
        spec = SyntheticSpec.from_dict(spec)
    return SyntheticEvaluator(spec)


def serve_evaluator(evaluator, in_stream=None, out_stream=None) -> int:
    """Serve any in-process evaluator over the newline-JSON wire protocol."""
    in_stream = sys.stdin if in_stream is None else in_stream
    out_stream = sys.stdout if out_stream is None else out_stream

    def emit(obj):
        out_stream.write(json.dumps(obj, sort_keys=True) + "\n")
        out_stream.flush()

    for line in in_stream:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            emit({"error": "request is not valid JSON"})
            return 1
        cmd = req.get("cmd") if isinstance(req, dict) else None
        if cmd == "init":
            emit({"baseline_accuracy": evaluator.initialize(req.get("model", ""))})
        elif cmd == "evaluate":
            retained = {int(k): list(v) for k, v in (req.get("retained") or {}).items()}
            emit({"accuracy": evaluator.evaluate(retained, int(req.get("epochs", 0)))})
        elif cmd == "close":
            evaluator.close()
            return 0
        else:
            emit({"error": f"unsupported command: {cmd!r}"})
            return 1
    return 0


class SubprocessEvaluator:
    """Wire-protocol client: newline-delimited JSON over a child's stdin/stdout.

    The child's stderr passes straight through.  Any process death,
    timeout, or non-JSON reply raises EvaluatorError.
    """

    def __init__(self, command: str | Sequence[str], *, timeout: float = 600.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not argv:
            raise EvaluatorError("empty evaluator command")
        self.timeout = timeout
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise EvaluatorError(f"cannot start evaluator {argv!r}: {exc}") from exc
        self._replies: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        try:
            for line in self._proc.stdout:
                self._replies.put(line)
        finally:
            self._replies.put(None)

    def _roundtrip(self, payload: dict, reply_key: str) -> float:
        try:
            self._proc.stdin.write(json.dumps(payload, sort_keys=True) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EvaluatorError(f"evaluator stdin closed: {exc}") from exc
        try:
            line = self._replies.get(timeout=self.timeout)
        except queue.Empty:
            raise EvaluatorError(f"no reply from evaluator within {self.timeout}s") from None
        if line is None:
            rc = self._proc.poll()
            raise EvaluatorError(f"evaluator closed its stdout (exit code {rc})")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise EvaluatorError(f"malformed evaluator reply: {line.strip()!r}") from None
        if not isinstance(obj, dict) or reply_key not in obj:
            raise EvaluatorError(f"evaluator reply missing {reply_key!r}: {line.strip()!r}")
        value = obj[reply_key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise EvaluatorError(f"evaluator reply {reply_key!r} is not a number: {value!r}")
        return float(value)

    def initialize(self, model_ref: str = "") -> float:
        return self._roundtrip({"cmd": "init", "model": str(model_ref)}, "baseline_accuracy")

    def evaluate(self, retained: Mapping[int, Sequence[int]], epochs: int = 0) -> float:
        payload = {
            "cmd": "evaluate",
            "retained": {str(lid): sorted(int(i) for i in kept) for lid, kept in retained.items()},
            "epochs": int(epochs),
        }
        return self._roundtrip(payload, "accuracy")

    def close(self) -> None:
        try:
            self._proc.stdin.write(json.dumps({"cmd": "close"}) + "\n")
            self._proc.stdin.flush()
            self._proc.stdin.close()
        except (BrokenPipeError, OSError):
            pass
        try:
            rc = self._proc.wait(timeout=self.timeout)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            raise EvaluatorError("evaluator did not exit after close") from None
        if rc != 0:
            raise EvaluatorError(f"evaluator exited with code {rc}")

    def kill(self) -> None:
        if self._proc.poll() is None:
            self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.kill()


# ---------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class RoundEvent:
    layer_id: int
    phase: str  # "probe" or "round"
    retention: float
    survivor_count: int
    accuracy: float
    within_budget: bool
    r_lower: float | None
    r_upper: float | None


@dataclass(frozen=True)
class LayerTrace:
    layer_id: int
    num_filters: int
    retained: tuple[int, ...]
    accepted_phase: str  # "probe" | "round" | "fallback-probe" | "fallback-full"
    evaluator_calls: int


@dataclass
class DriverState:
    baseline_accuracy: float
    loss_budget: float
    events: list[RoundEvent] = field(default_factory=list)
    layers: dict[int, LayerTrace] = field(default_factory=dict)

    def evaluator_calls(self, layer_id: int) -> int:
        return self.layers[layer_id].evaluator_calls


def _clamped_cluster_count(retention: float, size: int) -> int:
    return min(size, max(1, math.ceil(retention * size)))


def binary_search_layer(
    layer_id: int,
    *,
    r_lower: float,
    r_upper: float,
    r_start: float,
    partition: Callable[[float], tuple[int, ...]],
    evaluate: Callable[[Sequence[int]], float],
    loss_budget: float,
    baseline_accuracy: float,
    fallback: tuple[tuple[int, ...], float, str],
    threshold: float = CURSOR_THRESHOLD,
    max_rounds: int = MAX_ROUNDS,
    events: list[RoundEvent] | None = None,
) -> tuple[tuple[int, ...], float, str, int]:
    """Bounded midpoint search over retention.

    Each evaluated round moves r_upper down (within budget) or r_lower up
    (violation).  Returns the last within-budget configuration, or the
    fallback when none passed, as (retained, accuracy, phase, rounds).
    """
    best: tuple[tuple[int, ...], float, str] | None = None
    r_cur = r_start
    rounds = 0
    while True:
        mid = (r_upper + r_lower) / 2.0
        if abs(r_cur - mid) < threshold or rounds >= max_rounds:
            break
        r_cur = mid
        survivors = partition(mid)
        rounds += 1
        accuracy = evaluate(survivors)
        ok = (baseline_accuracy - accuracy) <= loss_budget
        if events is not None:
            events.append(
                RoundEvent(layer_id, "round", mid, len(survivors), accuracy, ok, r_lower, r_upper)
            )
        if ok:
            r_upper = mid
            best = (survivors, accuracy, "round")
        else:
            r_lower = mid
    if best is None:
        return (*fallback, rounds)
    return (*best, rounds)


def run(
    model: str | Path | tuple[ModelManifest, Mapping[int, Sequence[FilterTensor]]],
    evaluator,
    loss_budget: float = DEFAULT_LOSS_BUDGET,
    *,
    epochs: int = 1,
    strategy: str = "even-spaced",
    random_state: int | None = None,
    recluster_from_original: bool = False,
    threshold: float = CURSOR_THRESHOLD,
    max_rounds: int = MAX_ROUNDS,
    max_cluster_iter: int = 100,
    model_ref: str | None = None,
    return_state: bool = False,
):
    """Prune every conv layer, last to first, within the accuracy budget.

    ``model`` is a container directory or an already loaded
    (manifest, tensors) pair; ``model_ref`` is what the evaluator's init
    handshake receives (defaults to the directory path).  Returns the
    PruneReport, or (report, DriverState) with ``return_state=True``.
    """
    if loss_budget < 0:
        raise ValueError(f"loss_budget must be >= 0, got {loss_budget}")
    if isinstance(model, (str, Path)):
        manifest, tensors = load_model(model)
        if model_ref is None:
            model_ref = str(model)
    else:
        manifest, tensors = model
        if model_ref is None:
            model_ref = ""

    if strategy == "seeded-random":
        if random_state is None:
            raise ValueError("seeded-random strategy requires random_state")
        seed_seq = np.random.SeedSequence(random_state)

        def next_seed():
            return seed_seq.spawn(1)[0]

    else:

        def next_seed():
            return None

    state = DriverState(baseline_accuracy=0.0, loss_budget=loss_budget)

    def guarded(context: str, fn):
        try:
            return fn()
        except EvaluatorError as exc:
            raise EvaluatorError(f"{context}: {exc}") from exc

    baseline = guarded("during init handshake", lambda: evaluator.initialize(model_ref))
    state.baseline_accuracy = baseline

    sets: dict[int, tuple[int, ...]] = {
        spec.layer_id: tuple(t.filter_index for t in tensors[spec.layer_id])
        for spec in manifest.layers
    }
    current_accuracy = baseline
    prev_retention: float | None = None

    for pos, spec in enumerate(reversed(manifest.layers)):
        lid = spec.layer_id
        n = spec.num_filters
        pyramids = build_layer_pyramids(tensors[lid], spec)
        by_label = {p.filter_index: p for p in pyramids}
        full_labels = sets[lid]
        working = full_labels
        calls = 0

        def partition(retention: float) -> tuple[int, ...]:
            nonlocal working
            base = full_labels if recluster_from_original else working
            c = _clamped_cluster_count(retention, len(base))
            result = cluster(
                [by_label[lab] for lab in base],
                c,
                strategy=strategy,
                random_state=next_seed(),
                max_iter=max_cluster_iter,
            )
            survivors = tuple(sorted(result.representatives()))
            if not recluster_from_original:
                working = survivors
            return survivors

        def evaluate(survivors: Sequence[int]) -> float:
            nonlocal calls
            calls += 1
            retained = dict(sets)
            retained[lid] = tuple(survivors)
            return guarded(
                f"while evaluating layer {lid}",
                lambda: evaluator.evaluate(retained, epochs),
            )

        if pos == 0:
            r_lower, r_upper, r_start = 0.0, 1.0, 0.0
            fallback = (full_labels, current_accuracy, "fallback-full")
        else:
            r_inherit = prev_retention
            survivors = partition(r_inherit)
            accuracy = evaluate(survivors)
            ok = (baseline - accuracy) <= loss_budget
            state.events.append(
                RoundEvent(lid, "probe", r_inherit, len(survivors), accuracy, ok, None, None)
            )
            if ok:
                sets[lid] = survivors
                current_accuracy = accuracy
                prev_retention = len(survivors) / n
                state.layers[lid] = LayerTrace(lid, n, survivors, "probe", calls)
                continue
            r_lower, r_upper, r_start = r_inherit, 1.0, r_inherit
            if recluster_from_original:
                working = full_labels
                fallback = (full_labels, current_accuracy, "fallback-full")
            else:
                fallback = (survivors, accuracy, "fallback-probe")

        final_set, final_acc, phase, _ = binary_search_layer(
            lid,
            r_lower=r_lower,
            r_upper=r_upper,
            r_start=r_start,
            partition=partition,
            evaluate=evaluate,
            loss_budget=loss_budget,
            baseline_accuracy=baseline,
            fallback=fallback,
            threshold=threshold,
            max_rounds=max_rounds,
            events=state.events,
        )
        sets[lid] = final_set
        current_accuracy = final_acc
        prev_retention = len(final_set) / n
        state.layers[lid] = LayerTrace(lid, n, final_set, phase, calls)

    report = PruneReport(
        baseline_accuracy=baseline,
        accuracy=current_accuracy,
        layers={
            spec.layer_id: LayerResult(
                retention=len(sets[spec.layer_id]) / spec.num_filters,
                retained=tuple(sorted(sets[spec.layer_id])),
            )
            for spec in manifest.layers
        },
    )
    if return_state:
        return report, state
    return report
