"""Parameter and FLOP accounting for pruned models.

Conventions: one multiply-accumulate is two FLOPs, biases count as
parameters (one per surviving filter / output unit), pooling,
activations, and batch norm are ignored.  Pruning layer i shrinks layer
i+1's effective input channels; the first fc layer's input shrinks
proportionally with the last conv layer's survivors, later fc layers
keep full width.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import DataError
from .model_io import ModelManifest, PruneReport


@dataclass(frozen=True)
class CostLine:
    name: str
    params_baseline: int
    params_pruned: int
    flops_baseline: int
    flops_pruned: int


@dataclass(frozen=True)
class CostReport:
    params_baseline: int
    params_pruned: int
    flops_baseline: int
    flops_pruned: int
    lines: tuple[CostLine, ...]

    @property
    def params_reduction(self) -> float:
        return 1.0 - self.params_pruned / self.params_baseline

    @property
    def flops_reduction(self) -> float:
        return 1.0 - self.flops_pruned / self.flops_baseline

    def to_dict(self) -> dict:
        return {
            "params_baseline": self.params_baseline,
            "params_pruned": self.params_pruned,
            "flops_baseline": self.flops_baseline,
            "flops_pruned": self.flops_pruned,
            "params_reduction": self.params_reduction,
            "flops_reduction": self.flops_reduction,
            "layers": [
                {
                    "name": ln.name,
                    "params_baseline": ln.params_baseline,
                    "params_pruned": ln.params_pruned,
                    "flops_baseline": ln.flops_baseline,
                    "flops_pruned": ln.flops_pruned,
                }
                for ln in self.lines
            ],
        }


def report_from_dict(data: dict) -> CostReport:
    lines = tuple(
        CostLine(
            name=entry["name"],
            params_baseline=entry["params_baseline"],
            params_pruned=entry["params_pruned"],
            flops_baseline=entry["flops_baseline"],
            flops_pruned=entry["flops_pruned"],
        )
        for entry in data["layers"]
    )
    return CostReport(
        params_baseline=data["params_baseline"],
        params_pruned=data["params_pruned"],
        flops_baseline=data["flops_baseline"],
        flops_pruned=data["flops_pruned"],
        lines=lines,
    )


def retained_counts_from_report(report: PruneReport) -> dict[int, int]:
    return {lid: len(res.retained) for lid, res in report.layers.items()}


def retained_counts_from_rates(manifest: ModelManifest, rates: Mapping[int, float]) -> dict[int, int]:
    """Convert pruning rates (fraction removed) to retained counts by rounding."""
    counts = {}
    for spec in manifest.layers:
        rate = rates.get(spec.layer_id, 0.0)
        if not 0.0 <= rate <= 1.0:
            raise DataError(f"layer {spec.layer_id}: pruning rate {rate} outside [0, 1]")
        counts[spec.layer_id] = round(spec.num_filters * (1.0 - rate))
    return counts


def count(manifest: ModelManifest, retained: Mapping[int, int] | None = None) -> CostReport:
    """Params and FLOPs, baseline and after channel pruning."""
    retained = dict(retained or {})
    ids = set(manifest.layer_ids())
    for lid, value in retained.items():
        if lid not in ids:
            raise DataError(f"retained count for unknown layer {lid}")
        n = manifest.layer(lid).num_filters
        if not 0 <= value <= n:
            raise DataError(f"layer {lid}: retained count {value} outside 0..{n}")

    lines = []
    in_full = in_eff = None
    for spec in manifest.layers:
        if in_full is None:
            in_full = in_eff = spec.in_channels
        out_full = spec.num_filters
        out_eff = retained.get(spec.layer_id, out_full)
        area = spec.kernel_side**2
        pixels = spec.out_h * spec.out_w
        lines.append(
            CostLine(
                name=f"conv{spec.layer_id}",
                params_baseline=area * in_full * out_full + out_full,
                params_pruned=area * in_eff * out_eff + out_eff,
                flops_baseline=2 * area * in_full * out_full * pixels,
                flops_pruned=2 * area * in_eff * out_eff * pixels,
            )
        )
        in_full, in_eff = out_full, out_eff

    for pos, fc in enumerate(manifest.fc, start=1):
        if pos == 1:
            last = manifest.layers[-1]
            spatial = fc.in_dim // last.num_filters
            fc_in_eff = retained.get(last.layer_id, last.num_filters) * spatial
        else:
            fc_in_eff = fc.in_dim
        lines.append(
            CostLine(
                name=f"fc{pos}",
                params_baseline=fc.in_dim * fc.out_dim + fc.out_dim,
                params_pruned=fc_in_eff * fc.out_dim + fc.out_dim,
                flops_baseline=2 * fc.in_dim * fc.out_dim,
                flops_pruned=2 * fc_in_eff * fc.out_dim,
            )
        )

    return CostReport(
        params_baseline=sum(ln.params_baseline for ln in lines),
        params_pruned=sum(ln.params_pruned for ln in lines),
        flops_baseline=sum(ln.flops_baseline for ln in lines),
        flops_pruned=sum(ln.flops_pruned for ln in lines),
        lines=tuple(lines),
    )


def format_rate(rate: float) -> str:
    """0 renders as "0%", anything else as a two-decimal percentage."""
    if rate == 0:
        return "0%"
    return f"{rate * 100:.2f}%"


def format_table(report: CostReport) -> str:
    """Two-row human summary plus a per-layer breakdown."""
    rows = [
        ("", "params", "FLOPs", "params cut", "FLOPs cut"),
        ("baseline", f"{report.params_baseline:,}", f"{report.flops_baseline:,}", format_rate(0.0), format_rate(0.0)),
        (
            "pruned",
            f"{report.params_pruned:,}",
            f"{report.flops_pruned:,}",
            format_rate(report.params_reduction),
            format_rate(report.flops_reduction),
        ),
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    out = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows]
    out.append("")
    for ln in report.lines:
        out.append(
            f"{ln.name:>8}  params {ln.params_baseline:>12,} -> {ln.params_pruned:>12,}"
            f"  flops {ln.flops_baseline:>14,} -> {ln.flops_pruned:>14,}"
        )
    return "\n".join(out)
