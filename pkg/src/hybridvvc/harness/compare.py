"""Side-by-side table of a baseline run and a hybrid run."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .runner import RunSummary


@dataclass
class ComparisonReport:
    baseline: RunSummary
    hybrid: RunSummary

    @property
    def rows(self):
        b, h = self.baseline, self.hybrid
        return [
            ("mode", b.mode, h.mode),
            ("seed", b.seed, h.seed),
            ("steps", b.steps, h.steps),
            ("violations", b.violation_count, h.violation_count),
            ("first violation step", b.first_violation_step, h.first_violation_step),
            ("mean performance", b.mean_performance, h.mean_performance),
            ("final performance", b.final_performance, h.final_performance),
            ("first switch to adaptive", b.first_switch_step, h.first_switch_step),
            ("adaptive share (final window)", b.adaptive_share_final, h.adaptive_share_final),
        ]

    def to_text(self) -> str:
        def cell(v):
            if v is None:
                return "-"
            if isinstance(v, float):
                return f"{v:.4f}"
            return str(v)

        rows = [("", "baseline", "hybrid")] + [(k, cell(b), cell(h)) for k, b, h in self.rows]
        w = [max(len(r[i]) for r in rows) for i in range(3)]
        return "\n".join(f"{r[0]:<{w[0]}}  {r[1]:>{w[1]}}  {r[2]:>{w[2]}}" for r in rows)


def _load(summary):
    if isinstance(summary, RunSummary):
        return summary
    path = Path(summary)
    if path.is_dir():
        path = path / "summary.json"
    return RunSummary.from_json_file(path)


def compare(baseline_summary, hybrid_summary) -> ComparisonReport:
    """Accepts summaries or paths to run directories / ``summary.json`` files."""
    return ComparisonReport(_load(baseline_summary), _load(hybrid_summary))
