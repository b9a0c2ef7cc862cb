"""Static figures derived from a run CSV: performance and voltage magnitudes."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class CsvFormatError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def read_run_csv(path):
    """Parse a run CSV into ``(columns, rows)``, where ``columns`` maps each
    header name to a list of raw strings.

    ``#`` lines are skipped. Rows with the wrong arity raise
    :class:`CsvFormatError` carrying the 1-based line number.
    """
    path = Path(path)
    header = None
    data = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                fields = next(csv.reader([line]))
            except csv.Error as exc:
                raise CsvFormatError(path, lineno, str(exc)) from exc
            if header is None:
                if "step" not in fields:
                    raise CsvFormatError(path, lineno, "header row has no 'step' column")
                header = fields
                continue
            if len(fields) != len(header):
                raise CsvFormatError(
                    path, lineno, f"expected {len(header)} fields, got {len(fields)}")
            data.append((lineno, fields))
    if header is None:
        raise CsvFormatError(path, 0, "no header row")
    columns = {name: [f[i] for _, f in data] for i, name in enumerate(header)}
    return columns, [n for n, _ in data]


def _numeric(columns, lines, name, path):
    out = np.empty(len(lines))
    for k, raw in enumerate(columns[name]):
        try:
            out[k] = float(raw)
        except ValueError:
            raise CsvFormatError(path, lines[k], f"column {name!r}: not a number: {raw!r}") from None
    return out


def emit_plots(csv_path, out_dir):
    """Write ``performance.png`` and ``voltages.png`` into ``out_dir``.

    The tracked estimates are drawn only when the CSV carries them (hybrid
    runs). Returns the written paths.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    columns, lines = read_run_csv(csv_path)
    steps = _numeric(columns, lines, "step", csv_path)
    perf = _numeric(columns, lines, "actual_performance", csv_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(steps, perf, lw=0.8, label="performance")
    for name, style in (("tracked_rules", "--"), ("tracked_adaptive", ":")):
        if name in columns:
            ax.plot(steps, _numeric(columns, lines, name, csv_path), style, lw=1.0, label=name)
    if "chosen" in columns:
        adaptive = np.array([c == "adaptive" for c in columns["chosen"]])
        if adaptive.any():
            ax.fill_between(steps, 0, 1, where=adaptive, color="tab:green", alpha=0.1,
                            step="mid", label="adaptive applied")
    ax.set_xlabel("step")
    ax.set_ylabel("performance")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    perf_path = out / "performance.png"
    fig.savefig(perf_path, dpi=100)
    plt.close(fig)

    v_names = sorted((c for c in columns if c.startswith("v_")), key=lambda c: int(c[2:]))
    fig, ax = plt.subplots(figsize=(10, 4))
    for name in v_names:
        ax.plot(steps, _numeric(columns, lines, name, csv_path), lw=0.6)
    ax.axhline(0.9, color="k", lw=0.5, ls="--")
    ax.axhline(1.1, color="k", lw=0.5, ls="--")
    ax.set_xlabel("step")
    ax.set_ylabel("|V| [pu]")
    fig.tight_layout()
    volt_path = out / "voltages.png"
    fig.savefig(volt_path, dpi=100)
    plt.close(fig)
    return [perf_path, volt_path]
