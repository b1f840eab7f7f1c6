#!/usr/bin/env python3
"""Render cumulative-regret comparison curves from experiment trace files.

Reads the runner's trace CSVs (``trace_<policy>_seed<seed>.csv`` with header
``t,context,arm,reward,explore,cum_regret``), averages each policy over its
seeds, and draws mean curves with a +-1 std band. The numeric series behind
the figure is also written as ``<out>.csv`` so plots can be checked without
image comparison.

Usage: plot_regret.py --in <dir> --out fig.png [--stride N] [--labels JSON]
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

TRACE_COLUMNS = ["t", "context", "arm", "reward", "explore", "cum_regret"]
MAX_POINTS = 5000
TRACE_NAME = re.compile(r"^trace_(?P<policy>.+)_seed(?P<seed>\d+)\.csv$")


class SchemaError(ValueError):
    """A trace file does not match the expected column layout."""


@dataclass
class PlotSpec:
    """What to draw: input traces grouped by policy, styling, output paths."""

    inputs: list
    out_path: Path
    stride: int | None = None  # None: choose so curves have <= MAX_POINTS points
    labels: dict = field(default_factory=dict)
    colors: dict = field(default_factory=dict)

    def validate(self):
        if not self.inputs:
            raise ValueError("need at least one input trace file")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")
        return self


def read_trace_columns(path):
    """Return (t, cum_regret) arrays from one trace CSV, checking the schema."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != TRACE_COLUMNS:
            for got, want in zip(header + ["<missing>"] * 6, TRACE_COLUMNS):
                if got != want:
                    raise SchemaError(
                        f"{path}: expected column {want!r}, found {got!r}"
                    )
            raise SchemaError(f"{path}: too many columns: {header}")
        t, cum = [], []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            if len(cells) != len(TRACE_COLUMNS):
                raise SchemaError(f"{path}: row with {len(cells)} cells")
            t.append(int(cells[0]))
            cum.append(float(cells[5]))
    return np.asarray(t, dtype=np.int64), np.asarray(cum)


def collect_traces(directory):
    """Group trace files in a directory by policy name."""
    groups = {}
    for path in sorted(Path(directory).glob("trace_*_seed*.csv")):
        match = TRACE_NAME.match(path.name)
        if match:
            groups.setdefault(match.group("policy"), []).append(path)
    return groups


def aggregate(files):
    """(t, mean, std) over seeds; all traces must share the same horizon."""
    ts, curves = None, []
    for path in files:
        t, cum = read_trace_columns(path)
        if ts is None:
            ts = t
        elif len(t) != len(ts) or not np.array_equal(t, ts):
            raise SchemaError(f"{path}: horizon differs from the other seeds")
        curves.append(cum)
    stack = np.vstack(curves)
    return ts, np.mean(stack, axis=0), np.std(stack, axis=0)


def plot_regret(spec: PlotSpec):
    """Render the figure and write the numeric series; returns both paths."""
    spec.validate()
    groups = {}
    for path in spec.inputs:
        match = TRACE_NAME.match(Path(path).name)
        policy = match.group("policy") if match else Path(path).stem
        groups.setdefault(policy, []).append(Path(path))

    series = {}
    horizon = None
    for policy, files in sorted(groups.items()):
        t, mean, std = aggregate(files)
        if horizon is None:
            horizon = t
        elif not np.array_equal(horizon, t):
            raise SchemaError(f"policy {policy}: horizon differs across policies")
        series[policy] = (mean, std, len(files))

    stride = spec.stride or max(1, math.ceil(len(horizon) / MAX_POINTS))
    idx = np.arange(0, len(horizon), stride)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for policy, (mean, std, n_seeds) in sorted(series.items()):
        label = spec.labels.get(policy, policy)
        color = spec.colors.get(policy)
        line = ax.plot(horizon[idx], mean[idx], label=f"{label} (n={n_seeds})", color=color)
        band_color = color or line[0].get_color()
        ax.fill_between(
            horizon[idx], (mean - std)[idx], (mean + std)[idx],
            alpha=0.2, color=band_color, linewidth=0,
        )
    ax.set_xlabel("t")
    ax.set_ylabel("cumulative regret")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    out_path = Path(spec.out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)

    data_path = out_path.with_suffix(out_path.suffix + ".csv")
    policies = sorted(series)
    with open(data_path, "w") as fh:
        cols = ["t"] + [f"{p}_mean" for p in policies] + [f"{p}_std" for p in policies]
        fh.write(",".join(cols) + "\n")
        for i in idx:
            row = [str(int(horizon[i]))]
            row += [format(series[p][0][i], ".17g") for p in policies]
            row += [format(series[p][1][i], ".17g") for p in policies]
            fh.write(",".join(row) + "\n")
    return out_path, data_path


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--in", dest="in_dir", required=True, help="trace directory")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--stride", type=int, default=None, help="downsample stride")
    parser.add_argument("--labels", default=None, help="JSON map policy -> legend label")
    args = parser.parse_args(argv)

    groups = collect_traces(args.in_dir)
    if not groups:
        print(f"no trace files found in {args.in_dir}", file=sys.stderr)
        return 2
    inputs = [p for files in groups.values() for p in files]
    labels = json.loads(args.labels) if args.labels else {}
    try:
        out_path, data_path = plot_regret(
            PlotSpec(inputs=inputs, out_path=Path(args.out), stride=args.stride, labels=labels)
        )
    except (SchemaError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {out_path} and {data_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
