#!/usr/bin/env python3
"""Render log-log convergence figures from ratelab CSV output.

Reads the CSV column contract (experiment, family, scheme, ..., error_kind,
error_value), filters one experiment, and draws the measured errors against
the chosen resolution with a fitted slope and the expected reference slope
from the sibling JSON summary.

Usage:
    plots/render.py --csv out/temporal_weak_backward_euler.csv \
        --x k --experiment temporal_weak --out fig.png
"""

import argparse
import csv
import json
import math
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

REQUIRED_COLUMNS = ("experiment", "scheme", "h", "k", "error_kind",
                    "error_value")
MARKERS = ("o", "s", "^", "d", "v", "*")
FIGSIZE = (6.0, 4.5)
DPI = 120


class RenderError(Exception):
    pass


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise RenderError(f"missing CSV columns: {', '.join(missing)}")
        return list(reader)


def select_rows(rows, experiment, x_axis, scheme=None, error_kind=None):
    rows = [r for r in rows if r["experiment"] == experiment]
    if scheme:
        rows = [r for r in rows if r["scheme"] == scheme]
    if error_kind:
        rows = [r for r in rows if r["error_kind"] == error_kind]
    else:
        # prefer rows tagged for this sweep axis; fall back to plain kinds
        tagged = [r for r in rows if r["error_kind"].endswith(f"_{x_axis}_sweep")]
        if tagged:
            rows = tagged
        else:
            rows = [r for r in rows if not r["error_kind"].endswith("_mc")]
    rows = [r for r in rows if r[x_axis] not in ("", None)
            and float(r["error_value"]) > 0.0]
    return rows


def load_reference(csv_path, x_axis):
    """Expected slope and claim text from the sibling JSON summary."""
    json_path = os.path.splitext(csv_path)[0] + ".json"
    if not os.path.exists(json_path):
        return None, None
    with open(json_path, encoding="utf-8") as handle:
        summary = json.load(handle)
    claim = summary.get("claim")
    reports = summary.get("reports", [])
    match = [r for r in reports if f"{x_axis}-sweep" in r.get("name", "")]
    if not match:
        match = [r for r in reports if r.get("expected") is not None]
    expected = match[0]["expected"] if match else None
    return expected, claim


def fit_loglog(xs, ys):
    n = len(xs)
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    mx, my = sum(lx) / n, sum(ly) / n
    sxx = sum((a - mx) ** 2 for a in lx)
    sxy = sum((a - mx) * (b - my) for a, b in zip(lx, ly))
    slope = sxy / sxx
    return slope, my - slope * mx


def render(args):
    rows = read_rows(args.csv)
    rows = select_rows(rows, args.experiment, args.x, args.scheme,
                       args.error_kind)
    if not rows:
        raise RenderError(
            f"no rows match filter experiment={args.experiment!r} "
            f"scheme={args.scheme!r} error_kind={args.error_kind!r} x={args.x}")
    expected, claim = load_reference(args.csv, args.x)

    by_scheme = {}
    for r in rows:
        by_scheme.setdefault(r["scheme"], []).append(
            (float(r[args.x]), float(r["error_value"])))

    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    all_x, all_y = [], []
    for idx, (scheme, pts) in enumerate(sorted(by_scheme.items())):
        pts = sorted(pts)
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        all_x += xs
        all_y += ys
        slope, intercept = fit_loglog(xs, ys)
        label = scheme or args.experiment
        ax.loglog(xs, ys, MARKERS[idx % len(MARKERS)], ms=6,
                  label=f"{label} (fitted {slope:.2f})")
        fit_y = [math.exp(intercept) * x ** slope for x in (xs[0], xs[-1])]
        ax.loglog([xs[0], xs[-1]], fit_y, "-", lw=1.0, alpha=0.7,
                  color=ax.lines[-1].get_color())
    if expected is not None:
        x0, x1 = min(all_x), max(all_x)
        yref = max(all_y)
        ax.loglog([x0, x1], [yref * (x0 / x1) ** expected, yref], "k--", lw=1.2,
                  label=f"expected slope {expected:.2f}")
    ax.set_xlabel(args.x)
    ax.set_ylabel("error")
    title = args.experiment if claim is None else claim
    ax.set_title("\n".join(_wrap(title, 60)), fontsize=9)
    ax.legend(fontsize=8, loc="best")
    ax.grid(True, which="both", alpha=0.25)
    # fixed ticks from the data range keep output deterministic
    ax.set_xlim(min(all_x) * 0.8, max(all_x) * 1.25)
    ax.set_ylim(min(all_y) * 0.5, max(all_y) * 2.0)
    fig.tight_layout()
    fig.savefig(args.out, metadata={"Software": "ratelab-plots"})
    plt.close(fig)
    return len(by_scheme)


def _wrap(text, width):
    words = text.split()
    lines, cur = [], ""
    for w in words:
        if len(cur) + len(w) + 1 > width and cur:
            lines.append(cur)
            cur = w
        else:
            cur = f"{cur} {w}".strip()
    if cur:
        lines.append(cur)
    return lines or [""]


def build_parser():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", required=True)
    parser.add_argument("--x", required=True, choices=("h", "k"))
    parser.add_argument("--experiment", required=True)
    parser.add_argument("--scheme", default=None)
    parser.add_argument("--error-kind", default=None)
    parser.add_argument("--out", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        render(args)
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
