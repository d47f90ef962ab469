"""Max-min envelope distinguishability analysis.

Given aligned (and usually repaired) sub-traces grouped by block class,
build per-class amplitude envelopes — the pointwise maximum and minimum
across all of a class's members — and flag sample indices where one
class's entire range sits below another's by more than a voltage
threshold.  A sound atomic implementation shows no such gap: every block
class executes the same uniform operation pattern, so only a coherent
class-wide shift (e.g. unrepaired pipeline stalls hitting every member
of one class at the same offset) can pull a whole envelope apart from
the others.

Comparisons come in two strengths:

* pairwise — an index is flagged when either class clears the other by
  more than the threshold;
* triple — an index is flagged only when one class clears *both* other
  classes, the stricter verdict used for the final three-way table.

Reports carry per-index direction (which class was lower) and gap size,
so threshold sweeps can be re-evaluated without recomputing envelopes,
and serialize to JSON and CSV plus a dependency-free SVG plot.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .blocks import BLOCK_CLASSES
from .errors import ConfigError, EmptyInput, LengthMismatch

DEFAULT_REGION_END = 5_200_000   # samples; scale-1 analysis window
DEFAULT_THETA = 0.003            # volts


@dataclass
class EnvelopeSeries:
    """Pointwise max/min amplitude across the sub-traces of one class."""

    label: str
    max: np.ndarray
    min: np.ndarray
    count: int

    def __post_init__(self):
        self.max = np.asarray(self.max, dtype=np.float64)
        self.min = np.asarray(self.min, dtype=np.float64)
        if self.max.shape != self.min.shape:
            raise LengthMismatch(
                f"envelope '{self.label}': max has {self.max.shape[0]} "
                f"samples, min has {self.min.shape[0]}")
        if np.any(self.max < self.min):
            raise ValueError(f"envelope '{self.label}': max < min somewhere")

    def __len__(self) -> int:
        return int(self.max.shape[0])


@dataclass
class GapReport:
    """Flagged indices of one envelope comparison.

    ``directions[j]`` names the class whose whole range sat *below* at
    ``flagged[j]``; ``gaps[j]`` is the separation in volts (lowest other
    minimum minus the low class's maximum), which exceeds ``theta`` at
    every flagged index.
    """

    comparison: str
    labels: tuple
    theta: float
    series_length: int
    flagged: np.ndarray
    directions: list
    gaps: np.ndarray

    @property
    def kind(self) -> str:
        return "pair" if len(self.labels) == 2 else "triple"

    @property
    def flag_count(self) -> int:
        return int(len(self.flagged))

    def to_dict(self) -> dict:
        return {
            "comparison": self.comparison,
            "kind": self.kind,
            "labels": list(self.labels),
            "theta": self.theta,
            "series_length": self.series_length,
            "flag_count": self.flag_count,
            "flagged": [int(i) for i in self.flagged],
            "directions": list(self.directions),
            "gaps": [float(g) for g in self.gaps],
        }


def _region_rows(series, region):
    """Validate the region and slice every input series to it."""
    start, end = (0, DEFAULT_REGION_END) if region is None else region
    start, end = int(start), int(end)
    if start < 0 or end <= start:
        raise ConfigError(f"bad analysis region [{start}, {end})")
    rows = []
    for i, s in enumerate(series):
        x = np.asarray(getattr(s, "samples", s), dtype=np.float64)
        if x.shape[0] < end:
            name = getattr(s, "ident", f"series {i}")
            raise LengthMismatch(
                f"{name} has {x.shape[0]} samples, region needs {end}")
        rows.append(x[start:end])
    return rows


def envelope(subtraces, region=None, label: str | None = None) -> EnvelopeSeries:
    """Pointwise max/min over ``region`` across sub-traces of one class.

    ``region`` is a ``(start, end)`` sample range, default the first
    ``DEFAULT_REGION_END`` samples.  Inputs may be SubTrace objects or
    plain arrays; at least two are required for a meaningful envelope.
    """
    subtraces = list(subtraces)
    if len(subtraces) < 2:
        raise EmptyInput(
            f"envelope needs at least two sub-traces, got {len(subtraces)}")
    rows = np.stack(_region_rows(subtraces, region))
    if label is None:
        label = getattr(subtraces[0], "block_class", "")
    return EnvelopeSeries(label=label, max=rows.max(axis=0),
                          min=rows.min(axis=0), count=len(subtraces))


def mean_series(subtraces, region=None) -> np.ndarray:
    """Pointwise arithmetic mean over ``region`` across sub-traces."""
    subtraces = list(subtraces)
    if not subtraces:
        raise EmptyInput("mean_series needs at least one sub-trace")
    return np.stack(_region_rows(subtraces, region)).mean(axis=0)


def _check_comparable(envelopes, theta):
    if theta < 0:
        raise ConfigError(f"threshold must be >= 0, got {theta}")
    n = len(envelopes[0])
    for e in envelopes[1:]:
        if len(e) != n:
            raise LengthMismatch(
                f"envelope '{envelopes[0].label}' has {n} samples, "
                f"'{e.label}' has {len(e)}")
    return n


def detect_gaps_pair(e1: EnvelopeSeries, e2: EnvelopeSeries,
                     theta: float = DEFAULT_THETA) -> GapReport:
    """Flag indices where one class's range clears the other by > theta.

    Index ``i`` is flagged iff ``max1(i) < min2(i) - theta`` or
    ``max2(i) < min1(i) - theta``; at most one direction can hold at a
    given index.
    """
    n = _check_comparable((e1, e2), theta)
    one_low = e1.max < e2.min - theta
    two_low = e2.max < e1.min - theta
    flagged = np.flatnonzero(one_low | two_low)
    directions = [e1.label if one_low[i] else e2.label for i in flagged]
    gaps = np.where(one_low, e2.min - e1.max, e1.min - e2.max)[flagged]
    return GapReport(comparison=f"{e1.label} vs {e2.label}",
                     labels=(e1.label, e2.label), theta=float(theta),
                     series_length=n, flagged=flagged,
                     directions=directions, gaps=gaps)


def detect_gaps_triple(e1: EnvelopeSeries, e2: EnvelopeSeries,
                       e3: EnvelopeSeries,
                       theta: float = DEFAULT_THETA) -> GapReport:
    """Flag indices where one class's range clears *both* others by > theta.

    Stricter than the pairwise test: a triple flag requires a single
    class to be fully separated below the remaining two, so the flagged
    set is always a subset of the union of the pairwise flags.
    """
    envs = (e1, e2, e3)
    n = _check_comparable(envs, theta)
    flags = np.zeros(n, dtype=bool)
    direction = np.full(n, -1, dtype=np.int64)
    gap = np.zeros(n, dtype=np.float64)
    for low in range(3):
        others = [e for j, e in enumerate(envs) if j != low]
        floor = np.minimum(others[0].min, others[1].min)
        here = envs[low].max < floor - theta
        flags |= here
        direction[here] = low
        gap[here] = (floor - envs[low].max)[here]
    flagged = np.flatnonzero(flags)
    labels = tuple(e.label for e in envs)
    return GapReport(comparison=" vs ".join(labels), labels=labels,
                     theta=float(theta), series_length=n, flagged=flagged,
                     directions=[labels[direction[i]] for i in flagged],
                     gaps=gap[flagged])


def compare_classes(subtraces, region=None, theta: float = DEFAULT_THETA):
    """Run every pairwise and triple comparison across block classes.

    Groups the sub-traces by block class, envelopes each group over
    ``region`` and returns ``(envelopes, reports)`` where ``envelopes``
    maps class label to EnvelopeSeries and ``reports`` holds the
    pairwise comparisons (in class order) followed by the triples.
    """
    groups: dict = {}
    for st in subtraces:
        groups.setdefault(st.block_class, []).append(st)
    order = [c for c in BLOCK_CLASSES if c in groups]
    order += sorted(set(groups) - set(order))
    if len(order) < 2:
        raise EmptyInput(f"need at least two block classes, got {order}")
    envs = {c: envelope(groups[c], region, label=c) for c in order}
    reports = [detect_gaps_pair(envs[a], envs[b], theta)
               for a, b in itertools.combinations(order, 2)]
    reports += [detect_gaps_triple(envs[a], envs[b], envs[c], theta)
                for a, b, c in itertools.combinations(order, 3)]
    return envs, reports


def summarize(reports) -> list:
    """Per-comparison flagged-sample counts, one row per report."""
    return [{"comparison": r.comparison, "kind": r.kind, "theta": r.theta,
             "flagged_samples": r.flag_count} for r in reports]


# -- serialization ------------------------------------------------------------


def reports_json(reports, extra: dict | None = None) -> str:
    """One JSON document holding every report plus the summary table."""
    doc = dict(extra or {})
    doc["summary"] = summarize(reports)
    doc["reports"] = [r.to_dict() for r in reports]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def summary_csv(reports) -> str:
    lines = ["comparison,kind,theta,flagged_samples"]
    for row in summarize(reports):
        lines.append(f"{row['comparison']},{row['kind']},"
                     f"{row['theta']:.9g},{row['flagged_samples']}")
    return "\n".join(lines) + "\n"


def report_csv(report: GapReport) -> str:
    """Per-flag rows of one report: index, lower class, gap in volts."""
    lines = ["index,lower_class,gap_volts"]
    for i, d, g in zip(report.flagged, report.directions, report.gaps):
        lines.append(f"{int(i)},{d},{g:.9g}")
    return "\n".join(lines) + "\n"


# -- SVG plot -----------------------------------------------------------------

_PALETTE = {"Dbl": "#1f77b4", "Add1": "#d62728", "Add2": "#2ca02c"}
_FALLBACK = ("#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _flag_runs(reports):
    """Union of flagged indices, merged into (start, stop) runs."""
    idx = sorted({int(i) for r in reports for i in r.flagged})
    runs = []
    for i in idx:
        if runs and i == runs[-1][1]:
            runs[-1][1] = i + 1
        else:
            runs.append([i, i + 1])
    return runs


def _bucket(series, buckets, reduce):
    n = series.shape[0]
    size = -(-n // buckets)
    padded = np.full(buckets * size, series[-1], dtype=np.float64)
    padded[:n] = series
    return reduce(padded.reshape(buckets, size), axis=1)


def envelopes_svg(envelopes, reports=(), width: int = 960, height: int = 320,
                  max_points: int = 1200) -> str:
    """Self-contained SVG plot of the envelopes with flagged runs shaded.

    Each class draws a translucent band between its max and min series
    (bucket-downsampled to at most ``max_points`` columns); flagged index
    runs from ``reports`` are shaded behind the bands.  Output depends
    only on the inputs, so plots are byte-stable across runs.
    """
    envelopes = list(envelopes)
    if not envelopes:
        raise EmptyInput("no envelopes to plot")
    n = _check_comparable(envelopes, 0.0)
    mx, my = 50, 20
    iw, ih = width - 2 * mx, height - 2 * my
    buckets = min(max_points, n)
    lo = min(float(e.min.min()) for e in envelopes)
    hi = max(float(e.max.max()) for e in envelopes)
    span = (hi - lo) or 1.0
    lo, hi = lo - 0.05 * span, hi + 0.05 * span

    def sx(i):
        return mx + iw * i / max(n - 1, 1)

    def sy(v):
        return my + ih * (hi - v) / (hi - lo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" '
           f'fill="white"/>']
    for a, b in _flag_runs(reports):
        out.append(f'<rect x="{sx(a):.2f}" y="{my}" '
                   f'width="{max(sx(b) - sx(a), 1.0):.2f}" height="{ih}" '
                   f'fill="#f5c6c6" fill-opacity="0.7"/>')
    centers = (np.arange(buckets) + 0.5) * (n / buckets)
    fallback = itertools.cycle(_FALLBACK)
    colors = {e.label: _PALETTE.get(e.label) or next(fallback)
              for e in envelopes}
    for e in envelopes:
        color = colors[e.label]
        top = _bucket(e.max, buckets, np.max)
        bot = _bucket(e.min, buckets, np.min)
        pts = [f"{sx(c):.2f},{sy(v):.2f}" for c, v in zip(centers, top)]
        pts += [f"{sx(c):.2f},{sy(v):.2f}"
                for c, v in zip(centers[::-1], bot[::-1])]
        out.append(f'<polygon points="{" ".join(pts)}" fill="{color}" '
                   f'fill-opacity="0.35" stroke="{color}" '
                   f'stroke-width="0.6"/>')
    out.append(f'<rect x="{mx}" y="{my}" width="{iw}" height="{ih}" '
               f'fill="none" stroke="#444" stroke-width="1"/>')
    for frac in (0.0, 0.5, 1.0):
        v = hi - frac * (hi - lo)
        out.append(f'<text x="{mx - 6}" y="{sy(v) + 4:.2f}" '
                   f'font-size="11" text-anchor="end" '
                   f'font-family="monospace">{v:.4f}</text>')
    out.append(f'<text x="{mx}" y="{height - 4}" font-size="11" '
               f'font-family="monospace">0</text>')
    out.append(f'<text x="{mx + iw}" y="{height - 4}" font-size="11" '
               f'text-anchor="end" font-family="monospace">{n}</text>')
    lx = mx + 10
    for e in envelopes:
        color = colors[e.label]
        out.append(f'<rect x="{lx}" y="{my + 8}" width="10" height="10" '
                   f'fill="{color}" fill-opacity="0.6"/>')
        text = f"{e.label} (n={e.count})"
        out.append(f'<text x="{lx + 14}" y="{my + 17}" font-size="12" '
                   f'font-family="monospace">{text}</text>')
        lx += 14 + 8 * len(text) + 18
    out.append("</svg>")
    return "\n".join(out) + "\n"
