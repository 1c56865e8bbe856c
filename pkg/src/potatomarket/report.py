"""Per-agent yearly series as CSV tables and SVG line charts."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from html import escape
from pathlib import Path
from typing import Optional

METRICS = ("finance", "commodity")

WIDTH, HEIGHT, MARGIN = 800, 500, 40


@dataclass(frozen=True)
class YearlySeries:
    agent: str
    metric: str
    points: tuple[tuple[int, float], ...]
    predicted: Optional[tuple[int, float]] = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        years = [y for y, _ in self.points]
        if any(b != a + 1 for a, b in zip(years, years[1:])):
            raise ValueError(f"{self.agent} {self.metric}: years not consecutive: {years}")
        if self.predicted is not None:
            if not self.points or self.predicted[0] != years[-1] + 1:
                raise ValueError("predicted year must follow the last point")

    @classmethod
    def from_mapping(cls, agent: str, metric: str, values: dict[int, float],
                     predicted: Optional[float] = None) -> "YearlySeries":
        points = tuple((y, float(values[y])) for y in sorted(values))
        pred = None
        if predicted is not None and points:
            pred = (points[-1][0] + 1, float(predicted))
        return cls(agent, metric, points, pred)

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.points]

    @property
    def stem(self) -> str:
        return f"{self.agent}_{self.metric}"


def write_series_table(series: YearlySeries, path) -> None:
    if not series.points:
        raise ValueError("empty series")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "value", "predicted"])
        for year, value in series.points:
            w.writerow([year, f"{value:.2f}", 0])
        if series.predicted is not None:
            w.writerow([series.predicted[0], f"{series.predicted[1]:.2f}", 1])


def read_series_table(path, agent: str, metric: str) -> YearlySeries:
    points, predicted = [], None
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["year", "value", "predicted"]:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            entry = (int(row["year"]), float(row["value"]))
            if row["predicted"] == "1":
                predicted = entry
            else:
                points.append(entry)
    return YearlySeries(agent, metric, tuple(points), predicted)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_chart_svg(series: YearlySeries) -> str:
    if not series.points:
        raise ValueError("empty series")
    everything = list(series.points) + ([series.predicted] if series.predicted else [])
    years = [y for y, _ in everything]
    values = [v for _, v in everything]
    x0, x1 = min(years), max(years)
    lo, hi = min(values), max(values)
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        lo, hi = lo - pad, hi + pad
    left, right = MARGIN, WIDTH - MARGIN
    top, bottom = MARGIN, HEIGHT - MARGIN

    def sx(year):
        if x1 == x0:
            return (left + right) / 2
        return left + (year - x0) * (right - left) / (x1 - x0)

    def sy(value):
        return bottom - (value - lo) * (bottom - top) / (hi - lo)

    title = f"{series.agent} — {series.metric}"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="{MARGIN / 2 + 5:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{escape(title)}</text>',
        f'<line class="axis" x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
    ]
    for year in years:
        out.append(f'<text x="{_fmt(sx(year))}" y="{bottom + 15}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10">{year}</text>')
    for value in (lo, hi):
        out.append(f'<text x="{left + 3}" y="{_fmt(sy(value) - 3)}" '
                   f'font-family="sans-serif" font-size="10">{value:.2f}</text>')
    coords = " ".join(f"{_fmt(sx(y))},{_fmt(sy(v))}" for y, v in series.points)
    out.append(f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{coords}"/>')
    if series.predicted is not None:
        (ly, lv), (py, pv) = series.points[-1], series.predicted
        out.append(f'<line class="prediction" x1="{_fmt(sx(ly))}" y1="{_fmt(sy(lv))}" '
                   f'x2="{_fmt(sx(py))}" y2="{_fmt(sy(pv))}" stroke="darkorange" '
                   f'stroke-width="2" stroke-dasharray="6,4"/>')
        out.append(f'<circle cx="{_fmt(sx(py))}" cy="{_fmt(sy(pv))}" r="4" fill="darkorange"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_chart(series: YearlySeries, path) -> None:
    Path(path).write_text(render_chart_svg(series), encoding="utf-8")


def write_series(series: YearlySeries, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    table, chart = out / f"{series.stem}.csv", out / f"{series.stem}.svg"
    write_series_table(series, table)
    render_chart(series, chart)
    return table, chart
