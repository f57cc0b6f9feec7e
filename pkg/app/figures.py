"""SVG figures written with ElementTree, each next to the CSV of its plotted values.

Four kinds are supported:

* ``cumulative-returns``: one polyline per series over a shared date axis.
  Data columns: ``date`` then one column per series.
* ``return-distribution``: one box (min, quartiles, median, max) per series on
  a symmetric-log axis. Data columns: ``series,min,q1,median,q3,max``.
* ``correlation-heatmap``: N x N coloured grid annotated with two decimals.
  Data: square frame indexed and labelled by series.
* ``frontier-scatter``: frontier line plus asset and portfolio points.
  Data columns: ``group,label,volatility,expected_return`` with group one of
  ``frontier``, ``asset``, ``portfolio``.
"""

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import List, Mapping, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import FIGURE_KINDS, SYMLOG_LINEAR_THRESHOLD
from .errors import DataError, ReportIOError
from .logger import logger
from .utils import symlog

WIDTH, HEIGHT = 800, 500
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 170, 50, 60
PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]
FRONTIER_GROUPS = ("frontier", "asset", "portfolio")


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    title: str
    series_labels: Tuple[str, ...] = ()
    x_label: str = ""
    y_label: str = ""

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind '{self.kind}', expected one of {', '.join(FIGURE_KINDS)}")
        object.__setattr__(self, "series_labels", tuple(self.series_labels))


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _tick_label(value: float) -> str:
    return f"{value:.3g}"


class _Canvas:
    """One SVG document with a rectangular plot area."""

    def __init__(self, title: str):
        self.root = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", version="1.1",
                               width=str(WIDTH), height=str(HEIGHT), viewBox=f"0 0 {WIDTH} {HEIGHT}")
        ET.SubElement(self.root, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="white")
        heading = ET.SubElement(self.root, "text", {"x": str(WIDTH / 2), "y": "28", "text-anchor": "middle",
                                                    "font-family": "sans-serif", "font-size": "16"})
        heading.text = title
        self.left, self.top = MARGIN_LEFT, MARGIN_TOP
        self.right, self.bottom = WIDTH - MARGIN_RIGHT, HEIGHT - MARGIN_BOTTOM

    def text(self, x: float, y: float, content: str, anchor: str = "start", size: int = 11,
             parent: ET.Element = None, **extra) -> ET.Element:
        node = ET.SubElement(parent if parent is not None else self.root, "text",
                             {"x": _fmt(x), "y": _fmt(y), "text-anchor": anchor, "font-family": "sans-serif",
                              "font-size": str(size), **extra})
        node.text = content
        return node

    def line(self, x1, y1, x2, y2, stroke="black", parent: ET.Element = None, **extra) -> ET.Element:
        return ET.SubElement(parent if parent is not None else self.root, "line",
                             {"x1": _fmt(x1), "y1": _fmt(y1), "x2": _fmt(x2), "y2": _fmt(y2),
                              "stroke": stroke, **extra})

    def axes(self, x_label: str, y_label: str, y_ticks: Sequence[Tuple[float, str]]) -> None:
        group = ET.SubElement(self.root, "g", {"class": "axes"})
        self.line(self.left, self.bottom, self.right, self.bottom, parent=group)
        self.line(self.left, self.top, self.left, self.bottom, parent=group)
        for y, label in y_ticks:
            self.line(self.left - 5, y, self.left, y, parent=group)
            self.text(self.left - 8, y + 4, label, anchor="end", size=10, parent=group)
        self.text((self.left + self.right) / 2, HEIGHT - 15, x_label, anchor="middle", parent=group)
        self.text(18, (self.top + self.bottom) / 2, y_label, anchor="middle", parent=group,
                  transform=f"rotate(-90 18 {_fmt((self.top + self.bottom) / 2)})")

    def legend(self, labels: Sequence[str]) -> None:
        group = ET.SubElement(self.root, "g", {"class": "legend"})
        for k, label in enumerate(labels):
            entry = ET.SubElement(group, "g", {"class": "legend-entry"})
            y = self.top + 10 + 20 * k
            ET.SubElement(entry, "rect", x=_fmt(self.right + 15), y=_fmt(y - 9), width="12", height="12",
                          fill=PALETTE[k % len(PALETTE)])
            self.text(self.right + 33, y + 1, label, parent=entry)

    def scale(self, low: float, high: float, vertical: bool):
        if high <= low:
            low, high = low - 1.0, high + 1.0
        if vertical:
            return lambda v: self.bottom - (v - low) / (high - low) * (self.bottom - self.top)
        return lambda v: self.left + (v - low) / (high - low) * (self.right - self.left)


def _padded_range(values: np.ndarray) -> Tuple[float, float]:
    low, high = float(np.nanmin(values)), float(np.nanmax(values))
    pad = 0.05 * (high - low) if high > low else max(abs(high), 1.0) * 0.05
    return low - pad, high + pad


def _linear_ticks(low: float, high: float, count: int = 5) -> List[float]:
    return list(np.linspace(low, high, count))


def _cumulative(canvas: _Canvas, spec: FigureSpec, data: pd.DataFrame) -> None:
    labels = [c for c in data.columns if c != "date"]
    values = data[labels].to_numpy(dtype=float)
    low, high = _padded_range(values)
    x = canvas.scale(0, max(len(data) - 1, 1), vertical=False)
    y = canvas.scale(low, high, vertical=True)
    canvas.axes(spec.x_label or "date", spec.y_label or "cumulative return",
                [(y(v), _tick_label(v)) for v in _linear_ticks(low, high)])
    dates = list(data["date"]) if "date" in data.columns else []
    if dates:
        canvas.text(canvas.left, canvas.bottom + 18, str(dates[0]), size=10)
        canvas.text(canvas.right, canvas.bottom + 18, str(dates[-1]), anchor="end", size=10)
    for k, label in enumerate(labels):
        points = " ".join(f"{_fmt(x(i))},{_fmt(y(v))}" for i, v in enumerate(values[:, k]))
        ET.SubElement(canvas.root, "polyline", {"class": "series", "points": points, "fill": "none",
                                                "stroke": PALETTE[k % len(PALETTE)], "stroke-width": "1.2",
                                                "data-label": label})
    canvas.legend(labels)


def _distribution(canvas: _Canvas, spec: FigureSpec, data: pd.DataFrame) -> None:
    stats = data[["min", "q1", "median", "q3", "max"]].to_numpy(dtype=float)
    transformed = np.vectorize(lambda v: symlog(v, SYMLOG_LINEAR_THRESHOLD))(stats)
    low, high = _padded_range(transformed)
    y = canvas.scale(low, high, vertical=True)
    ticks = []
    for magnitude in (1e-1, 1e-2, 1e-3, 1e-4):
        for value in (-magnitude, magnitude):
            t = symlog(value, SYMLOG_LINEAR_THRESHOLD)
            if low <= t <= high:
                ticks.append((y(t), _tick_label(value)))
    if low <= 0 <= high:
        ticks.append((y(0.0), "0"))
    canvas.axes(spec.x_label or "series", spec.y_label or "daily return (symmetric log)", ticks)

    count = len(data)
    slot = (canvas.right - canvas.left) / count
    for k, (label, row) in enumerate(zip(data["series"], transformed)):
        lo, q1, median, q3, hi = row
        center = canvas.left + slot * (k + 0.5)
        half = min(slot * 0.3, 25)
        colour = PALETTE[k % len(PALETTE)]
        box = ET.SubElement(canvas.root, "g", {"class": "box", "data-label": str(label)})
        canvas.line(center, y(lo), center, y(hi), stroke=colour, parent=box)
        ET.SubElement(box, "rect", {"x": _fmt(center - half), "y": _fmt(y(q3)), "width": _fmt(2 * half),
                                    "height": _fmt(max(y(q1) - y(q3), 0.5)), "fill": colour,
                                    "fill-opacity": "0.4", "stroke": colour})
        canvas.line(center - half, y(median), center + half, y(median), stroke="black", parent=box)
        canvas.text(center, canvas.bottom + 18, str(label), anchor="middle", size=10, parent=box)


def _heat_colour(value: float) -> str:
    if not math.isfinite(value):
        return "#cccccc"
    v = max(-1.0, min(1.0, value))
    # white at 0, red towards +1, blue towards -1
    fade = int(round(255 * (1.0 - abs(v))))
    return f"#ff{fade:02x}{fade:02x}" if v >= 0 else f"#{fade:02x}{fade:02x}ff"


def _heatmap(canvas: _Canvas, spec: FigureSpec, data: pd.DataFrame) -> None:
    labels = [str(c) for c in data.columns]
    values = data.to_numpy(dtype=float)
    n = len(labels)
    size = min((canvas.right - canvas.left) / n, (canvas.bottom - canvas.top) / n)
    grid = ET.SubElement(canvas.root, "g", {"class": "heatmap"})
    for i in range(n):
        canvas.text(canvas.left - 6, canvas.top + size * (i + 0.5) + 4, labels[i], anchor="end", size=10,
                    parent=grid)
        canvas.text(canvas.left + size * (i + 0.5), canvas.top + n * size + 16, labels[i], anchor="middle",
                    size=10, parent=grid)
        for j in range(n):
            value = values[i, j]
            ET.SubElement(grid, "rect", {"class": "cell", "x": _fmt(canvas.left + size * j),
                                         "y": _fmt(canvas.top + size * i), "width": _fmt(size),
                                         "height": _fmt(size), "fill": _heat_colour(value), "stroke": "white"})
            canvas.text(canvas.left + size * (j + 0.5), canvas.top + size * (i + 0.5) + 4,
                        f"{value:.2f}" if math.isfinite(value) else "n/a", anchor="middle", size=10,
                        parent=grid, **{"class": "annotation"})


def _scatter(canvas: _Canvas, spec: FigureSpec, data: pd.DataFrame) -> None:
    vols = data["volatility"].to_numpy(dtype=float)
    rets = data["expected_return"].to_numpy(dtype=float)
    x_low, x_high = _padded_range(vols)
    y_low, y_high = _padded_range(rets)
    x = canvas.scale(x_low, x_high, vertical=False)
    y = canvas.scale(y_low, y_high, vertical=True)
    canvas.axes(spec.x_label or "volatility", spec.y_label or "expected return",
                [(y(v), _tick_label(v)) for v in _linear_ticks(y_low, y_high)])
    for v in _linear_ticks(x_low, x_high):
        canvas.text(x(v), canvas.bottom + 18, _tick_label(v), anchor="middle", size=10)

    frontier = data[data["group"] == "frontier"]
    if len(frontier):
        points = " ".join(f"{_fmt(x(v))},{_fmt(y(r))}"
                          for v, r in zip(frontier["volatility"], frontier["expected_return"]))
        ET.SubElement(canvas.root, "polyline", {"class": "frontier", "points": points, "fill": "none",
                                                "stroke": "black", "stroke-dasharray": "6,4"})
    legend = []
    for k, (_, row) in enumerate(data[data["group"] != "frontier"].iterrows()):
        colour = PALETTE[k % len(PALETTE)]
        px, py = x(row["volatility"]), y(row["expected_return"])
        if row["group"] == "asset":
            ET.SubElement(canvas.root, "circle", {"class": "asset", "cx": _fmt(px), "cy": _fmt(py), "r": "4",
                                                  "fill": colour})
        else:
            ET.SubElement(canvas.root, "rect", {"class": "portfolio", "x": _fmt(px - 5), "y": _fmt(py - 5),
                                                "width": "10", "height": "10", "fill": colour})
        canvas.text(px + 7, py - 6, str(row["label"]), size=10)
        legend.append(str(row["label"]))
    canvas.legend(legend)


RENDERERS = {
    "cumulative-returns": (_cumulative, None),
    "return-distribution": (_distribution, ("series", "min", "q1", "median", "q3", "max")),
    "correlation-heatmap": (_heatmap, None),
    "frontier-scatter": (_scatter, ("group", "label", "volatility", "expected_return")),
}


def _as_frame(data: Union[pd.DataFrame, Mapping[str, Sequence]]) -> pd.DataFrame:
    if isinstance(data, pd.DataFrame):
        return data
    try:
        return pd.DataFrame(dict(data))
    except ValueError as e:
        raise DataError(f"inconsistent series lengths: {e}") from e


def _check(spec: FigureSpec, frame: pd.DataFrame, required) -> None:
    if frame.empty:
        raise DataError(f"no data for figure '{spec.title}'")
    if required is not None:
        missing = [c for c in required if c not in frame.columns]
        if missing:
            raise DataError(f"figure '{spec.title}' is missing column(s) {', '.join(missing)}")
    if spec.kind == "cumulative-returns":
        if len([c for c in frame.columns if c != "date"]) == 0:
            raise DataError(f"figure '{spec.title}' has no series")
        if frame.drop(columns=["date"], errors="ignore").isna().any().any():
            raise DataError("inconsistent series lengths")
    if spec.kind == "correlation-heatmap" and frame.shape[0] != frame.shape[1]:
        raise DataError(f"heatmap data must be square, got {frame.shape}")
    if spec.kind == "frontier-scatter" and not frame["group"].isin(FRONTIER_GROUPS).all():
        raise DataError(f"scatter groups must be one of {', '.join(FRONTIER_GROUPS)}")


def render_svg(spec: FigureSpec, data: Union[pd.DataFrame, Mapping[str, Sequence]]) -> ET.Element:
    """Build the SVG element tree without touching the filesystem."""
    frame = _as_frame(data)
    renderer, required = RENDERERS[spec.kind]
    _check(spec, frame, required)
    canvas = _Canvas(spec.title)
    renderer(canvas, spec, frame)
    return canvas.root


def companion_frame(spec: FigureSpec, data: Union[pd.DataFrame, Mapping[str, Sequence]]) -> pd.DataFrame:
    frame = _as_frame(data)
    if spec.kind == "correlation-heatmap":
        frame = frame.copy()
        frame.insert(0, "series", [str(i) for i in frame.index])
    return frame.reset_index(drop=True)


def emit_figure(spec: FigureSpec, data: Union[pd.DataFrame, Mapping[str, Sequence]],
                svg_path: Union[str, Path], csv_path: Union[str, Path]) -> Tuple[Path, Path]:
    """Write the SVG and the CSV of exactly the values it plots."""
    svg_path, csv_path = Path(svg_path), Path(csv_path)
    root = render_svg(spec, data)
    try:
        svg_path.parent.mkdir(parents=True, exist_ok=True)
        ET.ElementTree(root).write(svg_path, encoding="utf-8", xml_declaration=True)
        companion_frame(spec, data).to_csv(csv_path, index=False)
    except OSError as e:
        raise ReportIOError(f"could not write {csv_path}: {e}") from e
    logger.info(f"Wrote figure {svg_path.name} with data {csv_path.name}")
    return svg_path, csv_path
