"""Plain SVG 1.1 figures: bars with confidence whiskers, line charts,
correlation heatmaps and department choropleths.

Every document is built with ElementTree (so it is well-formed XML) on a
960x540 canvas and carries exactly one ``<g class="legend">`` group.
"""
from __future__ import annotations

import json
import math
import warnings
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

WIDTH, HEIGHT = 960, 540
SVG_NS = "http://www.w3.org/2000/svg"

LOW_COLOR = (255, 245, 235)
HIGH_COLOR = (127, 39, 4)
NEUTRAL = "#dddddd"
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


class GeoJSONError(ValueError):
    pass


def _num(v) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if math.isfinite(v) else "0"


def _root(title: str):
    root = ET.Element(
        "svg",
        {
            "xmlns": SVG_NS,
            "version": "1.1",
            "width": str(WIDTH),
            "height": str(HEIGHT),
            "viewBox": f"0 0 {WIDTH} {HEIGHT}",
            "font-family": "sans-serif",
        },
    )
    ET.SubElement(root, "title").text = title
    if title:
        _text(root, WIDTH / 2, 24, title, size=16, anchor="middle")
    return root


def _text(parent, x, y, content, size=11, anchor="start", **attrs):
    el = ET.SubElement(
        parent, "text", {"x": _num(x), "y": _num(y), "font-size": str(size), "text-anchor": anchor, **attrs}
    )
    el.text = str(content)
    return el


def _line(parent, x1, y1, x2, y2, stroke="#000000", width=1.0, **attrs):
    return ET.SubElement(
        parent,
        "line",
        {"x1": _num(x1), "y1": _num(y1), "x2": _num(x2), "y2": _num(y2), "stroke": stroke, "stroke-width": _num(width), **attrs},
    )


def to_string(root) -> str:
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def save(svg: str, path) -> None:
    Path(path).write_text(svg, encoding="utf-8")


def _nice_ticks(lo, hi, count=5):
    if not math.isfinite(lo) or not math.isfinite(hi):
        return [0.0]
    if hi == lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 12))
        t += step
    return ticks


class _Axes:
    """Linear (or log-x) mapping of data coordinates into a pixel box."""

    def __init__(self, box, xlim, ylim, log_x=False):
        self.x0, self.y0, self.w, self.h = box
        self.log_x = log_x
        xl = [math.log10(v) for v in xlim] if log_x else list(xlim)
        if xl[1] == xl[0]:
            xl = [xl[0] - 0.5, xl[1] + 0.5]
        if ylim[1] == ylim[0]:
            ylim = (ylim[0] - 0.5, ylim[1] + 0.5)
        self.xlim, self.ylim = xl, ylim

    def x(self, v):
        v = math.log10(v) if self.log_x else v
        return self.x0 + (v - self.xlim[0]) / (self.xlim[1] - self.xlim[0]) * self.w

    def y(self, v):
        return self.y0 + self.h - (v - self.ylim[0]) / (self.ylim[1] - self.ylim[0]) * self.h

    def draw(self, parent, xlabel="", ylabel="", xticks=True, label_gap=34):
        g = ET.SubElement(parent, "g", {"class": "axes"})
        _line(g, self.x0, self.y0 + self.h, self.x0 + self.w, self.y0 + self.h)
        _line(g, self.x0, self.y0, self.x0, self.y0 + self.h)
        for t in _nice_ticks(*self.ylim):
            yy = self.y(t)
            _line(g, self.x0 - 4, yy, self.x0, yy)
            _text(g, self.x0 - 6, yy + 4, f"{t:g}", size=10, anchor="end")
        if xticks:
            if self.log_x:
                ticks = [10.0**e for e in range(math.ceil(self.xlim[0]), math.floor(self.xlim[1]) + 1)]
            else:
                ticks = _nice_ticks(*self.xlim)
            for t in ticks:
                xx = self.x(t)
                _line(g, xx, self.y0 + self.h, xx, self.y0 + self.h + 4)
                _text(g, xx, self.y0 + self.h + 16, f"{t:g}", size=10, anchor="middle")
        if xlabel:
            _text(g, self.x0 + self.w / 2, self.y0 + self.h + label_gap, xlabel, anchor="middle")
        if ylabel:
            cx, cy = self.x0 - 46, self.y0 + self.h / 2
            _text(g, cx, cy, ylabel, anchor="middle", transform=f"rotate(-90 {_num(cx)} {_num(cy)})")
        return g


def render_bar_with_ci(rows, title: str = "", feature: str = "") -> str:
    """Policy counts per level (left) and claim proportion with CI whiskers (right)."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to plot")
    root = _root(title)
    n = len(rows)
    left = _Axes((70, 70, 380, 360), (0, n), (0, max(r.policy_count for r in rows) * 1.05))
    right = _Axes((560, 70, 380, 360), (0, n), (0, max(1e-9, max(r.ci_high for r in rows)) * 1.05))
    # level labels are rotated below the axis, so the axis title sits lower
    left.draw(root, feature, "number of policies", xticks=False, label_gap=90)
    right.draw(root, feature, "claim proportion", xticks=False, label_gap=90)

    bars = ET.SubElement(root, "g", {"class": "bars"})
    slot = left.w / n
    for i, r in enumerate(rows):
        x = left.x(i) + slot * 0.1
        top = left.y(r.policy_count)
        ET.SubElement(
            bars,
            "rect",
            {"x": _num(x), "y": _num(top), "width": _num(slot * 0.8), "height": _num(left.y(0) - top), "fill": PALETTE[0]},
        )

    points = ET.SubElement(root, "g", {"class": "proportions"})
    for i, r in enumerate(rows):
        cx = right.x(i + 0.5)
        _line(points, cx, right.y(r.ci_low), cx, right.y(r.ci_high), PALETTE[1], 1.5)
        for edge in (r.ci_low, r.ci_high):
            _line(points, cx - 4, right.y(edge), cx + 4, right.y(edge), PALETTE[1], 1.5)
        ET.SubElement(points, "circle", {"cx": _num(cx), "cy": _num(right.y(r.proportion)), "r": "3", "fill": PALETTE[1]})

    step = max(1, math.ceil(n / 20))
    labels = ET.SubElement(root, "g", {"class": "levels"})
    for i, r in enumerate(rows):
        if i % step:
            continue
        for ax in (left, right):
            cx, cy = ax.x(i + 0.5), ax.y0 + ax.h + 12
            _text(labels, cx, cy, r.level, size=9, anchor="end", transform=f"rotate(-45 {_num(cx)} {_num(cy)})")

    legend = ET.SubElement(root, "g", {"class": "legend"})
    _line(legend, 600, 48, 616, 48, PALETTE[0], 8)
    _text(legend, 622, 52, "policies")
    _line(legend, 700, 48, 716, 48, PALETTE[1], 1.5)
    ET.SubElement(legend, "circle", {"cx": "708", "cy": "48", "r": "3", "fill": PALETTE[1]})
    _text(legend, 722, 52, "claim proportion (95% CI)")
    return to_string(root)


def render_line(series: dict, title: str = "", xlabel: str = "", ylabel: str = "", log_x: bool = False) -> str:
    """One path per named series; ``series`` maps a name to ``(xs, ys)``."""
    series = {name: (list(map(float, xs)), list(map(float, ys))) for name, (xs, ys) in series.items()}
    if not series or any(len(xs) == 0 or len(xs) != len(ys) for xs, ys in series.values()):
        raise ValueError("every series needs matching, non-empty x and y values")
    all_x = [x for xs, _ in series.values() for x in xs]
    all_y = [y for _, ys in series.values() for y in ys]
    if log_x and min(all_x) <= 0:
        raise ValueError("log-scaled x needs positive values")
    pad = (max(all_y) - min(all_y)) * 0.05
    axes = _Axes((80, 50, 640, 420), (min(all_x), max(all_x)), (min(all_y) - pad, max(all_y) + pad), log_x)
    root = _root(title)
    axes.draw(root, xlabel, ylabel)
    lines = ET.SubElement(root, "g", {"class": "series"})
    legend = ET.SubElement(root, "g", {"class": "legend"})
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        d = " ".join(f"{'M' if j == 0 else 'L'}{_num(axes.x(x))},{_num(axes.y(y))}" for j, (x, y) in enumerate(zip(xs, ys)))
        ET.SubElement(lines, "path", {"d": d, "fill": "none", "stroke": color, "stroke-width": "1.5", "data-series": str(name)})
        ly = 60 + 16 * i
        _line(legend, 740, ly, 760, ly, color, 2)
        _text(legend, 766, ly + 4, name, size=10)
    return to_string(root)


def _mix(t, low=LOW_COLOR, high=HIGH_COLOR):
    t = min(1.0, max(0.0, t))
    r, g, b = (round(a + (c - a) * t) for a, c in zip(low, high))
    return f"#{r:02x}{g:02x}{b:02x}"


def _diverging(v):
    if not math.isfinite(v):
        return NEUTRAL
    if v >= 0:
        return _mix(v, (247, 247, 247), (178, 24, 43))
    return _mix(-v, (247, 247, 247), (33, 102, 172))


def render_heatmap(corr, title: str = "Correlation heatmap") -> str:
    names, values = list(corr.names), np.asarray(corr.values)
    if not names:
        raise ValueError("empty correlation matrix")
    root = _root(title)
    n = len(names)
    cell = min(360 / n, 40)
    x0, y0 = 220, 60
    cells = ET.SubElement(root, "g", {"class": "cells"})
    for i in range(n):
        _text(cells, x0 - 6, y0 + (i + 0.5) * cell + 3, names[i], size=9, anchor="end")
        cx, cy = x0 + (i + 0.5) * cell, y0 + n * cell + 8
        _text(cells, cx, cy, names[i], size=9, anchor="end", transform=f"rotate(-60 {_num(cx)} {_num(cy)})")
        for j in range(n):
            v = float(values[i, j])
            rect = ET.SubElement(
                cells,
                "rect",
                {"x": _num(x0 + j * cell), "y": _num(y0 + i * cell), "width": _num(cell), "height": _num(cell), "fill": _diverging(v)},
            )
            ET.SubElement(rect, "title").text = f"{names[i]} / {names[j]}: {v:.3f}"
    legend = ET.SubElement(root, "g", {"class": "legend"})
    lx = x0 + n * cell + 40
    for k, v in enumerate(np.linspace(1, -1, 21)):
        ET.SubElement(legend, "rect", {"x": _num(lx), "y": _num(y0 + k * 12), "width": "16", "height": "12", "fill": _diverging(v)})
    for v, k in ((1, 0), (0, 10), (-1, 20)):
        _text(legend, lx + 22, y0 + k * 12 + 10, f"{v:g}", size=10)
    return to_string(root)


# --- choropleth -------------------------------------------------------------


def load_geojson(source) -> dict:
    if isinstance(source, dict):
        return source
    try:
        with open(source, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise GeoJSONError(f"{source}: not valid JSON ({exc})") from exc


def _rings(geometry):
    if not isinstance(geometry, dict):
        raise GeoJSONError("feature without geometry")
    kind, coords = geometry.get("type"), geometry.get("coordinates")
    if kind == "Polygon":
        polygons = [coords]
    elif kind == "MultiPolygon":
        polygons = coords
    else:
        raise GeoJSONError(f"unsupported geometry type {kind!r}")
    try:
        return [[[(float(p[0]), float(p[1])) for p in ring] for ring in poly] for poly in polygons]
    except (TypeError, IndexError, ValueError) as exc:
        raise GeoJSONError(f"bad coordinates in {kind}") from exc


def _department_values(aggregates, value_field):
    if isinstance(aggregates, dict):
        return {str(k): float(v) for k, v in aggregates.items()}
    out = {}
    for a in aggregates:
        if not hasattr(a, value_field):
            raise ValueError(f"unknown value field {value_field!r}")
        out[a.code] = float(getattr(a, value_field))
    return out


def render_choropleth(geojson, aggregates, value_field: str = "claim_count", code_property: str = "code", title: str = "") -> str:
    """Departments shaded on a linear scale from the lowest to the highest value.

    ``aggregates`` is a list of DepartmentAggregate (``value_field`` picks the
    attribute) or a plain ``{code: value}`` mapping. Map regions with no value
    are drawn in neutral grey. Coordinates are treated as lon/lat and the
    x axis is shrunk by cos(mean latitude).
    """
    data = load_geojson(geojson)
    if not isinstance(data, dict) or data.get("type") != "FeatureCollection" or not isinstance(data.get("features"), list):
        raise GeoJSONError("expected a GeoJSON FeatureCollection")
    values = _department_values(aggregates, value_field)

    shapes = []
    for feature in data["features"]:
        props = feature.get("properties") or {}
        if code_property not in props:
            raise GeoJSONError(f"feature lacks the {code_property!r} property")
        shapes.append((str(props[code_property]).upper(), _rings(feature.get("geometry"))))
    if not shapes:
        raise GeoJSONError("FeatureCollection has no features")
    unknown = sorted(set(values) - {c for c, _ in shapes})
    if unknown:
        warnings.warn(f"departments missing from the map: {unknown}", stacklevel=2)

    pts = np.array([p for _, polys in shapes for poly in polys for ring in poly for p in ring])
    lat0 = math.radians(float(pts[:, 1].mean()))
    sx = math.cos(lat0)
    xmin, xmax = pts[:, 0].min() * sx, pts[:, 0].max() * sx
    ymin, ymax = pts[:, 1].min(), pts[:, 1].max()
    box_w, box_h = 700, 470
    scale = min(box_w / max(xmax - xmin, 1e-12), box_h / max(ymax - ymin, 1e-12))
    ox = 20 + (box_w - (xmax - xmin) * scale) / 2
    oy = 50 + (box_h - (ymax - ymin) * scale) / 2

    def project(lon, lat):
        return ox + (lon * sx - xmin) * scale, oy + (ymax - lat) * scale

    present = [values[c] for c, _ in shapes if c in values]
    vmin = min(present) if present else 0.0
    vmax = max(present) if present else 0.0
    span = vmax - vmin

    root = _root(title)
    regions = ET.SubElement(root, "g", {"class": "regions"})
    for code, polys in shapes:
        if code in values:
            fill = _mix((values[code] - vmin) / span if span > 0 else 0.0)
        else:
            fill = NEUTRAL
        group = ET.SubElement(regions, "g", {"class": "department", "data-code": code, "fill": fill})
        if code in values:
            ET.SubElement(group, "title").text = f"{code}: {values[code]:g}"
        for poly in polys:
            d = " ".join(
                "M" + " L".join(f"{_num(x)},{_num(y)}" for x, y in (project(*p) for p in ring)) + " Z" for ring in poly
            )
            ET.SubElement(group, "path", {"d": d, "stroke": "#ffffff", "stroke-width": "0.5", "fill-rule": "evenodd"})

    defs = ET.SubElement(root, "defs")
    grad = ET.SubElement(defs, "linearGradient", {"id": "scale", "x1": "0", "y1": "1", "x2": "0", "y2": "0"})
    ET.SubElement(grad, "stop", {"offset": "0", "stop-color": _mix(0.0)})
    ET.SubElement(grad, "stop", {"offset": "1", "stop-color": _mix(1.0)})
    legend = ET.SubElement(root, "g", {"class": "legend"})
    lx, ly, lh = 800, 120, 300
    ET.SubElement(legend, "rect", {"x": str(lx), "y": str(ly), "width": "20", "height": str(lh), "fill": "url(#scale)", "stroke": "#555555"})
    for frac, v in ((0.0, vmin), (0.5, (vmin + vmax) / 2), (1.0, vmax)):
        yy = ly + lh * (1 - frac)
        _line(legend, lx + 20, yy, lx + 26, yy)
        _text(legend, lx + 30, yy + 4, f"{v:,.6g}", size=10)
    _text(legend, lx, ly - 12, value_field.replace("_", " "), size=11)
    return to_string(root)
