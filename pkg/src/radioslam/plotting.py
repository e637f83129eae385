"""Static SVG rendering for trajectories and sweep grids.

SVGs are assembled from strings with fixed-precision coordinates, so a rerun
writes byte-identical files; no plotting library or font metrics involved.
"""

from __future__ import annotations

import io

import numpy as np

from .errors import DataError

# Fixed series palette: ground truth, odometry, then estimates.
GT_STYLE = ("#444444", "none")
ODOM_STYLE = ("#d62728", "6,4")
EST_STYLES = [("#1f77b4", "none"), ("#2ca02c", "none"), ("#9467bd", "none")]
AP_COLOR = "#bbbbbb"


def _f(v: float) -> str:
    return f"{float(v):.2f}"


class _Canvas:
    """World-to-pixel mapping with the y axis flipped for SVG."""

    def __init__(self, xmin, ymin, xmax, ymax, scale=8.0, margin=40.0):
        if xmax <= xmin or ymax <= ymin:
            raise DataError("degenerate plot bounds")
        self.xmin, self.ymin = xmin, ymin
        self.scale = scale
        self.margin = margin
        self.width = (xmax - xmin) * scale + 2 * margin
        self.height = (ymax - ymin) * scale + 2 * margin
        self.ymax = ymax

    def pt(self, x: float, y: float) -> tuple[float, float]:
        return (
            self.margin + (x - self.xmin) * self.scale,
            self.margin + (self.ymax - y) * self.scale,
        )


def _polyline(canvas: _Canvas, xy: np.ndarray, color: str, dash: str, width=1.5) -> str:
    pts = " ".join(
        "{},{}".format(*map(_f, canvas.pt(x, y))) for x, y in np.asarray(xy)[:, :2]
    )
    dash_attr = f' stroke-dasharray="{dash}"' if dash != "none" else ""
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
        f'{dash_attr} points="{pts}"/>'
    )


def trajectory_overlay(
    series: list[tuple[str, np.ndarray]],
    aps: np.ndarray | None = None,
    extent: tuple[float, float] | None = None,
    title: str = "",
) -> str:
    """Overlay named trajectories; first series is styled as ground truth,
    second as odometry, later ones as estimates.

    series: list of (label, (N, >=2) array); aps: (A, 2) marker positions.
    """
    if not series:
        raise DataError("trajectory_overlay needs at least one series")
    allxy = np.concatenate([np.asarray(s[1])[:, :2] for s in series], axis=0)
    if aps is not None and len(aps):
        allxy = np.concatenate([allxy, np.asarray(aps)[:, :2]], axis=0)
    if extent is not None:
        xmin, ymin, xmax, ymax = 0.0, 0.0, float(extent[0]), float(extent[1])
    else:
        xmin, ymin = allxy.min(axis=0)
        xmax, ymax = allxy.max(axis=0)
        pad = 0.05 * max(xmax - xmin, ymax - ymin, 1.0)
        xmin, ymin, xmax, ymax = xmin - pad, ymin - pad, xmax + pad, ymax + pad
    canvas = _Canvas(xmin, ymin, xmax, ymax)

    styles = [GT_STYLE, ODOM_STYLE] + EST_STYLES * 10
    buf = io.StringIO()
    buf.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(canvas.width)}" '
        f'height="{_f(canvas.height)}" '
        f'viewBox="0 0 {_f(canvas.width)} {_f(canvas.height)}">\n'
    )
    buf.write('<rect width="100%" height="100%" fill="white"/>\n')
    if aps is not None:
        for x, y in np.asarray(aps)[:, :2]:
            px, py = canvas.pt(x, y)
            buf.write(
                f'<circle cx="{_f(px)}" cy="{_f(py)}" r="3" fill="{AP_COLOR}"/>\n'
            )
    for (label, xy), (color, dash) in zip(series, styles):
        buf.write(_polyline(canvas, xy, color, dash))
        buf.write("\n")
    y = 20.0
    if title:
        buf.write(
            f'<text x="{_f(canvas.margin)}" y="{_f(y)}" font-family="monospace" '
            f'font-size="14">{title}</text>\n'
        )
        y += 18.0
    for (label, _), (color, dash) in zip(series, styles):
        x0 = canvas.margin
        dash_attr = f' stroke-dasharray="{dash}"' if dash != "none" else ""
        buf.write(
            f'<line x1="{_f(x0)}" y1="{_f(y - 4)}" x2="{_f(x0 + 24)}" '
            f'y2="{_f(y - 4)}" stroke="{color}" stroke-width="2"{dash_attr}/>'
            f'<text x="{_f(x0 + 30)}" y="{_f(y)}" font-family="monospace" '
            f'font-size="12">{label}</text>\n'
        )
        y += 16.0
    buf.write("</svg>\n")
    return buf.getvalue()


def _heat_color(t: float) -> str:
    """Two-segment blue-white-red ramp for t in [0, 1]."""
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        u = t / 0.5
        r, g, b = 59 + (245 - 59) * u, 76 + (245 - 76) * u, 192 + (245 - 192) * u
    else:
        u = (t - 0.5) / 0.5
        r, g, b = 245 + (180 - 245) * u, 245 + (4 - 245) * u, 245 + (38 - 245) * u
    return f"rgb({int(round(r))},{int(round(g))},{int(round(b))})"


def sweep_heatmap(result, measure: str, title: str = "") -> str:
    """Mean-error heatmap of one measure: nu_s rows, nu_p columns."""
    cells = [c for c in result.cells if c.measure == measure]
    if not cells:
        raise DataError(f"sweep contains no cells for measure {measure!r}")
    errs = [c.mean_err for c in cells]
    lo, hi = min(errs), max(errs)
    span = hi - lo if hi > lo else 1.0

    cell_w, cell_h = 72.0, 28.0
    left, top = 90.0, 60.0
    width = left + cell_w * len(result.nu_p_grid) + 20.0
    height = top + cell_h * len(result.nu_s_grid) + 30.0
    buf = io.StringIO()
    buf.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" '
        f'height="{_f(height)}" viewBox="0 0 {_f(width)} {_f(height)}">\n'
    )
    buf.write('<rect width="100%" height="100%" fill="white"/>\n')
    buf.write(
        f'<text x="10" y="24" font-family="monospace" font-size="14">'
        f"{title or measure}</text>\n"
    )
    for col, nu_p in enumerate(result.nu_p_grid):
        x = left + cell_w * (col + 0.5)
        buf.write(
            f'<text x="{_f(x)}" y="{_f(top - 8)}" text-anchor="middle" '
            f'font-family="monospace" font-size="11">nu_p={nu_p:g}</text>\n'
        )
    for row, nu_s in enumerate(result.nu_s_grid):
        yc = top + cell_h * (row + 0.65)
        buf.write(
            f'<text x="{_f(left - 8)}" y="{_f(yc)}" text-anchor="end" '
            f'font-family="monospace" font-size="11">nu_s={nu_s:g}</text>\n'
        )
        for col, nu_p in enumerate(result.nu_p_grid):
            c = result.cell(measure, nu_s, nu_p)
            x = left + cell_w * col
            yr = top + cell_h * row
            fill = _heat_color((c.mean_err - lo) / span)
            buf.write(
                f'<rect x="{_f(x)}" y="{_f(yr)}" width="{_f(cell_w)}" '
                f'height="{_f(cell_h)}" fill="{fill}" stroke="#888"/>\n'
            )
            label = f"{c.mean_err:.2f}" + ("" if c.converged else "*")
            buf.write(
                f'<text x="{_f(x + cell_w / 2)}" y="{_f(yr + cell_h * 0.65)}" '
                f'text-anchor="middle" font-family="monospace" font-size="11">'
                f"{label}</text>\n"
            )
    buf.write("</svg>\n")
    return buf.getvalue()


def save_svg(path, content: str) -> None:
    with open(path, "w", newline="") as f:
        f.write(content)
