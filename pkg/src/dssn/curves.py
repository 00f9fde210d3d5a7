"""Certified-accuracy curves, their max envelope, and a small SVG line plot."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from xml.sax.saxutils import escape

from .harness import CertRow

__all__ = ["CurvePoint", "parse_radii", "curve", "envelope", "format_curve", "render_svg"]


@dataclass(frozen=True)
class CurvePoint:
    radius: Fraction
    certified: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.certified / self.total if self.total else 0.0


def parse_radii(text: str) -> list[Fraction]:
    """``"0,0.5,1"`` or ``"start:stop:step"`` (inclusive), as exact fractions."""
    text = text.strip()
    if not text:
        raise ValueError("empty radius grid")
    if ":" in text:
        start, stop, step = (Fraction(t) for t in text.split(":"))
        if step <= 0:
            raise ValueError("radius step must be positive")
        out, r = [], start
        while r <= stop:
            out.append(r)
            r += step
    else:
        out = [Fraction(t) for t in text.split(",") if t.strip()]
    if not out:
        raise ValueError("empty radius grid")
    return sorted(set(out))


def curve(rows: list[CertRow], radii) -> list[CurvePoint]:
    """Fraction of points predicted correctly with a certificate of at least ``rho``.

    Abstentions and misclassifications never count; exact radii compare
    inclusively (radius == rho certifies at rho).
    """
    radii = [Fraction(r) for r in radii]
    if not radii:
        raise ValueError("empty radius grid")
    total = len(rows)
    return [CurvePoint(r, sum(row.certified_at(r) for row in rows), total) for r in sorted(radii)]


def envelope(curves: list[list[CurvePoint]]) -> list[CurvePoint]:
    """Pointwise best certified accuracy across curves on a shared radius grid."""
    if not curves:
        raise ValueError("no curves")
    grid = [p.radius for p in curves[0]]
    if any([p.radius for p in c] != grid for c in curves):
        raise ValueError("curves must share a radius grid")
    out = []
    for k, r in enumerate(grid):
        best = max((c[k] for c in curves), key=lambda p: Fraction(p.certified, p.total or 1))
        out.append(CurvePoint(r, best.certified, best.total))
    return out


def format_curve(points: list[CurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["radius", "certified", "total", "certified_accuracy"])
    for p in points:
        w.writerow([f"{float(p.radius):g}", p.certified, p.total, f"{p.accuracy:.6f}"])
    return buf.getvalue()


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def render_svg(series: dict[str, list[CurvePoint]], title: str = "certified accuracy",
               width: int = 480, height: int = 320) -> str:
    """Step plot of certified accuracy against radius, no plotting dependency."""
    ml, mr, mt, mb = 56, 16, 28, 44
    pw, ph = width - ml - mr, height - mt - mb
    rmax = max((float(p.radius) for pts in series.values() for p in pts), default=1.0) or 1.0

    def sx(r):
        return ml + pw * float(r) / rmax

    def sy(a):
        return mt + ph * (1 - a)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>',
             f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
             f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>']
    for k in range(6):
        a = k / 5
        parts.append(f'<line x1="{ml - 4}" y1="{sy(a):.1f}" x2="{ml}" y2="{sy(a):.1f}" stroke="black"/>')
        parts.append(f'<text x="{ml - 6}" y="{sy(a) + 4:.1f}" text-anchor="end">{a:.1f}</text>')
        r = rmax * k / 5
        parts.append(f'<line x1="{sx(r):.1f}" y1="{mt + ph}" x2="{sx(r):.1f}" y2="{mt + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{sx(r):.1f}" y="{mt + ph + 16}" text-anchor="middle">{r:g}</text>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">l1 radius</text>')
    for k, (name, pts) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        path = []
        for i, p in enumerate(pts):
            if i:
                path.append(f"{sx(p.radius):.1f},{sy(pts[i - 1].accuracy):.1f}")
            path.append(f"{sx(p.radius):.1f},{sy(p.accuracy):.1f}")
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(path)}"/>')
        ly = mt + 12 + 14 * k
        parts.append(f'<line x1="{ml + pw - 120}" y1="{ly}" x2="{ml + pw - 104}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{ml + pw - 100}" y="{ly + 4}">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
