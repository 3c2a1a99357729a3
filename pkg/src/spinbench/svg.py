"""Minimal deterministic SVG plotting: line plots, stem spectra, level diagrams.

No external plotting dependency; numbers are formatted with fixed
precision so repeated runs emit byte-identical files.
"""

from __future__ import annotations

import numpy as np

W, H = 640, 420
MARGIN = 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#17becf", "#7f7f7f")


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = float(min((m for m in (1, 2, 5, 10) if m * mag >= raw),
                     default=10) * mag)
    start = np.ceil(lo / step) * step
    return [float(start + k * step) for k in
            range(int(np.floor((hi - start) / step)) + 1)]


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str,
                 xlim: tuple[float, float], ylim: tuple[float, float]):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">',
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W // 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{title}</text>',
        ]
        self.xlim, self.ylim = xlim, ylim
        pad_x = (xlim[1] - xlim[0]) * 0.03 or 0.5
        pad_y = (ylim[1] - ylim[0]) * 0.06 or 0.5
        self.xlim = (xlim[0] - pad_x, xlim[1] + pad_x)
        self.ylim = (ylim[0] - pad_y, ylim[1] + pad_y)
        self._axes(xlabel, ylabel)

    def x(self, v: float) -> float:
        lo, hi = self.xlim
        return MARGIN + (v - lo) / (hi - lo) * (W - 2 * MARGIN)

    def y(self, v: float) -> float:
        lo, hi = self.ylim
        return H - MARGIN - (v - lo) / (hi - lo) * (H - 2 * MARGIN)

    def _axes(self, xlabel: str, ylabel: str):
        x0, y0 = MARGIN, H - MARGIN
        x1, y1 = W - MARGIN, MARGIN
        self.parts.append(
            f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
            f'fill="none" stroke="#333" stroke-width="1"/>')
        for tx in _ticks(*self.xlim):
            px = self.x(tx)
            self.parts.append(
                f'<line x1="{_fmt(px)}" y1="{y0}" x2="{_fmt(px)}" y2="{y0 + 5}" '
                f'stroke="#333"/>')
            self.parts.append(
                f'<text x="{_fmt(px)}" y="{y0 + 18}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">{tx:g}</text>')
        for ty in _ticks(*self.ylim):
            py = self.y(ty)
            self.parts.append(
                f'<line x1="{x0 - 5}" y1="{_fmt(py)}" x2="{x0}" y2="{_fmt(py)}" '
                f'stroke="#333"/>')
            self.parts.append(
                f'<text x="{x0 - 8}" y="{_fmt(py + 4)}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11">{ty:g}</text>')
        self.parts.append(
            f'<text x="{W // 2}" y="{H - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{xlabel}</text>')
        self.parts.append(
            f'<text x="16" y="{H // 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13" '
            f'transform="rotate(-90 16 {H // 2})">{ylabel}</text>')

    def polyline(self, xs, ys, color: str, label: str | None = None,
                 dash: bool = False):
        pts = " ".join(f"{_fmt(self.x(a))},{_fmt(self.y(b))}"
                       for a, b in zip(xs, ys))
        dash_attr = ' stroke-dasharray="5,3"' if dash else ""
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.6"{dash_attr}/>')

    def stem(self, xs, ys, color: str):
        y0 = self.y(max(self.ylim[0], 0.0))
        for a, b in zip(xs, ys):
            self.parts.append(
                f'<line x1="{_fmt(self.x(a))}" y1="{_fmt(y0)}" '
                f'x2="{_fmt(self.x(a))}" y2="{_fmt(self.y(b))}" '
                f'stroke="{color}" stroke-width="1.4"/>')

    def legend(self, labels_colors: list[tuple[str, str]]):
        x = W - MARGIN - 150
        y = MARGIN + 14
        for k, (label, color) in enumerate(labels_colors):
            yy = y + 16 * k
            self.parts.append(
                f'<line x1="{x}" y1="{yy - 4}" x2="{x + 22}" y2="{yy - 4}" '
                f'stroke="{color}" stroke-width="2"/>')
            self.parts.append(
                f'<text x="{x + 28}" y="{yy}" font-family="sans-serif" '
                f'font-size="11">{label}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_plot(curves: list[tuple[np.ndarray, np.ndarray, str]], title: str,
              xlabel: str, ylabel: str) -> str:
    """curves: list of (x, y, label)."""
    all_x = np.concatenate([c[0] for c in curves])
    all_y = np.concatenate([c[1] for c in curves])
    cv = _Canvas(title, xlabel, ylabel,
                 (float(all_x.min()), float(all_x.max())),
                 (float(all_y.min()), float(all_y.max())))
    legend = []
    for k, (xs, ys, label) in enumerate(curves):
        color = PALETTE[k % len(PALETTE)]
        cv.polyline(xs, ys, color)
        legend.append((label, color))
    cv.legend(legend)
    return cv.render()


def spectrum_plot(curves: list[tuple[np.ndarray, np.ndarray, str]],
                  title: str) -> str:
    return line_plot(curves, title, "omega", "S(omega)")


def level_diagram(levels: list[tuple[float, int, float | None]],
                  title: str) -> str:
    """Horizontal bars per level, offset by multiplet index, colored by S."""
    e0 = levels[0][0]
    exc = [(e - e0, d, s) for e, d, s in levels]
    top = max(x for x, _, _ in exc) or 1.0
    cv = _Canvas(title, "", "excitation energy", (0.0, 1.0), (0.0, top))
    spin_colors = {}
    legend = []
    for x, d, s in exc:
        if s not in spin_colors:
            color = PALETTE[len(spin_colors) % len(PALETTE)]
            spin_colors[s] = color
            name = f"S={s:g}" if s is not None else "unlabeled"
            legend.append((name, color))
        color = spin_colors[s]
        width = 0.12
        for k in range(d):
            cx = 0.2 + 0.16 * k
            cv.parts.append(
                f'<line x1="{_fmt(cv.x(cx))}" y1="{_fmt(cv.y(x))}" '
                f'x2="{_fmt(cv.x(cx + width))}" y2="{_fmt(cv.y(x))}" '
                f'stroke="{color}" stroke-width="2.2"/>')
    cv.legend(legend)
    return cv.render()
