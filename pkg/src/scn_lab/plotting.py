"""Minimal SVG line plots for learning curves: mean line per variant with a
shaded +-std band, no plotting library required."""
from __future__ import annotations

import numpy as np

WIDTH, HEIGHT = 840, 520
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 36, 56
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min(s for s in (1 * mag, 2 * mag, 5 * mag, 10 * mag) if s >= raw)
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + step * 0.5, step)]


def _fmt_num(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 10000 or abs(v) < 0.01:
        return f"{v:.3g}"
    return f"{v:g}"


class SvgPlot:
    """Accumulates (label, x, mean, std) series and renders an SVG string."""

    def __init__(self, title: str = "", x_label: str = "timesteps",
                 y_label: str = "episodic reward"):
        self.title = title
        self.x_label = x_label
        self.y_label = y_label
        self.series: list[tuple[str, np.ndarray, np.ndarray, np.ndarray | None]] = []

    def add(self, label: str, x, mean, std=None) -> None:
        x = np.asarray(x, dtype=np.float64)
        mean = np.asarray(mean, dtype=np.float64)
        if std is not None:
            std = np.asarray(std, dtype=np.float64)
        self.series.append((label, x, mean, std))

    def _bounds(self):
        xs = np.concatenate([s[1] for s in self.series])
        lo_parts, hi_parts = [], []
        for _, _, mean, std in self.series:
            lo_parts.append(mean - (std if std is not None else 0))
            hi_parts.append(mean + (std if std is not None else 0))
        ys_lo = float(np.min([np.min(p) for p in lo_parts]))
        ys_hi = float(np.max([np.max(p) for p in hi_parts]))
        if ys_hi == ys_lo:
            ys_hi += 1.0
            ys_lo -= 1.0
        x_lo, x_hi = float(xs.min()), float(xs.max())
        if x_hi == x_lo:
            x_hi += 1.0
        return x_lo, x_hi, ys_lo, ys_hi

    def render(self) -> str:
        if not self.series:
            raise ValueError("plot has no series")
        x_lo, x_hi, y_lo, y_hi = self._bounds()
        pw = WIDTH - MARGIN_L - MARGIN_R
        ph = HEIGHT - MARGIN_T - MARGIN_B

        def sx(x):
            return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw

        def sy(y):
            return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * ph

        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        ]
        if self.title:
            parts.append(
                f'<text x="{WIDTH/2:.1f}" y="22" text-anchor="middle" '
                f'font-family="sans-serif" font-size="15">{self.title}</text>'
            )
        # axes box and ticks
        parts.append(
            f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
            f'fill="none" stroke="#444" stroke-width="1"/>'
        )
        for tx in _ticks(x_lo, x_hi):
            px = sx(tx)
            parts.append(f'<line x1="{px:.1f}" y1="{MARGIN_T+ph}" x2="{px:.1f}" '
                         f'y2="{MARGIN_T+ph+5}" stroke="#444"/>')
            parts.append(f'<text x="{px:.1f}" y="{MARGIN_T+ph+20}" text-anchor="middle" '
                         f'font-family="sans-serif" font-size="11">{_fmt_num(tx)}</text>')
        for ty in _ticks(y_lo, y_hi):
            py = sy(ty)
            parts.append(f'<line x1="{MARGIN_L-5}" y1="{py:.1f}" x2="{MARGIN_L}" '
                         f'y2="{py:.1f}" stroke="#444"/>')
            parts.append(f'<text x="{MARGIN_L-8}" y="{py+4:.1f}" text-anchor="end" '
                         f'font-family="sans-serif" font-size="11">{_fmt_num(ty)}</text>')
        parts.append(f'<text x="{MARGIN_L+pw/2:.1f}" y="{HEIGHT-14}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="13">{self.x_label}</text>')
        parts.append(f'<text x="18" y="{MARGIN_T+ph/2:.1f}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="13" '
                     f'transform="rotate(-90 18 {MARGIN_T+ph/2:.1f})">{self.y_label}</text>')

        for i, (label, x, mean, std) in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            if std is not None and np.any(std > 0):
                upper = [f"{sx(px):.2f},{sy(pm + ps):.2f}" for px, pm, ps in zip(x, mean, std)]
                lower = [f"{sx(px):.2f},{sy(pm - ps):.2f}"
                         for px, pm, ps in zip(x[::-1], mean[::-1], std[::-1])]
                parts.append(f'<path d="M {" L ".join(upper + lower)} Z" fill="{color}" '
                             f'fill-opacity="0.18" stroke="none"/>')
            pts = " ".join(f"{sx(px):.2f},{sy(pm):.2f}" for px, pm in zip(x, mean))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                         f'stroke-width="1.8"/>')
            ly = MARGIN_T + 16 + 16 * i
            parts.append(f'<line x1="{MARGIN_L+pw-150}" y1="{ly-4}" x2="{MARGIN_L+pw-122}" '
                         f'y2="{ly-4}" stroke="{color}" stroke-width="2.5"/>')
            parts.append(f'<text x="{MARGIN_L+pw-116}" y="{ly}" font-family="sans-serif" '
                         f'font-size="12">{label}</text>')
        parts.append("</svg>")
        return "\n".join(parts)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())
