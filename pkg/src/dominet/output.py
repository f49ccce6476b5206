"""Report writers: atomic, schema-versioned JSON/CSV plus hand-built SVG charts."""

from __future__ import annotations

import json
import os
import tempfile

SCHEMA_VERSION = 1


def _atomic_write(path, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, record: dict):
    body = {"schema_version": SCHEMA_VERSION, **record}
    _atomic_write(path, json.dumps(body, indent=2, sort_keys=True) + "\n")


def write_csv(path, header: list[str], rows: list[list]):
    lines = [f"# schema_version={SCHEMA_VERSION}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def svg_line_chart(xs, ys, title: str, x_label: str = "", y_label: str = "",
                   width: int = 640, height: int = 400) -> str:
    """A single polyline on plain axes; no external plotting dependency."""
    margin = 50
    iw, ih = width - 2 * margin, height - 2 * margin
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    xspan = (xmax - xmin) or 1.0
    yspan = (ymax - ymin) or 1.0

    def px(x):
        return margin + (x - xmin) / xspan * iw

    def py(y):
        return margin + ih - (y - ymin) / yspan * ih

    points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f"<!-- schema_version={SCHEMA_VERSION} -->",
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{margin + ih}" x2="{margin + iw}" y2="{margin + ih}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{margin + ih}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" font-size="11">{x_label}</text>',
        f'<text x="14" y="{height / 2:.0f}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {height / 2:.0f})">{y_label}</text>',
        f'<text x="{margin}" y="{margin + ih + 16}" font-size="10">{xmin:.4g}</text>',
        f'<text x="{margin + iw}" y="{margin + ih + 16}" text-anchor="end" font-size="10">{xmax:.4g}</text>',
        f'<text x="{margin - 4}" y="{margin + ih}" text-anchor="end" font-size="10">{ymin:.4g}</text>',
        f'<text x="{margin - 4}" y="{margin + 10}" text-anchor="end" font-size="10">{ymax:.4g}</text>',
        f'<polyline points="{points}" fill="none" stroke="steelblue" stroke-width="1.5"/>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def write_svg(path, svg_text: str):
    _atomic_write(path, svg_text)
