"""Static SVG rendering of a scenario map with overlaid trajectories."""

from __future__ import annotations

from .robustness import TeamTrajectory
from .scenario import ScenarioConfig

_PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#8c564b", "#9467bd",
    "#17becf", "#bcbd22", "#e377c2", "#7f7f7f", "#aec7e8", "#ffbb78",
    "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#dbdb8d",
    "#9edae5", "#393b79", "#637939",
]

_REGION_FILL = {"default": "#d0d7e2"}


def _num(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def scenario_svg(config: ScenarioConfig, team: TeamTrajectory, size: int = 520) -> str:
    """Regions as outlined shapes, trajectories as marked polylines."""
    (wx0, wy0), (wx1, wy1) = config.workspace.min, config.workspace.max
    margin = 30.0
    span = max(wx1 - wx0, wy1 - wy0)
    scale = (size - 2 * margin) / span

    def sx(x: float) -> float:
        return margin + (x - wx0) * scale

    def sy(y: float) -> float:
        return size - margin - (y - wy0) * scale

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
        f'<rect x="{_num(sx(wx0))}" y="{_num(sy(wy1))}" '
        f'width="{_num((wx1 - wx0) * scale)}" height="{_num((wy1 - wy0) * scale)}" '
        f'fill="none" stroke="#333333" stroke-width="1.5"/>',
    ]

    for name in sorted(config.regions):
        spec = config.regions[name]
        if spec.kind == "rect":
            (x0, y0), (x1, y1) = spec.min, spec.max
            parts.append(
                f'<rect x="{_num(sx(x0))}" y="{_num(sy(y1))}" '
                f'width="{_num((x1 - x0) * scale)}" height="{_num((y1 - y0) * scale)}" '
                f'fill="{_REGION_FILL["default"]}" fill-opacity="0.45" '
                f'stroke="#5b6b84" stroke-width="1"/>'
            )
            cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
        elif spec.kind == "circle":
            parts.append(
                f'<circle cx="{_num(sx(spec.center[0]))}" cy="{_num(sy(spec.center[1]))}" '
                f'r="{_num(spec.radius * scale)}" fill="{_REGION_FILL["default"]}" '
                f'fill-opacity="0.45" stroke="#5b6b84" stroke-width="1"/>'
            )
            cx, cy = spec.center
        else:
            continue  # unions are drawn through their members
        parts.append(
            f'<text x="{_num(sx(cx))}" y="{_num(sy(cy))}" font-size="12" '
            f'font-family="sans-serif" fill="#33415c" text-anchor="middle">{name}</text>'
        )

    for j, entry in enumerate(team.entries):
        color = _PALETTE[j % len(_PALETTE)]
        points = " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in entry.positions)
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" '
            f'stroke-width="1.6" stroke-opacity="0.9"/>'
        )
        for t, (x, y) in enumerate(entry.positions):
            r = 3.2 if t == 0 else 1.7
            parts.append(
                f'<circle cx="{_num(sx(x))}" cy="{_num(sy(y))}" r="{r}" '
                f'fill="{color}" fill-opacity="0.9"/>'
            )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
