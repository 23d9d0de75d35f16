"""SVG allocation maps: one square per grid cell, coloured by crop category."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

from .model import CropCategory, Plan, PlanningInstance

CELL = 22
MARGIN = 10
LEGEND_ROW = 18
FALLOW_COLOR = "#e9e5dc"
PALETTE = {
    CropCategory.CEREAL: "#d9a82e",
    CropCategory.LEGUME: "#3f8f46",
    CropCategory.VEGETABLE: "#c8553d",
    CropCategory.FUNGUS: "#7b5ea7",
}
LEGEND = [(cat.value, PALETTE[cat]) for cat in CropCategory] + [("fallow", FALLOW_COLOR)]


def cell_color(plan: Plan, instance: PlanningInstance, unit_id: str, period: int) -> str:
    cid = plan.crop_at(unit_id, period)
    return FALLOW_COLOR if cid is None else PALETTE[instance.crop(cid).category]


def render_svg(plan: Plan, instance: PlanningInstance, period: int) -> str:
    if not 1 <= period <= instance.horizon:
        raise ValueError(f"period {period} outside 1..{instance.horizon}")
    cells = [rc for u in instance.units for rc in u.cells]
    r0 = min(r for r, _ in cells)
    c0 = min(c for _, c in cells)
    rows = max(r for r, _ in cells) - r0 + 1
    cols = max(c for _, c in cells) - c0 + 1
    map_w, map_h = cols * CELL, rows * CELL
    legend_y = MARGIN * 2 + map_h + 14
    width = max(map_w + 2 * MARGIN, 320)
    height = legend_y + LEGEND_ROW * len(LEGEND) + MARGIN

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="9">',
        f'<title>{escape(instance.name)}: period {period}</title>',
        '<g id="cells" stroke="#ffffff" stroke-width="1">',
    ]
    for u in instance.units:
        cid = plan.crop_at(u.id, period)
        color = cell_color(plan, instance, u.id, period)
        label = escape(f"{u.id}: {cid or 'fallow'}")
        for r, c in sorted(u.cells):
            x = MARGIN + (c - c0) * CELL
            y = MARGIN + (r - r0) * CELL
            out.append(
                f'<rect class="cell" data-unit="{escape(u.id)}" x="{x}" y="{y}" width="{CELL}" '
                f'height="{CELL}" fill="{color}"><title>{label}</title></rect>'
            )
    out.append("</g>")
    out.append('<g id="labels" fill="#1e1e1e">')
    for u in instance.units:
        r, c = min(u.cells)
        x = MARGIN + (c - c0) * CELL + 2
        y = MARGIN + (r - r0) * CELL + 10
        out.append(f'<text x="{x}" y="{y}">{escape(u.id)}</text>')
    out.append("</g>")
    out.append(f'<g id="legend"><text x="{MARGIN}" y="{legend_y - 4}" font-size="11">period {period}</text>')
    for k, (name, color) in enumerate(LEGEND):
        y = legend_y + k * LEGEND_ROW
        out.append(f'<rect class="legend" x="{MARGIN}" y="{y}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{MARGIN + 18}" y="{y + 10}" font-size="11">{name}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_map(plan: Plan, instance: PlanningInstance, period: int, path) -> Path:
    path = Path(path)
    path.write_text(render_svg(plan, instance, period), encoding="utf-8")
    return path
