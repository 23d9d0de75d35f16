"""Synthetic high-mix village used as the reference case study.

The layout has 54 units totalling 1201 mu: 26 dry plots (6 flat, 14 terraced,
6 hillside), 8 irrigated plots, 16 standard and 4 smart greenhouses. The crop
library has 41 varieties in four categories. Horizon is 14 seasonal periods
(7 years, 2 seasons each). Economic values are regional-style placeholders,
jittered by the seed; they are not survey data.
"""

from __future__ import annotations

import numpy as np

from .model import Crop, CropCategory, InteractionMatrix, LandType, LandUnit, PlanningInstance

TOTAL_AREA = 1201.0
GREENHOUSE_AREA = 0.6
GRID_WIDTH = 18

DRY = (LandType.DRY_FLAT, LandType.DRY_TERRACE, LandType.DRY_HILLSIDE)
COVERED = (LandType.IRRIGATED, LandType.GREENHOUSE, LandType.SMART_GREENHOUSE)
HOUSES = (LandType.GREENHOUSE, LandType.SMART_GREENHOUSE)

L, G, V, F = CropCategory.LEGUME, CropCategory.CEREAL, CropCategory.VEGETABLE, CropCategory.FUNGUS

# id, category, yield kg/mu, price CNY/kg, cost CNY/mu, water m3/planting, replant interval, land
CROP_TABLE = [
    ("soybean", L, 400, 3.25, 400, 20, 2, DRY),
    ("black_bean", L, 500, 7.5, 400, 20, 2, DRY),
    ("red_bean", L, 400, 8.25, 350, 20, 2, DRY),
    ("mung_bean", L, 350, 7.0, 350, 20, 2, DRY),
    ("climbing_bean", L, 415, 6.75, 350, 20, 3, DRY),
    ("wheat", G, 800, 3.5, 450, 30, 2, DRY),
    ("corn", G, 1000, 3.0, 500, 30, 2, DRY),
    ("millet", G, 400, 8.25, 360, 25, 2, DRY),
    ("sorghum", G, 630, 6.0, 400, 25, 2, DRY),
    ("proso_millet", G, 525, 7.5, 360, 25, 2, DRY),
    ("buckwheat", G, 110, 40.0, 350, 20, 2, DRY),
    ("oats", G, 400, 6.0, 420, 25, 2, DRY),
    ("barley", G, 500, 4.8, 350, 25, 2, DRY),
    ("quinoa", G, 220, 16.0, 450, 20, 3, DRY),
    ("rye", G, 450, 5.2, 360, 25, 2, DRY),
    ("rice", G, 500, 7.0, 680, 120, 2, (LandType.IRRIGATED,)),
    ("cowpea", L, 3000, 7.0, 2000, 60, 2, COVERED),
    ("sword_bean", L, 2000, 8.0, 1000, 55, 2, COVERED),
    ("kidney_bean", L, 3000, 6.5, 2000, 60, 2, COVERED),
    ("potato", V, 2000, 3.5, 2000, 60, 3, COVERED),
    ("tomato", V, 2400, 6.5, 2000, 80, 3, COVERED),
    ("eggplant", V, 6400, 3.2, 2000, 80, 3, COVERED),
    ("spinach", V, 2700, 5.5, 2300, 50, 2, COVERED),
    ("bell_pepper", V, 2400, 5.2, 1600, 75, 3, COVERED),
    ("cabbage", V, 3300, 6.5, 3800, 70, 2, COVERED),
    ("cucumber", V, 3600, 7.0, 3900, 90, 3, COVERED),
    ("lettuce", V, 1800, 5.2, 1300, 45, 2, COVERED),
    ("chili", V, 1800, 7.0, 2000, 65, 3, COVERED),
    ("water_spinach", V, 2700, 4.6, 1600, 80, 2, COVERED),
    ("yellow_cucumber", V, 3600, 9.0, 4800, 85, 3, COVERED),
    ("celery", V, 2000, 5.6, 1600, 55, 2, COVERED),
    ("green_onion", V, 2200, 6.0, 1800, 50, 2, COVERED),
    ("zucchini", V, 3000, 4.5, 1900, 70, 2, COVERED),
    ("bitter_gourd", V, 2400, 6.8, 2200, 70, 3, COVERED),
    ("chinese_cabbage", V, 5000, 2.5, 2500, 60, 2, (LandType.IRRIGATED,)),
    ("white_radish", V, 4000, 2.5, 2000, 55, 2, (LandType.IRRIGATED,)),
    ("red_radish", V, 3000, 3.25, 2000, 55, 2, (LandType.IRRIGATED,)),
    ("shiitake", F, 5000, 19.0, 62000, 40, 2, HOUSES),
    ("oyster_mushroom", F, 4000, 22.0, 58000, 40, 2, HOUSES),
    ("king_oyster", F, 6000, 16.0, 66000, 45, 2, HOUSES),
    ("enoki", F, 4500, 18.0, 52000, 40, 2, HOUSES),
]

UNIT_COUNTS = {
    LandType.DRY_FLAT: 6,
    LandType.DRY_TERRACE: 14,
    LandType.DRY_HILLSIDE: 6,
    LandType.IRRIGATED: 8,
    LandType.GREENHOUSE: 16,
    LandType.SMART_GREENHOUSE: 4,
}
AREA_RANGES = {
    LandType.DRY_FLAT: (55.0, 90.0),
    LandType.DRY_TERRACE: (25.0, 80.0),
    LandType.DRY_HILLSIDE: (12.0, 30.0),
    LandType.IRRIGATED: (12.0, 30.0),
}
PREFIX = {
    LandType.DRY_FLAT: "A", LandType.DRY_TERRACE: "B", LandType.DRY_HILLSIDE: "C",
    LandType.IRRIGATED: "D", LandType.GREENHOUSE: "E", LandType.SMART_GREENHOUSE: "F",
}


def _areas(rng: np.random.Generator) -> dict[LandType, list[float]]:
    open_types = list(AREA_RANGES)
    raw = {t: rng.uniform(*AREA_RANGES[t], size=UNIT_COUNTS[t]) for t in open_types}
    covered = (UNIT_COUNTS[LandType.GREENHOUSE] + UNIT_COUNTS[LandType.SMART_GREENHOUSE]) * GREENHOUSE_AREA
    target = TOTAL_AREA - covered
    scale = target / sum(v.sum() for v in raw.values())
    areas = {t: [round(float(a * scale), 1) for a in raw[t]] for t in open_types}
    # absorb the rounding residue in the largest plot so the total is exact
    residue = round(target - sum(sum(v) for v in areas.values()), 1)
    flat = areas[LandType.DRY_FLAT]
    k = int(np.argmax(flat))
    flat[k] = round(flat[k] + residue, 1)
    for t in HOUSES:
        areas[t] = [GREENHOUSE_AREA] * UNIT_COUNTS[t]
    return areas


def _layout(cell_counts: list[tuple[str, int]], first_row: int) -> tuple[dict[str, set], int]:
    """Fill rows boustrophedon-style so every unit is a connected strip."""
    cells: dict[str, set] = {}
    row, col, step = first_row, 0, 1
    for uid, n in cell_counts:
        cells[uid] = set()
        for _ in range(n):
            cells[uid].add((row, col))
            col += step
            if col in (GRID_WIDTH, -1):
                row += 1
                step = -step
                col += step
    return cells, row + 1


def _interaction(crops: list[Crop], rng: np.random.Generator) -> np.ndarray:
    n = len(crops)
    m = np.zeros((n, n))
    dry = [DRY[0] in c.allowed_land_types for c in crops]
    for a, ca in enumerate(crops):
        for b, cb in enumerate(crops):
            if a == b:
                continue
            pair = {ca.category, cb.category}
            if pair == {L, G}:
                m[a, b] = rng.uniform(0.2, 0.4)  # nitrogen fixation benefits the partner
            elif pair == {L, V}:
                m[a, b] = rng.uniform(0.1, 0.25)
            elif pair == {F, V}:
                m[a, b] = rng.uniform(0.1, 0.3)  # spent substrate feeds neighbouring beds
            elif ca.category is cb.category and ca.category is not L and dry[a] == dry[b]:
                m[a, b] = -rng.uniform(0.05, 0.15)  # shared niche, competitive exclusion
    return m


def generate_case_study(seed: int = 1) -> PlanningInstance:
    rng = np.random.default_rng(seed)

    crops = []
    for cid, cat, y, p, k, w, tau, land in CROP_TABLE:
        jitter = rng.uniform(0.95, 1.05, size=3)
        yield_ = round(y * jitter[0], 1)
        crops.append(Crop(
            id=cid,
            category=cat,
            baseline_yield=yield_,
            baseline_price=round(p * jitter[1], 2),
            baseline_cost=round(k * jitter[2], 1),
            water_need=float(w),
            replant_interval=tau,
            allowed_land_types=frozenset(land),
            demand=round(yield_ * (120.0 if land == DRY else 6.0), 1),
        ))

    areas = _areas(rng)
    units: list[LandUnit] = []
    row = 0
    for zone in (DRY, (LandType.IRRIGATED,), HOUSES):
        plan = []
        for t in zone:
            for k, a in enumerate(areas[t]):
                plan.append((f"{PREFIX[t]}{k + 1}", t, a))
        counts = [(uid, 1 if t in HOUSES else max(2, round(a / 6))) for uid, t, a in plan]
        cells, row = _layout(counts, row)
        for uid, t, a in plan:
            gamma = round(float(rng.uniform(0.8, 1.2)), 3)
            units.append(LandUnit(
                id=uid,
                land_type=t,
                area=a,
                productivity_factor=gamma,
                fertility_level=int(np.clip(round((gamma - 0.8) / 0.1) + 1, 1, 5)),
                irrigated_flag=t is LandType.IRRIGATED,
                cells=frozenset(cells[uid]),
            ))

    horizon = 14
    irrigated_need = sum(max(c.water_need for c in crops if LandType.IRRIGATED in c.allowed_land_types)
                         for u in units if u.irrigated_flag)
    water = [round(0.75 * irrigated_need, 1)] * horizon

    history = {}
    for u in units:
        options = sorted(c.id for c in crops if u.land_type in c.allowed_land_types)
        history[u.id] = options[int(rng.integers(len(options)))]

    return PlanningInstance(
        units=tuple(units),
        crops=tuple(crops),
        interaction=InteractionMatrix(tuple(c.id for c in crops), _interaction(crops, rng)),
        horizon=horizon,
        water_limits=tuple(water),
        interaction_yield_gain=0.05,
        salvage_fraction=0.0,
        periods_per_year=2,
        history=history,
        name=f"case-study-{seed}",
    )
