#!/usr/bin/env python3
"""Regenerates the bundled urban model fixtures.

Layouts are synthetic: only the ground dimensions, building counts and
tallest-building heights follow the published benchmark table. Output is
deterministic for a fixed script version.
"""
import json
import random
from pathlib import Path

MODELS = [
    # name, width, length, count, max height, min height, block fill range, street gap, seed
    ("high_dense", 50.96, 39.33, 27, 29.50, 12.0, (0.6, 0.95), 2.0, 11),
    ("high_sparse", 56.25, 53.03, 16, 14.25, 6.0, (0.4, 0.7), 4.0, 12),
    ("low_dense", 64.26, 53.80, 79, 12.5, 3.0, (0.6, 0.95), 1.5, 13),
    ("low_sparse", 96.67, 62.92, 23, 7.2, 2.5, (0.3, 0.6), 6.0, 14),
]


def generate(name, w, l, count, hmax, hmin, fill, gap, seed):
    """Jittered block grid: one building per chosen block, streets of at least `gap`."""
    rng = random.Random(seed)
    cols = 1
    while True:
        rows = max(1, round(cols * l / w))
        if cols * rows >= count * 1.25:
            break
        cols += 1
    bw_cell = (w - 2.0) / cols
    bl_cell = (l - 2.0) / rows
    cells = rng.sample([(i, j) for j in range(rows) for i in range(cols)], count)
    cells.sort(key=lambda c: (c[1], c[0]))
    boxes = []
    for i, j in cells:
        room_x = bw_cell - gap
        room_y = bl_cell - gap
        bw = round(room_x * rng.uniform(*fill), 2)
        bl = round(room_y * rng.uniform(*fill), 2)
        x0 = round(1.0 + i * bw_cell + gap / 2 + rng.uniform(0.0, room_x - bw), 2)
        y0 = round(1.0 + j * bl_cell + gap / 2 + rng.uniform(0.0, room_y - bl), 2)
        boxes.append((x0, y0, round(x0 + bw, 2), round(y0 + bl, 2)))
    heights = [round(rng.uniform(hmin, hmax), 2) for _ in boxes]
    heights[rng.randrange(len(heights))] = hmax
    return {
        "name": name,
        "bounds": {"w": w, "l": l},
        "buildings": [
            {"x_min": b[0], "y_min": b[1], "x_max": b[2], "y_max": b[3], "height": h}
            for b, h in zip(boxes, heights)
        ],
    }


def main():
    out = Path(__file__).resolve().parent.parent / "data" / "models"
    out.mkdir(parents=True, exist_ok=True)
    for spec in MODELS:
        model = generate(*spec)
        (out / f"{spec[0]}.json").write_text(json.dumps(model, indent=2) + "\n")
        print(spec[0], len(model["buildings"]), max(b["height"] for b in model["buildings"]))


if __name__ == "__main__":
    main()
