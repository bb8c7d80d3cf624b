"""Regenerates pillow_filters.txt: random RGB rasters and Pillow's output for
the four built-in 3x3 filters. Each block is

    image <w> <h> <hex pixels>
    <filter> <hex pixels>   (x4)
"""
import random

from PIL import Image, ImageFilter

FILTERS = [
    ("contour", ImageFilter.CONTOUR),
    ("edge-enhance-more", ImageFilter.EDGE_ENHANCE_MORE),
    ("find-edges", ImageFilter.FIND_EDGES),
    ("sharpen", ImageFilter.SHARPEN),
]

rng = random.Random(20240617)
lines = []
for w, h in [(5, 5), (8, 8), (8, 8), (8, 8), (11, 7), (3, 3)]:
    data = bytes(rng.randrange(256) for _ in range(w * h * 3))
    img = Image.frombytes("RGB", (w, h), data)
    lines.append(f"image {w} {h} {data.hex()}")
    for name, f in FILTERS:
        lines.append(f"{name} {img.filter(f).tobytes().hex()}")

with open(__file__.replace("make_pillow_filters.py", "pillow_filters.txt"), "w") as out:
    out.write("\n".join(lines) + "\n")
