"""Layout session: resize and zoom a handful of boxes."""
from shapes.rect import Rect

SIZES = [(4.0, 3.0), (4.0, 7.0), (10.0, 10.0), (0.0, 5.0), (4.0, 3.0)]
ZOOMS = [0.5, 2.0, -0.0, 0.0, 1.0, float("nan"), -1.0, 0.5, float("nan")]

for w, h in SIZES:
    box = Rect()
    box.resize(w, h)
    for z in ZOOMS:
        box.scale(z)
print("laid out", len(SIZES), "boxes")
