"""Writes the golden screenshots of the demo app's launch screen.

Independent of the Rust renderer: widget geometry is copied by hand from
corpus/demo-app/layouts/Main.layout and the raster rules are re-stated here.
Run from this directory: python3 make_golden.py
"""

W, H = 270, 480
BG = (245, 245, 245)
BORDER = (0, 0, 0)
RED = (234, 67, 53)
BUTTON = (66, 133, 244)
CHECKBOX = (52, 168, 83)

# Launch screen of Main, ordered by component id; btnCrash is hidden.
WIDGETS = [
    ("btnCrash", BUTTON, (20, 170, 230, 48), False),
    ("btnGo", BUTTON, (20, 40, 230, 48), True),
    ("chkOpt", CHECKBOX, (20, 110, 230, 40), True),
]


def render(highlight=None):
    px = [[BG] * W for _ in range(H)]
    for _, color, (x, y, w, h), visible in WIDGETS:
        if not visible:
            continue
        for yy in range(y, y + h):
            for xx in range(x, x + w):
                edge = xx in (x, x + w - 1) or yy in (y, y + h - 1)
                px[yy][xx] = BORDER if edge else color
    if highlight:
        (x, y, w, h) = next(b for n, _, b, _ in WIDGETS if n == highlight)
        for yy in range(max(0, y - 3), min(H, y + h + 3)):
            for xx in range(max(0, x - 3), min(W, x + w + 3)):
                if not (x <= xx < x + w and y <= yy < y + h):
                    px[yy][xx] = RED
    lines = ["P3", f"{W} {H}", "255"]
    for row in px:
        lines.extend(f"{r} {g} {b}" for r, g, b in row)
    return ("\n".join(lines) + "\n").encode()


with open("demo_launch_full.ppm", "wb") as f:
    f.write(render())
with open("demo_launch_btnGo.ppm", "wb") as f:
    f.write(render("btnGo"))
