#!/usr/bin/env python3
"""Rasterize a TrueType font into the plain-text .pwf bitmap format used by
the stimulus renderer. Coverage is thresholded at 0.5, so the output is a
binary mask per glyph (printable ASCII only)."""

import argparse

from PIL import Image, ImageDraw, ImageFont


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("ttf")
    ap.add_argument("out")
    ap.add_argument("--size", type=int, default=52)
    ap.add_argument("--family", default="DejaVu Sans Bold")
    args = ap.parse_args()

    font = ImageFont.truetype(args.ttf, args.size)
    ascent, descent = font.getmetrics()
    cell = ascent + descent

    lines = ["PWIFONT 1", f"family {args.family}", f"cell_height {cell}", f"baseline {ascent}"]
    for code in range(32, 127):
        ch = chr(code)
        advance = int(round(font.getlength(ch)))
        img = Image.new("L", (max(advance, 1) + 8, cell), 0)
        ImageDraw.Draw(img).text((0, 0), ch, font=font, fill=255)
        lines.append(f"glyph {code} {advance}")
        for y in range(cell):
            row = "".join("#" if img.getpixel((x, y)) >= 128 else "." for x in range(advance))
            lines.append(row if row else "-")
    with open(args.out, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
