"""Text rendering of the (1/p, lambda) region map, one character per cell.

    python scripts/phase_map.py [--grid 40]
"""

import argparse

from ellipsec.experiments import emit_plotdata

GLYPH = {"useless": ".", "below_threshold": "-", "boundary": "|", "above_threshold": "#", "open_case": "?"}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=40)
    args = ap.parse_args()
    t = emit_plotdata(None, "phase_diagram", grid=args.grid)
    cells = {(r["inv_p"], r["lambda"]): r["region"] for r in t.rows}
    xs = sorted({k[0] for k in cells})
    ls = sorted({k[1] for k in cells}, reverse=True)
    for lam in ls:
        print(f"{lam:5.2f} " + "".join(GLYPH.get(cells[(x, lam)], " ") for x in xs))
    print("      1/p ->  " + "  ".join(f"{k}={v}" for k, v in GLYPH.items()))


if __name__ == "__main__":
    main()
