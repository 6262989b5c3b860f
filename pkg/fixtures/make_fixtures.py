#!/usr/bin/env python3
"""Regenerate the field CSVs referenced by the shipped scenario files.

Run from the repository root:  python3 fixtures/make_fixtures.py
"""

from pathlib import Path

import numpy as np

from denseroute import Grid, ScalarField, write_field

HERE = Path(__file__).parent


def smooth(grid, fn):
    return ScalarField.from_function(grid, fn)


def main():
    # hjb: gently varying congestion-independent costs on 16x16
    g16 = Grid(a=1.0, b=1.0, nx=16, ny=16)
    write_field(smooth(g16, lambda x1, x2: 1.0 + 0.4 * np.sin(2.1 * x1) * np.cos(1.3 * x2)),
                HERE / "hjb_c1.csv")
    write_field(smooth(g16, lambda x1, x2: 1.2 + 0.3 * np.cos(1.7 * x1 + 0.5) * np.sin(2.4 * x2)),
                HERE / "hjb_c2.csv")

    # geometry + dense-sim: attractor pair (curl gap x1 - x2, diagonal curve)
    for n, stem in ((32, "geom"), (96, "sim")):
        g = Grid(a=1.0, b=1.0, nx=n, ny=n)
        write_field(smooth(g, lambda x1, x2: 0.5 * x2 ** 2 + 0.2), HERE / f"{stem}_c1.csv")
        write_field(smooth(g, lambda x1, x2: 0.5 * x1 ** 2 + 0.2), HERE / f"{stem}_c2.csv")

    print("fixture fields written to", HERE)


if __name__ == "__main__":
    main()
