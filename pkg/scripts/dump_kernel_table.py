"""
Kernel table export: writes G_alpha(t, r) (or a derivative along a ray) as a
two-column CSV (r, value) for offline plotting. Radial quadratures are cached
in output/.kernel_cache.db, so repeated exports are cheap.

Run with:
    PYTHONPATH=. python scripts/dump_kernel_table.py --alpha 1.0 --t 1.0 --r-max 40 --points 81
"""

import argparse
import os
import sys

import numpy as np
from dotenv import load_dotenv

load_dotenv()

from src.core.cache import SQLiteCache  # noqa: E402
from src.core.logger import logger  # noqa: E402
from src.models.datatypes import KernelSpec  # noqa: E402
from src.numerics.kernel import kernel_table  # noqa: E402
from src.pipeline.reports import FLOAT_FORMAT  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description="Export a fractional heat kernel table.")
    parser.add_argument("--alpha", type=float, default=1.0)
    parser.add_argument("--t", type=float, default=1.0)
    parser.add_argument("--beta", type=int, nargs=2, default=(0, 0), metavar=("B1", "B2"))
    parser.add_argument("--angle", type=float, default=0.0, help="ray angle for derivative kernels")
    parser.add_argument("--r-max", type=float, default=None, help="default 16 t**(1/alpha)")
    parser.add_argument("--points", type=int, default=65)
    parser.add_argument("--log", action="store_true", help="geometric radii from r_max/1000")
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    try:
        spec = KernelSpec(args.alpha, args.t, tuple(args.beta))
    except ValueError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1

    r_max = args.r_max or 16.0 * args.t ** (1.0 / args.alpha)
    if args.log:
        radii = np.geomspace(r_max / 1000.0, r_max, args.points)
    else:
        radii = np.linspace(0.0, r_max, args.points)

    out = args.out or os.path.join(
        os.getenv("QGDECAY_OUTPUT_ROOT", "output"),
        f"kernel_a{args.alpha:g}_t{args.t:g}_b{args.beta[0]}{args.beta[1]}.csv",
    )
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    table = kernel_table(spec, radii, args.angle, cache=SQLiteCache())
    table.to_csv(out, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"dump_kernel_table: {len(table)} rows -> {out}")
    print(f"Saved {len(table)} rows to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
