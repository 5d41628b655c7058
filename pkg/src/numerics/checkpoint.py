"""Binary field dumps.

Layout: an ASCII header of ``key=value`` lines (``format``, ``n``, ``L``, ``t``,
``alpha``, ``endianness``) closed by a line ``END``, followed by ``n*n`` float64
physical values in row-major (C) order with the stated byte order.
"""

import sys
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from src.core.logger import logger
from src.models.datatypes import Field, GridSpec
from src.numerics import spectral

FORMAT_TAG = "qgdecay-checkpoint-1"


def write_checkpoint(theta: Field, t: float, alpha: float, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    order = sys.byteorder
    header = (
        f"format={FORMAT_TAG}\nn={theta.grid.n}\nL={theta.grid.box_length!r}\n"
        f"t={float(t)!r}\nalpha={float(alpha)!r}\nendianness={order}\nEND\n"
    )
    dtype = np.dtype("<f8" if order == "little" else ">f8")
    values = np.ascontiguousarray(spectral.as_physical(theta), dtype=dtype)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(values.tobytes(order="C"))
    logger.info(f"write_checkpoint: t={t:.6g} -> {path}")
    return path


def read_checkpoint(path: str | Path) -> Tuple[Field, Dict[str, float]]:
    """Return the stored field and its header (``t``, ``alpha``, ``L``, ``n``)."""
    raw = Path(path).read_bytes()
    marker = b"END\n"
    cut = raw.index(marker) + len(marker)
    meta: Dict[str, str] = dict(
        line.split("=", 1) for line in raw[:cut].decode("ascii").splitlines() if "=" in line
    )
    if meta.get("format") != FORMAT_TAG:
        raise ValueError(f"read_checkpoint: unrecognised format {meta.get('format')!r}")
    n = int(meta["n"])
    dtype = np.dtype("<f8" if meta["endianness"] == "little" else ">f8")
    values = np.frombuffer(raw[cut:], dtype=dtype, count=n * n).reshape(n, n)
    grid = GridSpec(n, float(meta["L"]))
    header = {"n": float(n), "L": float(meta["L"]), "t": float(meta["t"]), "alpha": float(meta["alpha"])}
    return Field.from_physical(grid, values.astype(np.float64)), header
