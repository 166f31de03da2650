"""EMBV1 binary writer: one ASCII header line, then packed float32 rows."""

from __future__ import annotations

import numpy as np

EMBV1_MAGIC = "EMBV1"


class FormatError(ValueError):
    """Raised when vectors or ids cannot form a valid EMBV1 pair."""


def write_embv1(bin_path: str, ids_path: str, ids: list[str],
                vectors: np.ndarray) -> None:
    """Write embeddings as EMBV1 plus the row-aligned ids file.

    Layout: one ASCII line ``EMBV1 <n> <d>\\n`` followed by exactly
    ``n * d`` little-endian 32-bit floats in row-major order. The ids
    file carries one id per line, line i naming row i.

    Parameters
    ----------
    bin_path, ids_path : str
        Output paths for the binary payload and the ids file.
    ids : list of str
        One non-empty, newline-free id per vector row.
    vectors : ndarray, shape (n, d)
        Embedding rows; cast to little-endian float32 on write. ``n = 0``
        is valid (empty payload), ``d`` must still be positive.
    """
    data = np.ascontiguousarray(vectors, dtype="<f4")
    if data.ndim != 2:
        raise FormatError(f"vectors must be 2-D, got shape {data.shape}")
    n, d = data.shape
    if d <= 0:
        raise FormatError(f"vector dimension must be positive, got d={d}")
    if len(ids) != n:
        raise FormatError(f"{len(ids)} ids for {n} vector rows")
    for i, asset_id in enumerate(ids):
        if not asset_id:
            raise FormatError(f"ids[{i}] is empty")
        if "\n" in asset_id or "\r" in asset_id:
            raise FormatError(f"ids[{i}] contains a line break: {asset_id!r}")
    if not np.all(np.isfinite(data)):
        row, col = map(int, np.argwhere(~np.isfinite(data))[0])
        raise FormatError(f"non-finite value at row {row}, col {col}")

    with open(bin_path, "wb") as fh:
        fh.write(f"{EMBV1_MAGIC} {n} {d}\n".encode("ascii"))
        fh.write(data.tobytes())
    with open(ids_path, "w", encoding="utf-8") as fh:
        for asset_id in ids:
            fh.write(asset_id + "\n")
