"""Blocked pairwise-cosine kernels shared by the graph builders.

The builders never form a full n x n similarity matrix. They tile the
row-normalized embedding matrix into row blocks, push each block through
one float64 matmul, and filter candidates inside the block before moving
on. Worker fan-out happens over blocks; every block's arithmetic is
independent of scheduling, so results are deterministic for any worker
count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from inspnet.model import DataError

DEFAULT_BLOCK_ROWS = 1024


def normalize_rows(data: np.ndarray, ids: list[str] | None = None) -> np.ndarray:
    """Return a float64 copy of ``data`` with unit-norm rows.

    Parameters
    ----------
    data : (n, d) array
        Embedding rows, any float dtype.
    ids : list of str, optional
        Row labels used to name offenders in error messages.

    Raises
    ------
    DataError
        If any row has zero norm (no direction to compare).
    """
    mat = np.asarray(data, dtype=np.float64)
    if mat.ndim != 2:
        raise DataError(f"expected a 2-d embedding matrix, got shape {mat.shape}")
    norms = np.linalg.norm(mat, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        row = int(zero[0])
        label = ids[row] if ids is not None else f"row {row}"
        raise DataError(f"zero-norm embedding for {label}")
    return mat / norms[:, None]


def cosine_block(a_norm: np.ndarray, b_norm: np.ndarray) -> np.ndarray:
    """Dense cosine similarities between two sets of pre-normalized rows."""
    return a_norm @ b_norm.T


def iter_row_blocks(n: int, block: int):
    """Yield (start, stop) tiles covering range(n)."""
    for start in range(0, n, block):
        yield start, min(start + block, n)


def scan_admissible_pairs(
    norm: np.ndarray,
    ts: np.ndarray,
    coll: np.ndarray,
    threshold: float,
    workers: int = 1,
    block: int = DEFAULT_BLOCK_ROWS,
):
    """Find every ordered pair (i, j) passing the three edge rules.

    The rules: ts[i] > ts[j] strictly, coll[i] != coll[j], and
    cosine(norm[i], norm[j]) >= threshold. Returns three aligned arrays
    (sources, targets, weights) sorted by (source, target) row index.

    Parameters
    ----------
    norm : (n, d) float64 array
        Row-normalized embeddings.
    ts : (n,) int64 array
        First-sale timestamps aligned to ``norm`` rows.
    coll : (n,) int array
        Collection codes aligned to ``norm`` rows.
    threshold : float
        Minimum similarity for a pair to count.
    workers : int
        Thread fan-out over row blocks; the output is identical for any
        value (matmuls release the GIL, merge order is fixed).
    block : int
        Rows per tile.
    """
    n = norm.shape[0]

    def scan(bounds):
        start, stop = bounds
        sims = norm[start:stop] @ norm.T
        keep = sims >= threshold
        keep &= ts[start:stop, None] > ts[None, :]
        keep &= coll[start:stop, None] != coll[None, :]
        li, lj = np.nonzero(keep)
        return li + start, lj, sims[li, lj]

    blocks = list(iter_row_blocks(n, block))
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(scan, blocks))
    else:
        parts = [scan(b) for b in blocks]

    if not parts:
        empty = np.array([], dtype=np.int64)
        return empty, empty.copy(), np.array([], dtype=np.float64)
    sources = np.concatenate([p[0] for p in parts])
    targets = np.concatenate([p[1] for p in parts])
    weights = np.concatenate([p[2] for p in parts])
    # blocks ascend and np.nonzero is row-major, so (sources, targets) is
    # already sorted; no extra sort pass needed
    return sources, targets, weights
