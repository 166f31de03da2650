"""Domain types, file ingestion and the cosine similarity primitive.

Everything downstream (graph builders, metrics, time series) works on the
three containers defined here: an :class:`AssetCatalog` of per-asset
metadata and transactions, an :class:`EmbeddingStore` holding the dense
embedding matrix, and a :class:`TimeWindow` bounding an observation period.
All containers are treated as immutable once loaded.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

EMBV1_MAGIC = "EMBV1"


class DataError(Exception):
    """Raised when an input file or value violates the documented schemas."""


class Category(enum.Enum):
    ART = "Art"
    COLLECTIBLE = "Collectible"
    GAMES = "Games"
    METAVERSE = "Metaverse"
    UTILITY = "Utility"
    OTHER = "Other"

    @classmethod
    def parse(cls, text: str) -> "Category":
        for member in cls:
            if member.value == text:
                return member
        raise DataError(f"unknown category {text!r}; expected one of "
                        f"{[m.value for m in cls]}")


@dataclass
class AssetRecord:
    """One asset: its collection, scope category and first-sale timestamp.

    ``embedding_index`` is the asset's row in an :class:`EmbeddingStore`
    and stays ``None`` for assets without an image embedding.
    """

    asset_id: str
    collection_id: str
    category: Category
    first_sale_ts: int
    embedding_index: int | None = None


@dataclass
class Transaction:
    asset_id: str
    ts: int
    price_usd: float


@dataclass
class AssetCatalog:
    """Validated asset metadata plus the full transaction history.

    ``collections`` partitions the asset set: every asset appears in
    exactly one collection's member list. ``transactions`` is sorted by
    timestamp.
    """

    assets: dict[str, AssetRecord]
    collections: dict[str, list[str]]
    transactions: list[Transaction]
    _tx_by_asset: dict[str, list[Transaction]] = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self._tx_by_asset is None:
            index: dict[str, list[Transaction]] = {}
            for tx in self.transactions:
                index.setdefault(tx.asset_id, []).append(tx)
            self._tx_by_asset = index

    def transactions_for(self, asset_id: str) -> list[Transaction]:
        return self._tx_by_asset.get(asset_id, [])

    def asset_count(self) -> int:
        return len(self.assets)


@dataclass
class EmbeddingStore:
    """N x d matrix of 32-bit float embeddings with the aligned asset ids."""

    n: int
    d: int
    data: np.ndarray
    ids: list[str]
    _index: dict[str, int] = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self._index is None:
            self._index = {a: i for i, a in enumerate(self.ids)}

    def index_of(self, asset_id: str) -> int | None:
        return self._index.get(asset_id)

    def vector(self, asset_id: str) -> np.ndarray:
        idx = self._index.get(asset_id)
        if idx is None:
            raise DataError(f"asset {asset_id!r} has no embedding")
        return self.data[idx]


@dataclass(frozen=True)
class TimeWindow:
    """Closed observation interval [t_start, t_end] in unix epoch seconds UTC."""

    t_start: int
    t_end: int

    def __post_init__(self) -> None:
        if not self.t_start < self.t_end:
            raise DataError(
                f"invalid window: t_start ({self.t_start}) must precede t_end ({self.t_end})")

    def contains(self, ts: int) -> bool:
        return self.t_start <= ts <= self.t_end


METADATA_COLUMNS = ["asset_id", "collection_id", "category", "first_sale_ts"]
TRANSACTION_COLUMNS = ["asset_id", "ts", "price_usd"]


def _parse_epoch(text: str, path: str, lineno: int, column: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: malformed {column} {text!r}") from None
    if value <= 0:
        raise DataError(f"{path}:{lineno}: {column} must be a positive epoch timestamp, got {value}")
    return value


def load_catalog(metadata_path: str, transactions_path: str) -> AssetCatalog:
    """Load and cross-validate the metadata and transactions TSV files.

    The metadata file may omit the ``first_sale_ts`` column (or leave cells
    empty); missing values are derived as the earliest transaction
    timestamp of the asset. An explicit metadata timestamp wins over the
    derived one; a disagreement is logged as a warning, not an error.
    """
    assets: dict[str, AssetRecord] = {}
    explicit_ts: dict[str, int | None] = {}

    with open(metadata_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{metadata_path}: empty file") from None
        if header == METADATA_COLUMNS:
            has_ts_column = True
        elif header == METADATA_COLUMNS[:3]:
            has_ts_column = False
        else:
            raise DataError(f"{metadata_path}:1: unexpected header {header!r}")
        expected_len = 4 if has_ts_column else 3
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != expected_len:
                raise DataError(
                    f"{metadata_path}:{lineno}: expected {expected_len} columns, got {len(row)}")
            asset_id, collection_id, category_text = row[0], row[1], row[2]
            if not asset_id or not collection_id:
                raise DataError(f"{metadata_path}:{lineno}: empty asset_id or collection_id")
            if asset_id in assets:
                raise DataError(f"{metadata_path}:{lineno}: duplicate asset_id {asset_id!r}")
            try:
                category = Category.parse(category_text)
            except DataError as exc:
                raise DataError(f"{metadata_path}:{lineno}: {exc}") from None
            ts: int | None = None
            if has_ts_column and row[3] != "":
                ts = _parse_epoch(row[3], metadata_path, lineno, "first_sale_ts")
            explicit_ts[asset_id] = ts
            assets[asset_id] = AssetRecord(asset_id, collection_id, category, first_sale_ts=0)

    transactions: list[Transaction] = []
    min_tx_ts: dict[str, int] = {}
    with open(transactions_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{transactions_path}: empty file") from None
        if header != TRANSACTION_COLUMNS:
            raise DataError(f"{transactions_path}:1: unexpected header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(
                    f"{transactions_path}:{lineno}: expected 3 columns, got {len(row)}")
            asset_id = row[0]
            if asset_id not in assets:
                raise DataError(
                    f"{transactions_path}:{lineno}: transaction references unknown asset {asset_id!r}")
            ts = _parse_epoch(row[1], transactions_path, lineno, "ts")
            try:
                price = float(row[2])
            except ValueError:
                raise DataError(
                    f"{transactions_path}:{lineno}: malformed price_usd {row[2]!r}") from None
            if not math.isfinite(price) or price < 0:
                raise DataError(
                    f"{transactions_path}:{lineno}: price_usd must be finite and >= 0, got {row[2]}")
            transactions.append(Transaction(asset_id, ts, price))
            prev = min_tx_ts.get(asset_id)
            if prev is None or ts < prev:
                min_tx_ts[asset_id] = ts

    transactions.sort(key=lambda tx: (tx.ts, tx.asset_id))

    for asset_id, record in assets.items():
        explicit = explicit_ts[asset_id]
        derived = min_tx_ts.get(asset_id)
        if explicit is not None:
            if derived is not None and derived != explicit:
                log.warning(
                    "asset %s: first_sale_ts %d disagrees with earliest transaction %d; "
                    "keeping the metadata value", asset_id, explicit, derived)
            record.first_sale_ts = explicit
        elif derived is not None:
            record.first_sale_ts = derived
        else:
            raise DataError(
                f"asset {asset_id!r} has no first_sale_ts and no transactions to derive it from")

    collections: dict[str, list[str]] = {}
    for asset_id in sorted(assets):
        collections.setdefault(assets[asset_id].collection_id, []).append(asset_id)

    return AssetCatalog(assets=assets, collections=collections, transactions=transactions)


def attach_embedding_indices(catalog: AssetCatalog, store: EmbeddingStore) -> int:
    """Resolve each asset's embedding row in ``store``; returns how many matched."""
    matched = 0
    for asset_id, record in catalog.assets.items():
        idx = store.index_of(asset_id)
        record.embedding_index = idx
        if idx is not None:
            matched += 1
    return matched


def load_embeddings(bin_path: str, ids_path: str) -> EmbeddingStore:
    """Read an EMBV1 binary file and its companion ids file.

    EMBV1 layout: one ASCII header line ``EMBV1 <n> <d>\\n`` followed by
    exactly ``n * d`` little-endian 32-bit floats, row-major. The ids file
    carries one asset id per line, line i naming row i.
    """
    with open(bin_path, "rb") as fh:
        header = fh.readline()
        try:
            parts = header.decode("ascii").split()
        except UnicodeDecodeError:
            raise DataError(f"{bin_path}: header is not ASCII") from None
        if len(parts) != 3 or parts[0] != EMBV1_MAGIC:
            raise DataError(f"{bin_path}: bad magic, expected 'EMBV1 <n> <d>' header")
        try:
            n, d = int(parts[1]), int(parts[2])
        except ValueError:
            raise DataError(f"{bin_path}: non-integer dimensions in header {header!r}") from None
        if n < 0 or d <= 0:
            raise DataError(f"{bin_path}: invalid dimensions n={n}, d={d}")
        payload = fh.read()
    expected = n * d * 4
    if len(payload) < expected:
        raise DataError(
            f"{bin_path}: truncated payload, expected {expected} bytes, got {len(payload)}")
    if len(payload) > expected:
        raise DataError(
            f"{bin_path}: payload has {len(payload) - expected} trailing bytes beyond n*d*4")
    data = np.frombuffer(payload, dtype="<f4").reshape(n, d).copy()

    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        row, col = int(bad[0][0]), int(bad[0][1])
        raise DataError(f"{bin_path}: non-finite value at row {row}, col {col}")

    with open(ids_path, encoding="utf-8") as fh:
        ids = [line.rstrip("\n") for line in fh]
    if len(ids) != n:
        raise DataError(
            f"{ids_path}: id count mismatch, header says n={n} but file has {len(ids)} lines")
    if any(not i for i in ids):
        raise DataError(f"{ids_path}: blank asset id line")
    if len(set(ids)) != len(ids):
        seen: set[str] = set()
        for i in ids:
            if i in seen:
                raise DataError(f"{ids_path}: duplicate asset id {i!r}")
            seen.add(i)

    return EmbeddingStore(n=n, d=d, data=data, ids=ids)


def write_embeddings(store: EmbeddingStore, bin_path: str, ids_path: str) -> None:
    """Serialize a store back to EMBV1; the round-trip is bit-exact."""
    data = np.ascontiguousarray(store.data, dtype="<f4")
    if data.shape != (store.n, store.d):
        raise DataError(
            f"store shape {data.shape} disagrees with declared n={store.n}, d={store.d}")
    with open(bin_path, "wb") as fh:
        fh.write(f"{EMBV1_MAGIC} {store.n} {store.d}\n".encode("ascii"))
        fh.write(data.tobytes())
    with open(ids_path, "w", encoding="utf-8") as fh:
        for asset_id in store.ids:
            fh.write(asset_id + "\n")


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, accumulated in float64.

    Raises :class:`DataError` on a length mismatch or a zero-norm input
    (a zero norm signals a degenerate embedding upstream).
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise DataError(f"vector length mismatch: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise DataError("zero-norm vector has no direction; degenerate embedding")
    return float(va @ vb / (na * nb))
