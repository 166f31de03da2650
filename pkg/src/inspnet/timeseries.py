"""Calendar-bucketed series construction and lagged cross-correlation.

Buckets are ISO weeks or calendar months in UTC. Series values may be
missing (None) and stay missing; nothing is silently zero-filled.
Correlations truncate at the series ends rather than padding or wrapping,
and a negative peak lag means the first series leads the second.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from inspnet.model import AssetCatalog, DataError, EmbeddingStore, TimeWindow
from inspnet.simkernel import normalize_rows

log = logging.getLogger(__name__)

DEFAULT_PAIR_CAP = 5_000_000


class Sampling(enum.Enum):
    WEEKLY = "weekly"
    MONTHLY = "monthly"

    @classmethod
    def parse(cls, text: str) -> "Sampling":
        try:
            return cls(text.lower())
        except ValueError:
            raise DataError(
                f"unknown sampling {text!r}; expected weekly or monthly") from None


class SeriesKind(enum.Enum):
    AVG_PAIRWISE_SIMILARITY = "avg_pairwise_similarity"
    AVG_MEAN_SELLING_PRICE = "avg_mean_selling_price"
    BTC_CLOSE = "btc_close"
    FIRST_SOLD_COUNT = "first_sold_count"
    COLLECTIONS_WITH_FIRST_SOLD_COUNT = "collections_with_first_sold_count"

    @classmethod
    def parse(cls, text: str) -> "SeriesKind":
        try:
            return cls(text.lower())
        except ValueError:
            raise DataError(f"unknown series kind {text!r}; expected one of "
                            f"{[k.value for k in cls]}") from None


@dataclass(frozen=True)
class TimeSeries:
    """One sampled series; ``values[i]`` covers the bucket starting at
    ``bucket_starts[i]``, with None marking a missing sample."""

    kind: SeriesKind
    sampling: Sampling
    origin: int
    bucket_starts: tuple
    values: tuple

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bucket_start", "value"])
            for start, value in zip(self.bucket_starts, self.values):
                writer.writerow([start, "" if value is None else f"{value:.10g}"])


@dataclass(frozen=True)
class TLCCResult:
    """Lagged Pearson correlogram; missing lags carry None."""

    lags: tuple
    correlations: tuple
    overlaps: tuple
    peak_lag: int
    peak_r: float

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag", "r", "n_overlap"])
            for lag, r, n in zip(self.lags, self.correlations, self.overlaps):
                writer.writerow([lag, "" if r is None else f"{r:.10g}", n])


def _month_start(ts: int) -> int:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    return int(datetime(dt.year, dt.month, 1, tzinfo=timezone.utc).timestamp())


def _next_month(start: int) -> int:
    dt = datetime.fromtimestamp(start, tz=timezone.utc)
    year, month = (dt.year + 1, 1) if dt.month == 12 else (dt.year, dt.month + 1)
    return int(datetime(year, month, 1, tzinfo=timezone.utc).timestamp())


def _week_start(ts: int) -> int:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    monday = dt.date() - timedelta(days=dt.weekday())
    return int(datetime(
        monday.year, monday.month, monday.day, tzinfo=timezone.utc).timestamp())


def bucket_starts_for(window: TimeWindow, sampling: Sampling) -> list[int]:
    """Starts of every calendar bucket intersecting the window, ascending."""
    if sampling is Sampling.MONTHLY:
        start = _month_start(window.t_start)
        step = _next_month
    else:
        start = _week_start(window.t_start)
        step = lambda s: s + 7 * 86_400  # noqa: E731 - two-liner helper
    starts = []
    while start <= window.t_end:
        starts.append(start)
        start = step(start)
    return starts


def load_btc_csv(path: str) -> list[tuple[int, float]]:
    """Read a `Date,Close` CSV with ISO dates into (epoch, close) pairs."""
    rows: list[tuple[int, float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip() for h in header[:2]] != ["Date", "Close"]:
            raise DataError(f"{path}:1: expected 'Date,Close' header, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                day = datetime.strptime(row[0], "%Y-%m-%d").replace(tzinfo=timezone.utc)
                close = float(row[1])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: malformed row {row!r}") from None
            rows.append((int(day.timestamp()), close))
    rows.sort()
    return rows


def _windowed_assets(catalog: AssetCatalog, window: TimeWindow):
    return [a for a in sorted(catalog.assets)
            if window.contains(catalog.assets[a].first_sale_ts)]


def _bucket_of(ts: int, starts: list[int]) -> int:
    return int(np.searchsorted(np.asarray(starts), ts, side="right")) - 1


def _pairwise_similarity_series(
    catalog, store, window, starts, pair_cap, seed, edges_only, threshold
):
    ids = [a for a in _windowed_assets(catalog, window)
           if store.index_of(a) is not None]
    if not ids:
        return [None] * len(starts)
    norm = normalize_rows(store.data[[store.index_of(a) for a in ids]], ids=ids)
    ts = np.array([catalog.assets[a].first_sale_ts for a in ids], dtype=np.int64)
    _, coll = np.unique(
        [catalog.assets[a].collection_id for a in ids], return_inverse=True)
    order = np.argsort(ts, kind="stable")
    norm, ts, coll = norm[order], ts[order], coll[order]

    rng = np.random.default_rng(seed)
    values = []
    for i, start in enumerate(starts):
        end = starts[i + 1] - 1 if i + 1 < len(starts) else window.t_end
        end = min(end, window.t_end)
        k = int(np.searchsorted(ts, end, side="right"))
        if k < 2:
            values.append(None)
            continue
        sims = norm[:k] @ norm[:k].T
        admissible = ts[:k, None] > ts[None, :k]
        admissible &= coll[:k, None] != coll[None, :k]
        if edges_only:
            admissible &= sims >= threshold
        count = int(admissible.sum())
        if count == 0:
            values.append(None)
            continue
        if count > pair_cap:
            flat = np.flatnonzero(admissible.ravel())
            chosen = rng.choice(flat, size=pair_cap, replace=True)
            values.append(float(sims.ravel()[chosen].mean()))
        else:
            values.append(float(sims[admissible].mean()))
    return values


def build_series(
    kind: SeriesKind,
    catalog: AssetCatalog | None,
    store: EmbeddingStore | None,
    sampling: Sampling,
    window: TimeWindow,
    btc_csv: str | None = None,
    pair_cap: int = DEFAULT_PAIR_CAP,
    seed: int = 0,
    edges_only: bool = False,
    threshold: float = 0.5,
    forward_fill_btc: bool = False,
) -> TimeSeries:
    """Build one of the five series over the window's calendar buckets.

    Similarity and price series are cumulative up to each bucket's end;
    the counting series and the BTC close are per bucket. The similarity
    series averages every admissible ordered pair (strictly earlier,
    cross-collection) by default, or only threshold-passing pairs with
    ``edges_only``; above ``pair_cap`` admissible pairs it switches to a
    seeded uniform sample of that size.
    """
    starts = bucket_starts_for(window, sampling)
    if not starts:
        raise DataError("window spans no calendar bucket")

    if kind is SeriesKind.BTC_CLOSE:
        if btc_csv is None:
            raise DataError("btc_close series needs the price CSV path")
        rows = load_btc_csv(btc_csv)
        per_bucket: dict[int, float] = {}
        for day_ts, close in rows:
            if window.t_start <= day_ts <= window.t_end:
                b = _bucket_of(day_ts, starts)
                per_bucket[b] = close  # rows sorted: ends at last close
        values = [per_bucket.get(i) for i in range(len(starts))]
        gaps = [i for i, v in enumerate(values) if v is None]
        if gaps:
            log.warning("%d of %d buckets have no price row", len(gaps), len(starts))
            if forward_fill_btc:
                for i in range(1, len(values)):
                    if values[i] is None:
                        values[i] = values[i - 1]
    elif kind is SeriesKind.FIRST_SOLD_COUNT:
        counts = [0] * len(starts)
        for a in _windowed_assets(catalog, window):
            counts[_bucket_of(catalog.assets[a].first_sale_ts, starts)] += 1
        values = [float(c) for c in counts]
    elif kind is SeriesKind.COLLECTIONS_WITH_FIRST_SOLD_COUNT:
        per_bucket_colls: list[set] = [set() for _ in starts]
        for a in _windowed_assets(catalog, window):
            record = catalog.assets[a]
            per_bucket_colls[_bucket_of(record.first_sale_ts, starts)].add(
                record.collection_id)
        values = [float(len(s)) for s in per_bucket_colls]
    elif kind is SeriesKind.AVG_MEAN_SELLING_PRICE:
        entries = []
        for a in _windowed_assets(catalog, window):
            txs = catalog.transactions_for(a)
            if txs:
                mean_price = float(np.mean([tx.price_usd for tx in txs]))
                entries.append((catalog.assets[a].first_sale_ts, mean_price))
        entries.sort()
        sale_ts = np.array([e[0] for e in entries], dtype=np.int64)
        prefix = np.concatenate([[0.0], np.cumsum([e[1] for e in entries])])
        values = []
        for i, start in enumerate(starts):
            end = min(starts[i + 1] - 1 if i + 1 < len(starts) else window.t_end,
                      window.t_end)
            k = int(np.searchsorted(sale_ts, end, side="right"))
            values.append(float(prefix[k] / k) if k else None)
    elif kind is SeriesKind.AVG_PAIRWISE_SIMILARITY:
        values = _pairwise_similarity_series(
            catalog, store, window, starts, pair_cap, seed, edges_only, threshold)
    else:
        raise DataError(f"unknown series kind {kind!r}")

    return TimeSeries(
        kind=kind, sampling=sampling, origin=starts[0],
        bucket_starts=tuple(starts), values=tuple(values))


def pearson(xs, ys) -> float:
    """Sample Pearson correlation over pairwise-complete observations."""
    pairs = [(x, y) for x, y in zip(xs, ys) if x is not None and y is not None]
    if len(xs) != len(ys):
        raise DataError(f"series lengths differ: {len(xs)} vs {len(ys)}")
    if len(pairs) < 3:
        raise DataError(f"need at least 3 paired samples, got {len(pairs)}")
    x = np.array([p[0] for p in pairs], dtype=np.float64)
    y = np.array([p[1] for p in pairs], dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt((dx * dx).sum()))
    sy = float(np.sqrt((dy * dy).sum()))
    if sx == 0.0 or sy == 0.0:
        raise DataError("zero variance in a series; correlation undefined")
    return float((dx * dy).sum() / (sx * sy))


def tlcc(series_a: TimeSeries, series_b: TimeSeries, max_lag: int) -> TLCCResult:
    """Correlogram of series_a shifted by each lag against series_b.

    r(lag) pairs a[t + lag] with b[t] over the truncated overlap; a
    negative peak lag therefore means series_a leads series_b. Lags whose
    overlap is shorter than 3 defined pairs (or degenerate) are missing.
    """
    if max_lag < 1:
        raise ValueError(f"max_lag must be >= 1, got {max_lag}")
    if series_a.sampling is not series_b.sampling:
        raise DataError("series use different sampling; resample first")
    if series_a.origin != series_b.origin:
        raise DataError("series have different origins; rebuild over one window")
    a, b = list(series_a.values), list(series_b.values)
    lags = list(range(-max_lag, max_lag + 1))
    correlations: list[float | None] = []
    overlaps: list[int] = []
    skipped = []
    for lag in lags:
        pairs = [
            (a[t + lag], b[t])
            for t in range(max(0, -lag), min(len(b), len(a) - lag))
            if a[t + lag] is not None and b[t] is not None
        ]
        overlaps.append(len(pairs))
        if len(pairs) < 3:
            correlations.append(None)
            skipped.append(lag)
            continue
        try:
            correlations.append(pearson([p[0] for p in pairs], [p[1] for p in pairs]))
        except DataError:
            correlations.append(None)
            skipped.append(lag)
    if skipped:
        log.warning("%d of %d lags skipped for insufficient overlap or "
                    "degenerate variance: %s", len(skipped), len(lags), skipped)
    defined = [(lag, r) for lag, r in zip(lags, correlations) if r is not None]
    if not defined:
        raise DataError("no lag has 3 overlapping samples; series too short")
    peak_lag, peak_r = max(defined, key=lambda lr: (abs(lr[1]), -abs(lr[0]), -lr[0]))
    return TLCCResult(
        lags=tuple(lags), correlations=tuple(correlations),
        overlaps=tuple(overlaps), peak_lag=peak_lag, peak_r=peak_r)
