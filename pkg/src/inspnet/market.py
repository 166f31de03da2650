"""Inspiring/inspired role classification and the financial dichotomy.

Edge targets are the inspiring side (someone later resembles them), edge
sources the inspired side. Indicators aggregate per asset first, then
average across the role, so high-churn assets cannot dominate; a pooled
mode that averages straight over transactions is available as a flag.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from inspnet.model import AssetCatalog, DataError

log = logging.getLogger(__name__)

INDICATORS = (
    "average_volume",
    "average_transactions",
    "average_price",
    "maximum_price",
    "minimum_price",
    "stdev_price",
)


@dataclass(frozen=True)
class RoleAssignment:
    """Asset sets per role; an asset can hold both roles at once."""

    inspiring: frozenset
    inspired: frozenset


@dataclass(frozen=True)
class RoleStats:
    """Financial indicators for one role.

    ``maximum_price`` and ``minimum_price`` are means of per-asset
    extrema; ``max_price_overall`` and ``min_price_overall`` carry the
    role-level extremum variants since either reading is defensible.
    ``stdev_price`` is the population standard deviation of per-asset
    mean prices.
    """

    average_volume: float
    average_transactions: float
    average_price: float
    maximum_price: float
    minimum_price: float
    stdev_price: float
    max_price_overall: float
    min_price_overall: float
    asset_count: int

    def indicator(self, name: str) -> float:
        return getattr(self, name)


@dataclass(frozen=True)
class DichotomyReport:
    inspiring: RoleStats
    inspired: RoleStats
    ratios: dict

    def as_report(self) -> dict:
        def row(stats: RoleStats) -> dict:
            return {
                "asset_count": stats.asset_count,
                **{name: stats.indicator(name) for name in INDICATORS},
                "max_price_overall": stats.max_price_overall,
                "min_price_overall": stats.min_price_overall,
            }

        return {
            "inspiring": row(self.inspiring),
            "inspired": row(self.inspired),
            "ratios": dict(self.ratios),
        }


def classify_roles(graph) -> RoleAssignment:
    """Split graph nodes into edge-target and edge-source sets."""
    inspiring = frozenset(t for _, t, _ in graph.edges)
    inspired = frozenset(s for s, _, _ in graph.edges)
    return RoleAssignment(inspiring=inspiring, inspired=inspired)


def _role_stats(catalog: AssetCatalog, members, pooled: bool) -> RoleStats:
    volumes = []
    tx_counts = []
    mean_prices = []
    max_prices = []
    min_prices = []
    all_prices = []
    skipped = 0
    for asset_id in sorted(members):
        txs = catalog.transactions_for(asset_id)
        if not txs:
            skipped += 1
            continue
        prices = np.array([tx.price_usd for tx in txs], dtype=np.float64)
        volumes.append(float(prices.sum()))
        tx_counts.append(len(txs))
        mean_prices.append(float(prices.mean()))
        max_prices.append(float(prices.max()))
        min_prices.append(float(prices.min()))
        all_prices.append(prices)
    if skipped:
        log.warning("%d role members have no transactions and were skipped", skipped)
    if not volumes:
        raise DataError("role has zero transacted members")

    pooled_prices = np.concatenate(all_prices)
    if pooled:
        price_basis = pooled_prices
    else:
        price_basis = np.array(mean_prices, dtype=np.float64)
    return RoleStats(
        average_volume=float(np.mean(volumes)),
        average_transactions=float(np.mean(tx_counts)),
        average_price=float(np.mean(price_basis)),
        maximum_price=float(np.mean(max_prices)),
        minimum_price=float(np.mean(min_prices)),
        stdev_price=float(np.std(price_basis)),
        max_price_overall=float(pooled_prices.max()),
        min_price_overall=float(pooled_prices.min()),
        asset_count=len(volumes),
    )


def indicator_ratios(inspiring: RoleStats, inspired: RoleStats) -> dict:
    """Inspiring over inspired, per indicator; NaN when both sides are 0."""
    ratios = {}
    for name in INDICATORS:
        top = inspiring.indicator(name)
        bottom = inspired.indicator(name)
        if bottom == 0.0:
            ratios[name] = math.nan if top == 0.0 else math.inf
        else:
            ratios[name] = top / bottom
    return ratios


def financial_dichotomy(
    catalog: AssetCatalog, roles: RoleAssignment, pooled: bool = False
) -> DichotomyReport:
    """Aggregate the six indicators per role and their inspiring/inspired ratios.

    ``pooled`` switches average and stdev price from per-asset means to a
    flat pool of every transaction in the role.
    """
    if not roles.inspiring or not roles.inspired:
        raise DataError("both roles must be nonempty to compare them")
    inspiring = _role_stats(catalog, roles.inspiring, pooled)
    inspired = _role_stats(catalog, roles.inspired, pooled)
    return DichotomyReport(
        inspiring=inspiring,
        inspired=inspired,
        ratios=indicator_ratios(inspiring, inspired),
    )
