"""Time-respecting visual-inspiration graph analytics over asset embeddings.

The package builds directed similarity graphs from embedded digital assets
and their first-sale timestamps, then derives structural statistics,
power-law fits, market dichotomies, lagged cross-correlations and
sampling-based Shapley explanations from them.
"""

from inspnet.model import (
    AssetCatalog,
    AssetRecord,
    Category,
    DataError,
    EmbeddingStore,
    TimeWindow,
    Transaction,
    cosine_similarity,
    load_catalog,
    load_embeddings,
    write_embeddings,
)
from inspnet.nft import InspirationGraph, build_nft_graph, export_edge_list
from inspnet.collection_graph import (
    CollectionGraph,
    LinkageCriterion,
    aggregate_collection_weight,
    best_cross_similarities,
    build_collection_graph,
    penalty_factor,
)
from inspnet.metrics import (
    CommunityPartition,
    StructuralStats,
    louvain_communities,
    structural_summary,
)
from inspnet.powerlaw import PowerLawFit, fit_power_law, sample_discrete_power_law
from inspnet.market import (
    DichotomyReport,
    RoleAssignment,
    RoleStats,
    classify_roles,
    financial_dichotomy,
    indicator_ratios,
)
from inspnet.timeseries import (
    Sampling,
    SeriesKind,
    TimeSeries,
    TLCCResult,
    build_series,
    pearson,
    tlcc,
)
from inspnet.shapley import (
    ExplanationMap,
    FeatureGrid,
    OracleError,
    ProcessOracle,
    explain_pair,
    shapley_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "AssetCatalog",
    "AssetRecord",
    "Category",
    "CollectionGraph",
    "CommunityPartition",
    "DataError",
    "DichotomyReport",
    "EmbeddingStore",
    "ExplanationMap",
    "FeatureGrid",
    "InspirationGraph",
    "LinkageCriterion",
    "OracleError",
    "PowerLawFit",
    "ProcessOracle",
    "RoleAssignment",
    "RoleStats",
    "Sampling",
    "SeriesKind",
    "StructuralStats",
    "TLCCResult",
    "TimeSeries",
    "TimeWindow",
    "Transaction",
    "aggregate_collection_weight",
    "best_cross_similarities",
    "build_collection_graph",
    "build_nft_graph",
    "build_series",
    "classify_roles",
    "cosine_similarity",
    "explain_pair",
    "export_edge_list",
    "financial_dichotomy",
    "fit_power_law",
    "indicator_ratios",
    "load_catalog",
    "load_embeddings",
    "louvain_communities",
    "pearson",
    "penalty_factor",
    "sample_discrete_power_law",
    "shapley_estimate",
    "structural_summary",
    "tlcc",
    "write_embeddings",
    "__version__",
]
