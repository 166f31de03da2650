"""Command-line surface for reproducible graph, metric, and series runs.

Every subcommand reads a shared config (JSON file plus flag overrides,
flags win), writes its artifacts into the output directory, and finishes
with a manifest recording input hashes, the resolved config, library
versions, and the seed. Reruns with identical inputs, config, and seed
produce byte-identical artifacts; only the manifest timestamp moves.

Exit codes: 0 ok, 1 data error, 2 usage or config error, 3 oracle failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import platform
import shlex
import sys
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

import inspnet
from inspnet.collection_graph import LinkageCriterion, build_collection_graph
from inspnet.market import classify_roles, financial_dichotomy
from inspnet.metrics import louvain_communities, structural_summary
from inspnet.model import (
    DataError,
    TimeWindow,
    attach_embedding_indices,
    load_catalog,
    load_embeddings,
)
from inspnet.nft import build_nft_graph, export_edge_list
from inspnet.powerlaw import fit_power_law
from inspnet.shapley import (
    FeatureGrid,
    OracleError,
    ProcessOracle,
    additive_toy,
    conjunction_toy,
    constant_toy,
    dummy_feature_toy,
    explain_pair,
)
from inspnet.timeseries import Sampling, SeriesKind, build_series, tlcc

log = logging.getLogger(__name__)

CONFIG_KEYS = (
    "metadata", "transactions", "embeddings", "ids", "btc_csv", "output_dir",
    "t_start", "t_end", "threshold", "criterion", "sampling", "tlcc_max_lag",
    "seed", "workers",
)


class ConfigError(Exception):
    """Invalid or incomplete run configuration."""


@dataclass
class RunConfig:
    """Resolved run parameters shared by every subcommand."""

    metadata: str | None = None
    transactions: str | None = None
    embeddings: str | None = None
    ids: str | None = None
    btc_csv: str | None = None
    output_dir: str | None = None
    t_start: int | None = None
    t_end: int | None = None
    threshold: float = 0.5
    criterion: str = "avg"
    sampling: str = "monthly"
    tlcc_max_lag: int | None = None
    seed: int = 0
    workers: int = 1


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then config-file keys, then flags; flags win."""
    values = dataclasses.asdict(RunConfig())
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: not valid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
        unknown = sorted(set(loaded) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"{args.config}: unknown keys {unknown}")
        values.update(loaded)
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag

    config = RunConfig(**values)
    if not (isinstance(config.threshold, (int, float))
            and 0.0 < float(config.threshold) <= 1.0):
        raise ConfigError(f"threshold must be in (0, 1], got {config.threshold!r}")
    config.threshold = float(config.threshold)
    if not (isinstance(config.workers, int) and config.workers >= 1):
        raise ConfigError(f"workers must be a positive integer, got {config.workers!r}")
    if not isinstance(config.seed, int):
        raise ConfigError(f"seed must be an integer, got {config.seed!r}")
    if config.criterion not in ("min", "avg", "max"):
        raise ConfigError(f"criterion must be min, avg, or max, got {config.criterion!r}")
    if config.sampling not in ("weekly", "monthly"):
        raise ConfigError(f"sampling must be weekly or monthly, got {config.sampling!r}")
    for key in ("t_start", "t_end"):
        value = values[key]
        if value is not None and not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer epoch, got {value!r}")
    if config.t_start is not None and config.t_end is not None \
            and config.t_start >= config.t_end:
        raise ConfigError(f"t_start {config.t_start} must precede t_end {config.t_end}")
    if config.tlcc_max_lag is None:
        config.tlcc_max_lag = 12 if config.sampling == "monthly" else 52
    elif not (isinstance(config.tlcc_max_lag, int) and config.tlcc_max_lag >= 1):
        raise ConfigError(f"tlcc_max_lag must be >= 1, got {config.tlcc_max_lag!r}")
    if config.output_dir is None:
        raise ConfigError("output_dir is required (config key or --output-dir)")
    return config


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _config_hash(config: RunConfig) -> str:
    """Hash of the resolved config, output location excluded so artifacts
    keep their identity wherever they land."""
    record = dataclasses.asdict(config)
    record.pop("output_dir")
    canonical = json.dumps(record, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class _Run:
    """Artifact and input bookkeeping for one subcommand invocation."""

    def __init__(self, subcommand: str, config: RunConfig, config_path: str | None):
        self.subcommand = subcommand
        self.config = config
        self.out = Path(config.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        if not os.access(self.out, os.W_OK):
            raise ConfigError(f"output_dir {self.out} is not writable")
        self.hash = _config_hash(config)
        self.inputs: dict[str, str] = {}
        self.artifacts: dict[str, str] = {}
        if config_path is not None:
            self.record_input(config_path)

    def record_input(self, path: str) -> None:
        try:
            self.inputs[path] = _sha256_file(path)
        except OSError as exc:
            raise DataError(f"cannot read input {path}: {exc}") from None

    def seal_text(self, name: str) -> None:
        """Prepend the config-hash comment line and register the artifact.

        The leading `#` line is ignored by TSV/CSV consumers and treated
        as a preprocessor line by DOT tooling.
        """
        path = self.out / name
        body = path.read_bytes()
        path.write_bytes(f"# config {self.hash}\n".encode("ascii") + body)
        self.artifacts[name] = _sha256_file(str(path))

    def seal_png(self, name: str) -> None:
        """Re-save the raster with the config hash in a text chunk."""
        from PIL import Image
        from PIL.PngImagePlugin import PngInfo

        path = self.out / name
        with Image.open(path) as img:
            pixels = img.copy()
        info = PngInfo()
        info.add_text("config_hash", self.hash)
        pixels.save(path, format="PNG", pnginfo=info)
        self.artifacts[name] = _sha256_file(str(path))

    def write_json(self, name: str, payload: dict) -> None:
        record = {"config_hash": self.hash, "seed": self.config.seed, **payload}
        path = self.out / name
        path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")
        self.artifacts[name] = _sha256_file(str(path))

    def write_manifest(self) -> None:
        manifest = {
            "subcommand": self.subcommand,
            "config": dataclasses.asdict(self.config),
            "config_hash": self.hash,
            "inputs": self.inputs,
            "artifacts": dict(sorted(self.artifacts.items())),
            "versions": {
                "inspnet": inspnet.__version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "seed": self.config.seed,
            "generated_at": datetime.now(timezone.utc).isoformat(),
        }
        (self.out / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _require(config: RunConfig, *names: str) -> None:
    missing = [n for n in names if getattr(config, n) is None]
    if missing:
        raise ConfigError(
            f"missing required config: {', '.join(missing)} "
            f"(set in the config file or pass --{missing[0].replace('_', '-')})")


def _load_catalog(run: _Run):
    config = run.config
    _require(config, "metadata", "transactions")
    run.record_input(config.metadata)
    run.record_input(config.transactions)
    return load_catalog(config.metadata, config.transactions)


def _load_store(run: _Run):
    config = run.config
    _require(config, "embeddings", "ids")
    run.record_input(config.embeddings)
    run.record_input(config.ids)
    return load_embeddings(config.embeddings, config.ids)


def _resolve_window(run: _Run, catalog=None) -> TimeWindow:
    """Explicit bounds win; otherwise span the catalog's first sales."""
    config = run.config
    t_start, t_end = config.t_start, config.t_end
    if (t_start is None or t_end is None) and catalog is None:
        raise ConfigError("t_start and t_end are required when no catalog is loaded")
    if t_start is None or t_end is None:
        times = [r.first_sale_ts for r in catalog.assets.values()]
        if t_start is None:
            t_start = min(times)
        if t_end is None:
            t_end = max(times)
    if t_start >= t_end:
        raise ConfigError(f"window [{t_start}, {t_end}] is empty")
    config.t_start, config.t_end = t_start, t_end
    run.hash = _config_hash(config)
    return TimeWindow(t_start, t_end)


def _asset_graph(run: _Run):
    catalog = _load_catalog(run)
    store = _load_store(run)
    attach_embedding_indices(catalog, store)
    window = _resolve_window(run, catalog)
    graph = build_nft_graph(
        catalog, store, window,
        threshold=run.config.threshold, workers=run.config.workers)
    return catalog, store, graph


def _cmd_build_graph(run: _Run, args) -> None:
    _, _, graph = _asset_graph(run)
    name = "edges.dot" if args.format == "dot" else "edges.tsv"
    rows = export_edge_list(graph, str(run.out / name), fmt=args.format)
    run.seal_text(name)
    run.write_json("graph.json", {**graph.build_report(), "edge_rows": rows})


def _cmd_build_collections(run: _Run, args) -> None:
    del args
    catalog = _load_catalog(run)
    store = _load_store(run)
    attach_embedding_indices(catalog, store)
    window = _resolve_window(run, catalog)
    graph = build_collection_graph(
        catalog, store, window,
        criterion=LinkageCriterion.parse(run.config.criterion),
        threshold=run.config.threshold, workers=run.config.workers)
    with open(run.out / "collections.tsv", "w", encoding="utf-8") as fh:
        fh.write("source\ttarget\tweight\n")
        for source, target, weight in graph.edges:
            fh.write(f"{source}\t{target}\t{weight:.6f}\n")
    run.seal_text("collections.tsv")
    run.write_json("collections.json", graph.build_report())


def _cmd_stats(run: _Run, args) -> None:
    del args
    _, _, graph = _asset_graph(run)
    stats = structural_summary(graph)
    run.write_json("stats.json", stats.as_report())


def _cmd_powerlaw(run: _Run, args) -> None:
    _, _, graph = _asset_graph(run)
    counts = Counter()
    if args.degree in ("in", "total"):
        counts.update(target for _, target, _ in graph.edges)
    if args.degree in ("out", "total"):
        counts.update(source for source, _, _ in graph.edges)
    degrees = [counts.get(node, 0) for node in graph.nodes]
    fit = fit_power_law(degrees, bootstraps=args.bootstraps, seed=run.config.seed)
    run.write_json("powerlaw.json", {
        "degree": args.degree,
        "bootstraps": args.bootstraps,
        "alpha": fit.alpha,
        "x_min": fit.x_min,
        "ks_statistic": fit.ks_statistic,
        "p_value": fit.p_value,
        "n_tail": fit.n_tail,
        "scan": [list(row) for row in fit.scan],
    })


def _cmd_communities(run: _Run, args) -> None:
    del args
    catalog = _load_catalog(run)
    store = _load_store(run)
    attach_embedding_indices(catalog, store)
    window = _resolve_window(run, catalog)
    graph = build_collection_graph(
        catalog, store, window,
        criterion=LinkageCriterion.parse(run.config.criterion),
        threshold=run.config.threshold, workers=run.config.workers)
    partition = louvain_communities(graph, seed=run.config.seed)
    run.write_json("communities.json", {
        "assignment": partition.assignment,
        "modularity": partition.modularity,
        "community_count": partition.community_count(),
    })


def _cmd_market(run: _Run, args) -> None:
    catalog, _, graph = _asset_graph(run)
    roles = classify_roles(graph)
    report = financial_dichotomy(catalog, roles, pooled=args.pooled)
    run.write_json("market.json", {"pooled": args.pooled, **report.as_report()})


def _series_requirements(kind: SeriesKind) -> tuple[bool, bool, bool]:
    """(needs_catalog, needs_store, needs_btc) per series kind."""
    return (
        kind is not SeriesKind.BTC_CLOSE,
        kind is SeriesKind.AVG_PAIRWISE_SIMILARITY,
        kind is SeriesKind.BTC_CLOSE,
    )


def _build_one_series(run: _Run, kind: SeriesKind, catalog, store, window, args):
    config = run.config
    return build_series(
        kind, catalog, store, Sampling.parse(config.sampling), window,
        btc_csv=config.btc_csv,
        pair_cap=args.pair_cap,
        seed=config.seed,
        edges_only=args.edges_only,
        threshold=config.threshold,
        forward_fill_btc=args.forward_fill_btc,
    )


def _load_series_inputs(run: _Run, kinds) -> tuple:
    needs_catalog = any(_series_requirements(k)[0] for k in kinds)
    needs_store = any(_series_requirements(k)[1] for k in kinds)
    needs_btc = any(_series_requirements(k)[2] for k in kinds)
    catalog = _load_catalog(run) if needs_catalog else None
    store = None
    if needs_store:
        store = _load_store(run)
        attach_embedding_indices(catalog, store)
    if needs_btc:
        _require(run.config, "btc_csv")
        run.record_input(run.config.btc_csv)
    window = _resolve_window(run, catalog)
    return catalog, store, window


def _cmd_series(run: _Run, args) -> None:
    kind = SeriesKind.parse(args.kind)
    catalog, store, window = _load_series_inputs(run, [kind])
    series = _build_one_series(run, kind, catalog, store, window, args)
    name = f"series_{kind.value}.csv"
    series.write_csv(str(run.out / name))
    run.seal_text(name)
    defined = sum(1 for v in series.values if v is not None)
    run.write_json("series.json", {
        "kind": kind.value,
        "sampling": series.sampling.value,
        "buckets": len(series.bucket_starts),
        "defined_buckets": defined,
    })


def _cmd_tlcc(run: _Run, args) -> None:
    kind_a = SeriesKind.parse(args.series_a)
    kind_b = SeriesKind.parse(args.series_b)
    catalog, store, window = _load_series_inputs(run, [kind_a, kind_b])
    series_a = _build_one_series(run, kind_a, catalog, store, window, args)
    series_b = _build_one_series(run, kind_b, catalog, store, window, args)
    result = tlcc(series_a, series_b, max_lag=run.config.tlcc_max_lag)
    result.write_csv(str(run.out / "tlcc.csv"))
    run.seal_text("tlcc.csv")
    run.write_json("tlcc.json", {
        "series_a": kind_a.value,
        "series_b": kind_b.value,
        "max_lag": run.config.tlcc_max_lag,
        "peak_lag": result.peak_lag,
        "peak_r": result.peak_r,
        "defined_lags": sum(1 for r in result.correlations if r is not None),
    })


def _make_toy_oracle(name: str):
    grid = FeatureGrid()
    factories = {
        "additive": additive_toy,
        "and": conjunction_toy,
        "dummy": dummy_feature_toy,
        "constant": constant_toy,
    }
    return factories[name](grid)


def _cmd_explain(run: _Run, args) -> None:
    if (args.toy is None) == (args.oracle_cmd is None):
        raise ConfigError("explain needs exactly one of --toy or --oracle-cmd")
    oracle = (_make_toy_oracle(args.toy) if args.toy is not None
              else ProcessOracle(shlex.split(args.oracle_cmd)))
    try:
        result = explain_pair(
            oracle, args.pair_id, samples=args.samples, seed=run.config.seed,
            csv_path=str(run.out / "explanation.csv"),
            png_path=str(run.out / "explanation.png"))
    finally:
        oracle.close()
    run.seal_text("explanation.csv")
    run.seal_png("explanation.png")
    run.write_json("explain.json", {
        "pair_id": args.pair_id,
        "samples": args.samples,
        "samples_used": result.samples_used,
        "base_value": result.base_value,
        "full_value": result.full_value,
        "efficiency_residual": result.efficiency_residual,
        "oracle": args.toy if args.toy is not None else "process",
    })


_COMMANDS = {
    "build-graph": _cmd_build_graph,
    "build-collections": _cmd_build_collections,
    "stats": _cmd_stats,
    "powerlaw": _cmd_powerlaw,
    "communities": _cmd_communities,
    "market": _cmd_market,
    "series": _cmd_series,
    "tlcc": _cmd_tlcc,
    "explain": _cmd_explain,
}

_SERIES_KINDS = [k.value for k in SeriesKind]


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="PATH", help="JSON config file")
    shared.add_argument("--metadata", metavar="PATH", help="asset metadata TSV")
    shared.add_argument("--transactions", metavar="PATH", help="transactions TSV")
    shared.add_argument("--embeddings", metavar="PATH", help="embedding matrix file")
    shared.add_argument("--ids", metavar="PATH", help="embedding row id file")
    shared.add_argument("--btc-csv", dest="btc_csv", metavar="PATH",
                        help="Date,Close price CSV")
    shared.add_argument("--output-dir", dest="output_dir", metavar="DIR")
    shared.add_argument("--t-start", dest="t_start", type=int,
                        help="window start, epoch seconds (inclusive)")
    shared.add_argument("--t-end", dest="t_end", type=int,
                        help="window end, epoch seconds (inclusive)")
    shared.add_argument("--threshold", type=float, help="similarity cutoff in (0, 1]")
    shared.add_argument("--criterion", choices=["min", "avg", "max"],
                        help="collection linkage criterion")
    shared.add_argument("--sampling", choices=["weekly", "monthly"])
    shared.add_argument("--tlcc-max-lag", dest="tlcc_max_lag", type=int,
                        help="max lag in buckets (default 12 monthly, 52 weekly)")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--workers", type=int)

    parser = argparse.ArgumentParser(
        prog="inspnet",
        description="Time-respecting visual-inspiration graphs and their analyses.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("build-graph", parents=[shared],
                       help="asset-level inspiration edges")
    p.add_argument("--format", choices=["tsv", "dot"], default="tsv")

    sub.add_parser("build-collections", parents=[shared],
                   help="collection-level weighted edges")
    sub.add_parser("stats", parents=[shared], help="structural graph summary")

    p = sub.add_parser("powerlaw", parents=[shared],
                       help="discrete power-law fit of the degree distribution")
    p.add_argument("--degree", choices=["in", "out", "total"], default="in")
    p.add_argument("--bootstraps", type=int, default=1000)

    sub.add_parser("communities", parents=[shared],
                   help="modularity communities of the collection graph")

    p = sub.add_parser("market", parents=[shared],
                       help="financial indicators by inspiration role")
    p.add_argument("--pooled", action="store_true",
                   help="pool transactions instead of per-asset means")

    series_flags = argparse.ArgumentParser(add_help=False)
    series_flags.add_argument("--edges-only", dest="edges_only",
                              action="store_true",
                              help="restrict similarity averages to pairs at "
                                   "or above the threshold")
    series_flags.add_argument("--pair-cap", dest="pair_cap", type=int,
                              default=5_000_000,
                              help="seeded subsample size above this many pairs")
    series_flags.add_argument("--forward-fill-btc", dest="forward_fill_btc",
                              action="store_true",
                              help="carry the last close across empty buckets")

    p = sub.add_parser("series", parents=[shared, series_flags],
                       help="one calendar-bucketed series as CSV")
    p.add_argument("--kind", choices=_SERIES_KINDS, required=True)

    p = sub.add_parser("tlcc", parents=[shared, series_flags],
                       help="lagged cross-correlation of two series")
    p.add_argument("--series-a", dest="series_a", choices=_SERIES_KINDS,
                   required=True)
    p.add_argument("--series-b", dest="series_b", choices=_SERIES_KINDS,
                   required=True)

    p = sub.add_parser("explain", parents=[shared],
                       help="per-patch attribution of one pair's similarity")
    p.add_argument("--pair-id", dest="pair_id", required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--toy", choices=["additive", "and", "dummy", "constant"],
                   help="built-in oracle for self-contained runs")
    p.add_argument("--oracle-cmd", dest="oracle_cmd",
                   help="external oracle command line")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if not logging.getLogger().handlers:
        logging.basicConfig(
            stream=sys.stderr, level=logging.INFO,
            format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _resolve_config(args)
        run = _Run(args.subcommand, config, args.config)
        _COMMANDS[args.subcommand](run, args)
        run.write_manifest()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    return 0
