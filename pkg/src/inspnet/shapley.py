"""Sampling Shapley attributions over image-patch features.

The explainer treats the pair-similarity model as a black box: it sends
coalitions (bit masks over the features of both images) to an oracle and
averages marginal contributions along random feature permutations. Each
permutation telescopes from the empty to the full coalition, so the
attribution total matches full minus base value by construction and the
estimator is unbiased for the factorially-weighted coalition average.

Masking pixels is the oracle's job; the toy oracles here exist so the
estimator can be tested without any image model.
"""

from __future__ import annotations

import json
import math
import os
import select
import shlex
import subprocess
from dataclasses import dataclass

import numpy as np


class OracleError(Exception):
    """Oracle subprocess misbehaved: protocol violation, timeout, or death."""


@dataclass(frozen=True)
class FeatureGrid:
    """Square-cell feature layout over a pair of equally-sized images."""

    image_width: int = 512
    image_height: int = 512
    cell: int = 64

    def __post_init__(self) -> None:
        if self.image_width < 1 or self.image_height < 1 or self.cell < 1:
            raise ValueError(
                f"invalid grid: {self.image_width}x{self.image_height} cell {self.cell}")

    def cols(self) -> int:
        return -(-self.image_width // self.cell)

    def rows(self) -> int:
        return -(-self.image_height // self.cell)

    def features_per_image(self) -> int:
        return self.rows() * self.cols()

    def total_features(self) -> int:
        return 2 * self.features_per_image()

    def feature_position(self, feature: int) -> tuple[int, int, int]:
        """(image_index, row, col) of a flat feature index."""
        per_image = self.features_per_image()
        image_index, offset = divmod(feature, per_image)
        row, col = divmod(offset, self.cols())
        return image_index, row, col


@dataclass(frozen=True)
class Coalition:
    """Feature subset as a present/corrupted bit per feature."""

    mask: tuple

    def size(self) -> int:
        return sum(self.mask)


@dataclass(frozen=True)
class ExplanationMap:
    """Per-feature attributions with the bookkeeping needed to judge them."""

    phi: np.ndarray
    stderr: np.ndarray
    base_value: float
    full_value: float
    samples_used: int
    efficiency_residual: float


class ToyOracle:
    """In-process oracle wrapping a mask -> similarity callable."""

    transport = "in_process_toy"

    def __init__(self, fn, grid: FeatureGrid):
        self._fn = fn
        self.grid = grid

    def init(self, pair_id: str) -> dict:
        del pair_id
        return {
            "features_per_image": self.grid.features_per_image(),
            "width": self.grid.image_width,
            "height": self.grid.image_height,
            "cell": self.grid.cell,
        }

    def evaluate(self, masks: np.ndarray) -> np.ndarray:
        return np.array([float(self._fn(mask)) for mask in masks], dtype=np.float64)

    def close(self) -> None:
        pass


def additive_toy(grid: FeatureGrid) -> ToyOracle:
    """M(S) = |S| / |F|; every feature is worth exactly 1/|F|."""
    total = grid.total_features()
    return ToyOracle(lambda mask: float(mask.sum()) / total, grid)


def conjunction_toy(grid: FeatureGrid) -> ToyOracle:
    """M(S) = 1 only for the full coalition; equal shares by symmetry."""
    return ToyOracle(lambda mask: 1.0 if mask.all() else 0.0, grid)


def dummy_feature_toy(grid: FeatureGrid, dummy: int = 0) -> ToyOracle:
    """Additive oracle that provably ignores one feature."""
    total = grid.total_features()
    live = [f for f in range(total) if f != dummy]

    def fn(mask: np.ndarray) -> float:
        return float(mask[live].sum()) / (total - 1)

    return ToyOracle(fn, grid)


def constant_toy(grid: FeatureGrid, value: float = 1.0) -> ToyOracle:
    """M(S) = value regardless of the coalition."""
    return ToyOracle(lambda mask: value, grid)


class _LineChannel:
    """Blocking line reader over a raw pipe with a hard timeout."""

    def __init__(self, fd: int, timeout: float):
        self._fd = fd
        self._timeout = timeout
        self._buffer = bytearray()

    def read_line(self) -> str:
        while True:
            newline = self._buffer.find(b"\n")
            if newline >= 0:
                line = self._buffer[:newline].decode("utf-8")
                del self._buffer[:newline + 1]
                return line
            ready, _, _ = select.select([self._fd], [], [], self._timeout)
            if not ready:
                raise OracleError(f"oracle silent for {self._timeout:.0f}s")
            chunk = os.read(self._fd, 65536)
            if not chunk:
                raise OracleError("oracle closed its output stream mid-session")
            self._buffer.extend(chunk)


class ProcessOracle:
    """Client for an external oracle speaking line-delimited JSON on stdio."""

    transport = "external_process"

    def __init__(self, command: str | list[str], timeout: float = 300.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise OracleError(f"cannot start oracle {argv[0]!r}: {exc}") from None
        self._channel = _LineChannel(self._proc.stdout.fileno(), timeout)

    def _send(self, record: dict) -> None:
        try:
            self._proc.stdin.write((json.dumps(record, sort_keys=True) + "\n").encode())
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise OracleError(f"oracle pipe broke: {exc}") from None

    def _recv(self) -> dict:
        line = self._channel.read_line()
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            raise OracleError(f"oracle sent non-JSON line: {line[:200]!r}") from None
        if not isinstance(record, dict):
            raise OracleError(f"oracle sent a non-object record: {line[:200]!r}")
        if "error" in record:
            raise OracleError(f"oracle reported: {record['error']}")
        return record

    def init(self, pair_id: str) -> dict:
        self._send({"op": "init", "pair_id": pair_id})
        reply = self._recv()
        missing = {"features_per_image", "width", "height", "cell"} - reply.keys()
        if missing:
            raise OracleError(f"handshake reply missing {sorted(missing)}")
        return reply

    def evaluate(self, masks: np.ndarray) -> np.ndarray:
        batch = [[int(b) for b in row] for row in masks]
        self._send({"op": "eval", "masks": batch})
        reply = self._recv()
        sims = reply.get("sims")
        if not isinstance(sims, list) or len(sims) != len(batch):
            raise OracleError(
                f"eval reply carries {len(sims) if isinstance(sims, list) else 'no'} "
                f"sims for {len(batch)} masks")
        out = np.array(sims, dtype=np.float64)
        if not np.all(np.isfinite(out)) or out.min() < 0.0 or out.max() > 1.0:
            raise OracleError("eval reply has similarities outside [0, 1]")
        return out

    def close(self) -> None:
        try:
            self._send({"op": "close"})
        except OracleError:
            pass
        try:
            self._proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        finally:
            self._proc.stdin.close()
            self._proc.stdout.close()


def shapley_estimate(
    oracle, grid: FeatureGrid, samples: int = 10_000, seed: int = 0
) -> ExplanationMap:
    """Monte-Carlo Shapley attributions from ``samples`` oracle evaluations.

    Draws random permutations and walks each from the empty coalition to
    the full one, crediting each feature with its marginal similarity
    change. A permutation costs |F| + 1 evaluations, so the number of
    permutations is samples // (|F| + 1); identical seeds give
    bit-identical attributions.
    """
    total = grid.total_features()
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    permutations = samples // (total + 1)
    if permutations < 1:
        raise ValueError(
            f"samples={samples} cannot cover one permutation of {total} features "
            f"({total + 1} evaluations)")

    rng = np.random.default_rng(seed)
    sums = np.zeros(total, dtype=np.float64)
    sumsq = np.zeros(total, dtype=np.float64)
    base_value = math.nan
    full_value = math.nan
    for _ in range(permutations):
        order = rng.permutation(total)
        masks = np.zeros((total + 1, total), dtype=bool)
        for k, feature in enumerate(order):
            masks[k + 1] = masks[k]
            masks[k + 1, feature] = True
        values = oracle.evaluate(masks)
        if math.isnan(base_value):
            base_value = float(values[0])
            full_value = float(values[-1])
        marginals = np.diff(values)
        sums[order] += marginals
        sumsq[order] += marginals * marginals

    phi = sums / permutations
    variance = np.maximum(sumsq / permutations - phi * phi, 0.0)
    stderr = np.sqrt(variance / permutations)
    residual = abs(float(phi.sum()) - (full_value - base_value))
    return ExplanationMap(
        phi=phi,
        stderr=stderr,
        base_value=base_value,
        full_value=full_value,
        samples_used=permutations * (total + 1),
        efficiency_residual=residual,
    )


def write_explanation_csv(path: str, grid: FeatureGrid, result: ExplanationMap) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("image_index,row,col,phi\n")
        for feature in range(grid.total_features()):
            image_index, row, col = grid.feature_position(feature)
            fh.write(f"{image_index},{row},{col},{result.phi[feature]:.10g}\n")


def write_heatmap_png(
    path: str, grid: FeatureGrid, result: ExplanationMap, cell_px: int = 24
) -> None:
    """Side-by-side diverging heatmap: red positive, blue negative."""
    from PIL import Image

    rows, cols = grid.rows(), grid.cols()
    scale = float(np.max(np.abs(result.phi))) or 1.0
    gutter = max(2, cell_px // 3)
    canvas = np.full(
        (rows * cell_px, 2 * cols * cell_px + gutter, 3), 255, dtype=np.uint8)
    for feature in range(grid.total_features()):
        image_index, row, col = grid.feature_position(feature)
        v = float(result.phi[feature]) / scale
        fade = int(round(255 * (1.0 - abs(v))))
        color = (255, fade, fade) if v >= 0 else (fade, fade, 255)
        x0 = image_index * (cols * cell_px + gutter) + col * cell_px
        y0 = row * cell_px
        canvas[y0:y0 + cell_px, x0:x0 + cell_px] = color
    Image.fromarray(canvas, mode="RGB").save(path, format="PNG")


def explain_pair(
    oracle,
    pair_id: str,
    samples: int = 10_000,
    seed: int = 0,
    csv_path: str | None = None,
    png_path: str | None = None,
) -> ExplanationMap:
    """Handshake for the pair's grid, estimate, and optionally export."""
    info = oracle.init(pair_id)
    grid = FeatureGrid(
        image_width=int(info["width"]),
        image_height=int(info["height"]),
        cell=int(info["cell"]),
    )
    if grid.features_per_image() != int(info["features_per_image"]):
        raise OracleError(
            f"oracle grid disagrees: {info['features_per_image']} features per "
            f"image vs computed {grid.features_per_image()}")
    result = shapley_estimate(oracle, grid, samples=samples, seed=seed)
    if csv_path:
        write_explanation_csv(csv_path, grid, result)
    if png_path:
        write_heatmap_png(png_path, grid, result)
    return result
