"""Masked-pair similarity oracle speaking line-delimited JSON on stdio.

The serving side of the explanation protocol: a client sends coalition
masks over square pixel cells of an image pair, this process blurs the
corrupted cells, re-embeds both images, and replies with the pair's
cosine similarity mapped into [0, 1].
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass
from typing import IO

import numpy as np
from PIL import Image, ImageFilter, UnidentifiedImageError

from .backbone import DEFAULT_MODEL, Backbone
from .pipeline import DataError

logger = logging.getLogger(__name__)


@dataclass
class OracleSettings:
    """Knobs for one oracle session.

    ``sigma`` is the Gaussian blur standard deviation in pixels and
    defaults to ``cell / 4`` when left unset.
    """

    model: str = DEFAULT_MODEL
    device: str | None = None
    cell: int = 64
    size: int = 512
    sigma: float | None = None


class ProtocolViolation(Exception):
    """A malformed or out-of-contract record from the client."""


def _cosine01(a: np.ndarray, b: np.ndarray) -> float:
    av = a.astype(np.float64)
    bv = b.astype(np.float64)
    na, nb = np.linalg.norm(av), np.linalg.norm(bv)
    if na == 0.0 or nb == 0.0:
        return 0.0
    cos = float(av @ bv / (na * nb))
    # negative similarity reads as probability 0; the upper clamp only
    # absorbs float rounding above 1.
    return min(1.0, max(0.0, cos))


class MaskedPair:
    """One image pair prepared for cell-masked re-embedding.

    Both images are resized to a square working canvas and blurred once;
    a coalition mask then composites original pixels over the blurred
    copy for every kept cell, so corrupted cells show only blur.
    """

    def __init__(self, image_a: str, image_b: str, settings: OracleSettings,
                 backbone: Backbone | None = None):
        if settings.cell < 1 or settings.size < 1:
            raise DataError(
                f"cell and size must be positive, got cell={settings.cell} "
                f"size={settings.size}")
        if settings.cell > settings.size:
            raise DataError(
                f"cell {settings.cell} exceeds canvas size {settings.size}")
        sigma = settings.cell / 4.0 if settings.sigma is None else settings.sigma
        if sigma <= 0:
            raise DataError(f"sigma must be positive, got {sigma}")

        self.settings = settings
        self.backbone = backbone or Backbone(settings.model, device=settings.device)
        self.per_side = -(-settings.size // settings.cell)
        self.features_per_image = self.per_side * self.per_side

        self._orig: list[np.ndarray] = []
        self._blur: list[np.ndarray] = []
        for path in (image_a, image_b):
            try:
                img = Image.open(path)
                img.load()
            except (UnidentifiedImageError, OSError) as exc:
                raise DataError(f"cannot decode {path}: {exc}") from exc
            canvas = img.convert("RGB").resize(
                (settings.size, settings.size), Image.Resampling.BILINEAR)
            self._orig.append(np.asarray(canvas, dtype=np.uint8))
            blurred = canvas.filter(ImageFilter.GaussianBlur(radius=sigma))
            self._blur.append(np.asarray(blurred, dtype=np.uint8))

    def _composite(self, image_index: int, bits: list[int]) -> Image.Image:
        size, cell = self.settings.size, self.settings.cell
        keep = np.zeros((size, size), dtype=bool)
        for k, bit in enumerate(bits):
            if bit:
                row, col = divmod(k, self.per_side)
                keep[row * cell:min(size, (row + 1) * cell),
                     col * cell:min(size, (col + 1) * cell)] = True
        merged = np.where(keep[:, :, None], self._orig[image_index],
                          self._blur[image_index])
        return Image.fromarray(merged)

    def similarities(self, masks: list[list[int]]) -> list[float]:
        """Similarity in [0, 1] for each coalition mask.

        Parameters
        ----------
        masks : list of list of int
            Each row holds one 0/1 bit per feature across both images,
            image 0 first, row-major within an image; 1 keeps the cell,
            0 blurs it.

        Returns
        -------
        list of float
            ``max(0, cos)`` of the re-embedded pair, one per mask.
        """
        fpi = self.features_per_image
        staged: list[Image.Image] = []
        for row in masks:
            staged.append(self._composite(0, row[:fpi]))
            staged.append(self._composite(1, row[fpi:]))
        vectors = self.backbone.embed(staged)
        return [_cosine01(vectors[2 * i], vectors[2 * i + 1])
                for i in range(len(masks))]


def _parse_eval_masks(record: dict, total_features: int) -> list[list[int]]:
    masks = record.get("masks")
    if not isinstance(masks, list):
        raise ProtocolViolation("eval record carries no masks list")
    parsed: list[list[int]] = []
    for i, row in enumerate(masks):
        if not isinstance(row, list) or len(row) != total_features:
            raise ProtocolViolation(
                f"masks[{i}] must be a list of {total_features} bits")
        bits: list[int] = []
        for j, bit in enumerate(row):
            if isinstance(bit, bool) or (isinstance(bit, int) and bit in (0, 1)):
                bits.append(int(bit))
            else:
                raise ProtocolViolation(f"masks[{i}][{j}] is not a 0/1 bit: {bit!r}")
        parsed.append(bits)
    return parsed


def serve_oracle(image_a: str, image_b: str, settings: OracleSettings,
                 stdin: IO[str] | None = None, stdout: IO[str] | None = None,
                 backbone: Backbone | None = None) -> int:
    """Run the oracle loop until close, EOF, or a protocol violation.

    Protocol, one JSON record per line:

    - ``{"op": "init", ...}`` is answered with ``{"features_per_image",
      "width", "height", "cell"}``.
    - ``{"op": "eval", "masks": [[bit, ...], ...]}`` is answered with
      ``{"sims": [...]}``, one value per mask.
    - ``{"op": "close"}`` ends the session.

    Any malformed record gets a structured ``{"error": ...}`` reply and
    the loop stops with exit status 3. EOF without close is a clean
    shutdown.

    Returns
    -------
    int
        Process exit status: 0 on clean shutdown, 3 on violation.
    """
    inp = stdin if stdin is not None else sys.stdin
    out = stdout if stdout is not None else sys.stdout
    pair = MaskedPair(image_a, image_b, settings, backbone=backbone)

    def reply(payload: dict) -> None:
        out.write(json.dumps(payload, sort_keys=True) + "\n")
        out.flush()

    while True:
        line = inp.readline()
        if not line:
            logger.info("input stream closed; shutting down")
            return 0
        try:
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ProtocolViolation(f"malformed record: {exc}") from exc
            if not isinstance(record, dict):
                raise ProtocolViolation("record is not a JSON object")
            op = record.get("op")
            if op == "init":
                reply({"features_per_image": pair.features_per_image,
                       "width": pair.settings.size,
                       "height": pair.settings.size,
                       "cell": pair.settings.cell})
            elif op == "eval":
                masks = _parse_eval_masks(record, 2 * pair.features_per_image)
                reply({"sims": pair.similarities(masks)})
            elif op == "close":
                logger.info("close received; shutting down")
                return 0
            else:
                raise ProtocolViolation(f"unknown op {op!r}")
        except ProtocolViolation as exc:
            logger.error("protocol violation: %s", exc)
            reply({"error": str(exc)})
            return 3
