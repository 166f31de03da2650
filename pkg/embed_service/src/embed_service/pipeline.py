"""Batch embedding jobs: images and directories in, EMBV1 + ids out."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backbone import DEFAULT_MODEL, Backbone
from .embv1 import write_embv1

logger = logging.getLogger(__name__)

# JPEG commonly ships under both suffixes; matching is case-insensitive.
IMAGE_SUFFIXES = (".png", ".jpeg", ".jpg", ".webp")


class DataError(ValueError):
    """Raised when job inputs are missing or unusable."""


@dataclass
class EmbedJob:
    """One embedding run: where the images are and where the rows go."""

    images: list[str]
    out: str
    ids_out: str
    batch_size: int = 16
    model: str = DEFAULT_MODEL
    device: str | None = None


@dataclass
class EmbedReport:
    """What an embedding run produced and what it had to skip."""

    ids: list[str] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    d: int = 0


def _collect_paths(entries: list[str]) -> tuple[list[Path], list[tuple[str, str]]]:
    paths: list[Path] = []
    skipped: list[tuple[str, str]] = []
    for entry in entries:
        p = Path(entry)
        if p.is_dir():
            for child in sorted(p.iterdir()):
                if child.is_file() and child.suffix.lower() in IMAGE_SUFFIXES:
                    paths.append(child)
        elif p.is_file():
            if p.suffix.lower() in IMAGE_SUFFIXES:
                paths.append(p)
            else:
                skipped.append((str(p), f"unsupported suffix {p.suffix!r}"))
        else:
            raise DataError(f"input path does not exist: {entry}")
    return paths, skipped


def _decode(path: Path) -> Image.Image | None:
    try:
        img = Image.open(path)
        img.load()
        return img
    except (UnidentifiedImageError, OSError) as exc:
        logger.warning("skipping %s: %s", path, exc)
        return None


def embed_images(job: EmbedJob, backbone: Backbone | None = None) -> EmbedReport:
    """Embed every decodable image in the job and write EMBV1 outputs.

    Directories are scanned one level deep in sorted name order; explicit
    file paths keep their given order. Row ids are the file stems, so a
    file listed twice yields two rows under the same id (the report and a
    warning call it out, since id-keyed consumers reject duplicates).

    Parameters
    ----------
    job : EmbedJob
        Inputs, outputs, batching, and model selection.
    backbone : Backbone, optional
        Reuse an already-loaded encoder; loaded from ``job.model`` when
        omitted.

    Returns
    -------
    EmbedReport
        Row ids in output order plus (path, reason) skip entries.
    """
    if backbone is None:
        backbone = Backbone(job.model, device=job.device)
    paths, skipped = _collect_paths(job.images)
    report = EmbedReport(skipped=skipped, d=backbone.d)

    rows: list[np.ndarray] = []
    batch_imgs: list[Image.Image] = []

    def flush() -> None:
        if batch_imgs:
            rows.append(backbone.embed(batch_imgs, batch_size=job.batch_size))
            batch_imgs.clear()

    for path in paths:
        img = _decode(path)
        if img is None:
            report.skipped.append((str(path), "undecodable image"))
            continue
        batch_imgs.append(img)
        report.ids.append(path.stem)
        if len(batch_imgs) == job.batch_size:
            flush()
    flush()

    if len(set(report.ids)) != len(report.ids):
        logger.warning("duplicate row ids in output; id-keyed loaders will reject this file")

    vectors = (np.concatenate(rows, axis=0) if rows
               else np.zeros((0, backbone.d), dtype=np.float32))
    write_embv1(job.out, job.ids_out, report.ids, vectors)
    logger.info("embedded %d image(s) (d=%d), skipped %d, wrote %s",
                len(report.ids), backbone.d, len(report.skipped), job.out)
    return report
