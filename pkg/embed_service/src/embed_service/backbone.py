"""Vision-transformer backbone: images in, [CLS]-pooled vectors out."""

from __future__ import annotations

import logging

import numpy as np
import torch
from PIL import Image
from transformers import ViTModel

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "google/vit-base-patch16-224"


class ModelError(RuntimeError):
    """Raised when the backbone weights cannot be loaded."""


class Backbone:
    """A frozen ViT encoder pooled at the [CLS] token.

    The model runs in inference mode only; no weights are ever updated.
    Preprocessing is fixed to the stock ViT recipe: RGB, bilinear resize
    to the model's input size, scale to [0, 1], then normalize with
    mean 0.5 and std 0.5 per channel.

    Parameters
    ----------
    model : str
        Hugging Face model name or a local directory created by
        ``save_pretrained``.
    device : str, optional
        Torch device string; defaults to CPU.
    """

    def __init__(self, model: str = DEFAULT_MODEL, device: str | None = None):
        try:
            self._model = ViTModel.from_pretrained(model)
        except (OSError, ValueError) as exc:
            raise ModelError(
                f"cannot load model weights from {model!r}; pass a local "
                f"directory containing a saved checkpoint ({exc})") from exc
        self._device = torch.device(device or "cpu")
        self._model.to(self._device)
        self._model.eval()
        self._input_size = int(self._model.config.image_size)
        # d follows the checkpoint; nothing downstream assumes a fixed width.
        self.d = int(self._model.config.hidden_size)
        self.name = model
        logger.info("loaded %s (d=%d, input %dpx) on %s",
                    model, self.d, self._input_size, self._device)

    def _preprocess(self, images: list[Image.Image]) -> torch.Tensor:
        arrays = []
        for img in images:
            rgb = img.convert("RGB").resize(
                (self._input_size, self._input_size), Image.Resampling.BILINEAR)
            arr = np.asarray(rgb, dtype=np.float32) / 255.0
            arrays.append((arr - 0.5) / 0.5)
        stacked = np.stack(arrays).transpose(0, 3, 1, 2)
        return torch.from_numpy(np.ascontiguousarray(stacked))

    def embed(self, images: list[Image.Image], batch_size: int = 16) -> np.ndarray:
        """Embed decoded images as [CLS] vectors.

        Parameters
        ----------
        images : list of PIL.Image.Image
            Already-decoded images; any mode, converted to RGB here.
        batch_size : int
            Maximum images per forward pass.

        Returns
        -------
        ndarray, shape (len(images), d), dtype float32
            One [CLS]-pooled row per image, in input order.
        """
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if not images:
            return np.zeros((0, self.d), dtype=np.float32)
        rows = []
        with torch.inference_mode():
            for lo in range(0, len(images), batch_size):
                pixels = self._preprocess(images[lo:lo + batch_size])
                out = self._model(pixel_values=pixels.to(self._device))
                cls = out.last_hidden_state[:, 0, :]
                rows.append(cls.cpu().numpy().astype(np.float32, copy=True))
        return np.concatenate(rows, axis=0)
