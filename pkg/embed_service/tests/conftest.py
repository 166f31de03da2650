"""Shared fixtures: a tiny deterministic ViT checkpoint and sample images."""

import numpy as np
import pytest
import torch
from PIL import Image
from transformers import ViTConfig, ViTModel

from embed_service import Backbone


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A seeded 1-layer ViT checkpoint small enough for fast CPU tests."""
    path = tmp_path_factory.mktemp("checkpoint") / "tiny-vit"
    torch.manual_seed(0)
    config = ViTConfig(hidden_size=32, num_hidden_layers=1,
                       num_attention_heads=2, intermediate_size=64,
                       image_size=224, patch_size=16)
    ViTModel(config).save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def backbone(tiny_model_dir):
    return Backbone(tiny_model_dir)


def save_noise_png(path, seed, size=(96, 80)):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 256, (size[1], size[0], 3), dtype=np.uint8)
    Image.fromarray(arr).save(path)
    return str(path)


def save_gradient_png(path, size=(120, 90)):
    x = np.linspace(0, 255, size[0], dtype=np.uint8)
    arr = np.stack([np.tile(x, (size[1], 1))] * 3, axis=-1)
    Image.fromarray(arr).save(path)
    return str(path)


def save_solid_png(path, color, size=(64, 64)):
    arr = np.full((size[1], size[0], 3), color, dtype=np.uint8)
    Image.fromarray(arr).save(path)
    return str(path)


@pytest.fixture()
def image_pair(tmp_path):
    """Two visibly different images: smooth gradient vs seeded noise."""
    a = save_gradient_png(tmp_path / "grad.png")
    b = save_noise_png(tmp_path / "noise.png", seed=11)
    return a, b
