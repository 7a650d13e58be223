from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from sidar_forge.pipeline import generate_dataset
from sidar_forge.scene import SceneConfig

DATA = Path(__file__).parent / "data"


def painting(seed=0, width=128, height=96):
    """Smooth, colourful synthetic texture (sum of low-frequency waves)."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:height, 0:width] / max(width, height)
    img = np.zeros((height, width, 3))
    for c in range(3):
        for _ in range(4):
            fx, fy = rng.uniform(1, 8, size=2)
            ph = rng.uniform(0, 2 * np.pi)
            img[..., c] += np.sin(2 * np.pi * (fx * x + fy * y) / 2 + ph)
    img = (img - img.min()) / (img.max() - img.min())
    return (40 + 175 * img).astype(np.uint8)


def photo():
    with Image.open(DATA / "astronaut_256.png") as im:
        return np.asarray(im.convert("RGB"))


@pytest.fixture
def texture():
    return painting()


@pytest.fixture
def corpus(tmp_path):
    d = tmp_path / "corpus"
    d.mkdir()
    for k in range(3):
        Image.fromarray(painting(k)).save(d / f"img{k}.png")
    return d


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Two misaligned scenes, 4 frames each, rendered small and fast."""
    base = tmp_path_factory.mktemp("ds")
    corpus = base / "corpus"
    corpus.mkdir()
    for k in range(3):
        Image.fromarray(painting(k)).save(corpus / f"img{k}.png")
    out = base / "out"
    cfg = SceneConfig(seed=7, mode="misaligned", frames=4, resolution=48, spp=2, max_bounces=3)
    manifest, failures = generate_dataset(cfg, corpus, out, scenes=2)
    assert not failures
    return out
