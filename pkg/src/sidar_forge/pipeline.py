"""End-to-end dataset generation: sample, render, compute homographies, write."""

from __future__ import annotations

import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from . import geometry as geo
from .dataset import (
    Corpus,
    SceneArtifacts,
    expected_pairs,
    frame_filename,
    ingest_corpus,
    scene_dirname,
    write_manifest,
    write_scene,
)
from .errors import SidarError
from .render import RenderBudget, load_texture, render_label, render_mask, render_view
from .rng import derive_seed
from .scene import SCHEMA, SceneConfig, SceneRecord, TextureRef, sample_scene

log = logging.getLogger(__name__)

DLT_AGREEMENT_TOL = 1e-6


class HomographyMismatch(SidarError):
    """The analytic and DLT homographies of a pair disagree."""


def scene_homographies(scene: SceneRecord, tol: float = DLT_AGREEMENT_TOL) -> dict:
    """All ordered-pair homographies, each cross-checked against DLT on the plane corners."""
    cams = scene.cameras()
    table = {}
    for i, j in expected_pairs(scene.n_frames):
        H = geo.homography_between(cams[i], cams[j])
        H_dlt = geo.corner_homography(cams[i], cams[j], scene.plane)
        err = geo.homography_distance(H, H_dlt)
        if not err < tol:
            raise HomographyMismatch(f"frames {i}->{j}: analytic vs DLT distance {err:.3g}")
        table[(i, j)] = H
    return table


def render_scene(scene: SceneRecord, texture) -> SceneArtifacts:
    budget = RenderBudget.of(scene)
    n = scene.n_frames
    images = [render_view(scene, k, budget, texture) for k in range(1, n + 1)]
    masks = [render_mask(scene, k) for k in range(1, n + 1)]
    label = render_label(scene, budget=budget, texture=texture)
    return SceneArtifacts(images, masks, label, scene_homographies(scene))


@dataclass
class SceneResult:
    index: int
    ok: bool
    entry: dict = field(default_factory=dict)
    error: str = ""


def scene_seed(master_seed: int, index: int) -> int:
    return derive_seed(master_seed, index)


def generate_scene(index: int, config: SceneConfig, corpus_root, texture: TextureRef, output_root) -> SceneResult:
    seed = scene_seed(config.seed, index)
    try:
        record = sample_scene(config.replace(seed=seed), texture, scene_index=index)
        pixels = load_texture(Path(corpus_root) / texture.path)
        artifacts = render_scene(record, pixels)
        write_scene(output_root, record, artifacts)
    except (SidarError, OSError, ValueError) as exc:
        log.error("scene %d (seed %d) failed: %s", index, seed, exc)
        return SceneResult(index, False, error=f"{type(exc).__name__}: {exc}")
    n = record.n_frames
    entry = {
        "index": index,
        "dir": scene_dirname(index),
        "seed": seed,
        "mode": record.mode,
        "frames": n,
        "texture": {"path": texture.path, "sha256": texture.sha256},
        "artifacts": {
            "scene": "scene.json",
            "homographies": "homographies.json",
            "label": "label.png",
            "images": [f"images/{frame_filename(k)}" for k in range(1, n + 1)],
            "masks": [f"masks/{frame_filename(k)}" for k in range(1, n + 1)],
        },
        "homography_pairs": len(artifacts.homographies),
    }
    return SceneResult(index, True, entry)


def _run(args):
    return generate_scene(*args)


def generate_dataset(config: SceneConfig, corpus: Corpus | str | Path, output_root, scenes: int,
                     jobs: int = 1, echo=None) -> tuple[dict, list]:
    """Generate ``scenes`` scenes into ``output_root`` and write the root manifest.

    Returns the manifest and the list of failed SceneResults. Scene k uses
    texture ``k mod len(corpus)`` and seed ``derive_seed(config.seed, k)``,
    so the output does not depend on ``jobs``.
    """
    if not isinstance(corpus, Corpus):
        corpus = ingest_corpus(corpus)
    out = Path(output_root)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(k, config, corpus.root, corpus.textures[k % len(corpus)], out) for k in range(scenes)]
    if jobs > 1 and scenes > 1:
        ctx = multiprocessing.get_context("fork") if hasattr(multiprocessing, "get_context") else None
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            results = list(pool.map(_run, tasks))
    else:
        results = [_run(t) for t in tasks]
    for r in results:
        if echo:
            if r.ok:
                e = r.entry
                echo(f"{e['dir']}: seed={e['seed']} mode={e['mode']} frames={e['frames']} "
                     f"pairs={e['homography_pairs']} texture={e['texture']['path']}")
            else:
                echo(f"{scene_dirname(r.index)}: FAILED {r.error}")
    manifest = {
        "schema": SCHEMA,
        "generator_version": __version__,
        "master_seed": config.seed,
        "config": config.to_dict(),
        "scenes_requested": scenes,
        "corpus": {"root": str(corpus.root), "textures": len(corpus), "skipped": corpus.skipped},
        "scenes": [r.entry for r in results if r.ok],
        "failures": [{"index": r.index, "seed": scene_seed(config.seed, r.index), "error": r.error}
                     for r in results if not r.ok],
    }
    write_manifest(out, manifest)
    return manifest, [r for r in results if not r.ok]
