"""On-disk dataset layout, corpus ingestion and validation.

Layout of one scene::

    scene_00000/
        scene.json          full SceneRecord (replayable)
        homographies.json   every ordered pair (i, j), i != j, frame 0 = label
        label.png
        images/0001.png ... images/000n.png
        masks/0001.png  ... masks/000n.png

Homographies map pixel coordinates of frame i to frame j and are stored in
canonical form as row-major lists of nine doubles. JSON writes floats with
their shortest round-trip representation, so parsing gives back the exact
bits.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import geometry as geo
from .errors import CorruptManifest, EmptyCorpus, IncompleteArtifacts, IoFailure, MissingArtifact, UnreadableImage
from .scene import SCHEMA, SceneRecord, TextureRef

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp", ".gif", ".ppm"}
MIN_TEXTURE_SIZE = 32

SCENE_FILE = "scene.json"
HOMOGRAPHY_FILE = "homographies.json"
LABEL_FILE = "label.png"
MANIFEST_FILE = "manifest.json"

COCYCLE_TOL = 1e-6
CORNER_TOL = 1e-8
CANONICAL_TOL = 1e-9


def scene_dirname(index: int) -> str:
    return f"scene_{index:05d}"


def frame_filename(index: int) -> str:
    return f"{index:04d}.png"


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Corpus
# ---------------------------------------------------------------------------


@dataclass
class Corpus:
    root: Path
    textures: list[TextureRef]
    skipped: int = 0
    errors: list[UnreadableImage] = field(default_factory=list)

    def __len__(self):
        return len(self.textures)

    def path(self, ref: TextureRef) -> Path:
        return self.root / ref.path


def ingest_corpus(directory) -> Corpus:
    """Decodable images of at least 32x32 under ``directory``, sorted by relative path.

    Files that are not images are counted in ``skipped``. Files that look
    like images but fail to decode, or are too small, are recorded in
    ``errors`` and skipped as well.
    """
    root = Path(directory)
    if not root.is_dir():
        raise IoFailure(f"corpus directory not readable: {root}")
    refs, errors, skipped = [], [], 0
    files = sorted((p for p in root.rglob("*") if p.is_file()), key=lambda p: p.relative_to(root).as_posix())
    for p in files:
        rel = p.relative_to(root).as_posix()
        try:
            with Image.open(p) as im:
                im.load()
                w, h = im.size
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            skipped += 1
            if p.suffix.lower() in IMAGE_SUFFIXES:
                errors.append(UnreadableImage(f"{rel}: {exc}"))
            continue
        if w < MIN_TEXTURE_SIZE or h < MIN_TEXTURE_SIZE:
            skipped += 1
            errors.append(UnreadableImage(f"{rel}: {w}x{h} is below {MIN_TEXTURE_SIZE}x{MIN_TEXTURE_SIZE}"))
            continue
        refs.append(TextureRef(rel, int(w), int(h), sha256_file(p)))
    if skipped:
        log.warning("skipped %d non-image or unreadable files in %s", skipped, root)
    if not refs:
        raise EmptyCorpus(f"no usable images in {root}")
    return Corpus(root, refs, skipped, errors)


# ---------------------------------------------------------------------------
# Scene artifacts
# ---------------------------------------------------------------------------


@dataclass
class SceneArtifacts:
    images: list  # uint8 (H, W, 3), frames 1..n
    masks: list  # uint8 (H, W), frames 1..n
    label: np.ndarray
    homographies: dict  # (i, j) -> (3, 3)


def homography_table(cameras, plane: geo.PlaneSpec | None = None) -> dict:
    """Plane-induced homography for every ordered pair of distinct frames."""
    table = {}
    for i, j in itertools.permutations(range(len(cameras)), 2):
        table[(i, j)] = geo.homography_between(cameras[i], cameras[j])
    return table


def expected_pairs(n_views: int) -> list:
    return list(itertools.permutations(range(n_views + 1), 2))


def table_to_json(table: dict, n_frames: int) -> dict:
    return {
        "schema": SCHEMA,
        "convention": "H maps pixel coordinates of frame i to frame j; frame 0 is the label",
        "frames": n_frames,
        "pairs": [
            {"i": int(i), "j": int(j), "h": [float(v) for v in np.asarray(table[(i, j)]).ravel()]}
            for i, j in sorted(table)
        ],
    }


def table_from_json(d: dict) -> dict:
    try:
        return {(int(r["i"]), int(r["j"])): np.array(r["h"], dtype=float).reshape(3, 3) for r in d["pairs"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptManifest(f"malformed homography table: {exc}") from exc


def _save_png(array, path):
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path, format="PNG")


def write_scene(output_root, scene: SceneRecord, artifacts: SceneArtifacts) -> Path:
    """Write one scene atomically: files go to a temp dir that is renamed into place."""
    n = scene.n_frames
    if len(artifacts.images) != n or len(artifacts.masks) != n or artifacts.label is None:
        raise IncompleteArtifacts(
            f"need {n} images, {n} masks and a label; got {len(artifacts.images)}, {len(artifacts.masks)}"
        )
    missing = set(expected_pairs(n)) - set(artifacts.homographies)
    if missing:
        raise IncompleteArtifacts(f"homography table lacks pairs {sorted(missing)[:5]}...")

    root = Path(output_root)
    final = root / scene_dirname(scene.scene_index)
    try:
        root.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{final.name}.", dir=root))
        try:
            (tmp / "images").mkdir()
            (tmp / "masks").mkdir()
            (tmp / SCENE_FILE).write_text(scene.to_json(), encoding="utf-8")
            table = {k: artifacts.homographies[k] for k in expected_pairs(n)}
            (tmp / HOMOGRAPHY_FILE).write_text(dumps(table_to_json(table, n + 1)), encoding="utf-8")
            _save_png(artifacts.label, tmp / LABEL_FILE)
            for k in range(1, n + 1):
                _save_png(artifacts.images[k - 1], tmp / "images" / frame_filename(k))
                _save_png(artifacts.masks[k - 1], tmp / "masks" / frame_filename(k))
            os.chmod(tmp, 0o755)
            if final.exists():
                shutil.rmtree(final)
            os.replace(tmp, final)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise
    except OSError as exc:
        raise IoFailure(f"failed to write {final}: {exc}") from exc
    return final


@dataclass
class SceneData:
    directory: Path
    record: SceneRecord
    homographies: dict
    label_path: Path
    image_paths: list
    mask_paths: list

    def image(self, index: int) -> np.ndarray:
        """Frame ``index`` as uint8 RGB; 0 is the label."""
        path = self.label_path if index == 0 else self.image_paths[index - 1]
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))

    def mask(self, index: int) -> np.ndarray:
        with Image.open(self.mask_paths[index - 1]) as im:
            return np.asarray(im)


def read_scene(directory) -> SceneData:
    d = Path(directory)
    scene_file = d / SCENE_FILE
    table_file = d / HOMOGRAPHY_FILE
    for p in (scene_file, table_file):
        if not p.is_file():
            raise MissingArtifact(p)
    try:
        record = SceneRecord.from_json(scene_file.read_text(encoding="utf-8"))
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptManifest(f"{scene_file}: {exc}") from exc
    try:
        table_json = json.loads(table_file.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise CorruptManifest(f"{table_file}: {exc}") from exc
    table = table_from_json(table_json)
    n = record.n_frames
    label = d / LABEL_FILE
    images = [d / "images" / frame_filename(k) for k in range(1, n + 1)]
    masks = [d / "masks" / frame_filename(k) for k in range(1, n + 1)]
    for p in [label, *images, *masks]:
        if not p.is_file():
            raise MissingArtifact(p)
    return SceneData(d, record, table, label, images, masks)


def write_manifest(output_root, manifest: dict) -> Path:
    path = Path(output_root) / MANIFEST_FILE
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(dumps(manifest), encoding="utf-8")
    os.replace(tmp, path)
    return path


def read_manifest(output_root) -> dict:
    path = Path(output_root) / MANIFEST_FILE
    if not path.is_file():
        raise MissingArtifact(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise CorruptManifest(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _check(passed=True, details=None):
    return {"passed": bool(passed), "details": list(details or [])}


def check_canonical(H) -> bool:
    H = np.asarray(H, dtype=float)
    if not np.all(np.isfinite(H)):
        return False
    if abs(abs(np.linalg.det(H)) - 1.0) > CANONICAL_TOL:
        return False
    flat = H.ravel()
    mags = np.abs(flat)
    k = int(np.flatnonzero(mags >= mags.max() * (1.0 - 1e-9))[0])
    return flat[k] > 0


def cocycle_failures(table: dict, n_frames: int, tol: float = COCYCLE_TOL) -> list:
    """Triples (i, j, k) where H_jk H_ij disagrees with H_ik."""
    bad = []
    for i, j, k in itertools.permutations(range(n_frames), 3):
        try:
            err = geo.homography_distance(geo.compose(table[(i, j)], table[(j, k)]), table[(i, k)])
        except (KeyError, ValueError):
            err = np.inf
        if not err < tol:
            bad.append((i, j, k))
    return bad


def suspect_pairs(failing_triples) -> list:
    """Ordered pairs implicated in the largest number of failing triples."""
    counts = {}
    for i, j, k in failing_triples:
        for pair in ((i, j), (j, k), (i, k)):
            counts[pair] = counts.get(pair, 0) + 1
    if not counts:
        return []
    top = max(counts.values())
    return sorted(p for p, c in counts.items() if c == top)


def validate_scene(directory) -> dict:
    """Run every per-scene check; failures are reported, never raised."""
    d = Path(directory)
    checks = {}
    try:
        data = read_scene(d)
    except MissingArtifact as exc:
        checks["manifest_completeness"] = _check(False, [f"MissingArtifact: {exc.path}"])
        checks["label_presence"] = _check(not str(exc.path).endswith(LABEL_FILE), [])
        return {"scene": d.name, "passed": False, "checks": checks}
    except CorruptManifest as exc:
        checks["manifest_completeness"] = _check(False, [f"CorruptManifest: {exc}"])
        return {"scene": d.name, "passed": False, "checks": checks}

    rec, table = data.record, data.homographies
    n = rec.n_frames
    nf = n + 1

    problems = []
    missing = sorted(set(expected_pairs(n)) - set(table))
    extra = sorted(set(table) - set(expected_pairs(n)))
    if missing:
        problems.append(f"missing pairs: {missing}")
    if extra:
        problems.append(f"unexpected pairs: {extra}")
    for p in [data.label_path, *data.image_paths, *data.mask_paths]:
        if p.stat().st_size == 0:
            problems.append(f"empty file: {p.relative_to(d)}")
    checks["manifest_completeness"] = _check(not problems, problems)

    checks["label_presence"] = _check(data.label_path.stat().st_size > 0)

    bad_masks = []
    for k, p in enumerate(data.mask_paths, start=1):
        try:
            m = data.mask(k)
        except OSError as exc:
            bad_masks.append(f"{p.name}: unreadable ({exc})")
            continue
        vals = np.unique(m)
        if m.ndim != 2 or not set(vals.tolist()) <= {0, 255}:
            bad_masks.append(f"{p.name}: values {vals[:8].tolist()}")
    checks["mask_binarity"] = _check(not bad_masks, bad_masks)

    noncanon = [f"{i}->{j}" for (i, j), H in sorted(table.items()) if not check_canonical(H)]
    checks["homography_canonicality"] = _check(not noncanon, noncanon)

    triples = cocycle_failures(table, nf)
    inverse_bad = []
    for (i, j) in sorted(table):
        if (j, i) in table:
            try:
                err = geo.homography_distance(geo.invert(table[(i, j)]), table[(j, i)])
            except ValueError:
                err = np.inf
            if not err < COCYCLE_TOL:
                inverse_bad.append((i, j))
    details = [f"triple {t}" for t in triples[:50]] + [f"inverse {p}" for p in inverse_bad]
    result = _check(not triples and not inverse_bad, details)
    result["failing_triples"] = [list(t) for t in triples]
    result["suspect_pairs"] = [list(p) for p in (suspect_pairs(triples) if triples else inverse_bad)]
    checks["cocycle_consistency"] = result

    cams = rec.cameras()
    transport_bad, replay_bad = [], []
    for (i, j), H in sorted(table.items()):
        if i >= nf or j >= nf:
            continue
        try:
            err = geo.corner_transport_error(H, cams[i], cams[j], rec.plane)
        except ValueError:
            err = np.inf
        if not err < CORNER_TOL:
            transport_bad.append(f"{i}->{j}: {err:.3g} px")
        try:
            ref = geo.homography_between(cams[i], cams[j])
        except ValueError:
            ref = None
        if ref is None or not np.array_equal(ref, H):
            replay_bad.append(f"{i}->{j}")
    checks["corner_transport"] = _check(not transport_bad, transport_bad)
    checks["homography_replay"] = _check(not replay_bad, replay_bad)

    return {"scene": d.name, "passed": all(c["passed"] for c in checks.values()), "checks": checks}


def validate_dataset(root) -> dict:
    """Machine-readable pass/fail report for every scene below ``root``."""
    root = Path(root)
    report = {"root": str(root), "scenes": [], "warnings": [], "passed": True}
    if not root.is_dir():
        report["warnings"].append(f"dataset root does not exist: {root}")
        report["passed"] = False
        return report
    scene_dirs = sorted(p for p in root.iterdir() if p.is_dir() and p.name.startswith("scene_"))
    if not scene_dirs:
        report["warnings"].append("no scenes found")
    manifest_path = root / MANIFEST_FILE
    if manifest_path.is_file():
        try:
            manifest = read_manifest(root)
            listed = {s["dir"] for s in manifest.get("scenes", [])}
            present = {p.name for p in scene_dirs}
            for name in sorted(listed - present):
                report["warnings"].append(f"manifest lists missing scene {name}")
                report["passed"] = False
        except CorruptManifest as exc:
            report["warnings"].append(str(exc))
            report["passed"] = False
    elif scene_dirs:
        report["warnings"].append("no manifest.json at dataset root")
    for sd in scene_dirs:
        r = validate_scene(sd)
        report["scenes"].append(r)
        report["passed"] &= r["passed"]
    return report


def failed_checks(report: dict) -> list:
    """Flat list of ``scene/check`` names that failed."""
    out = []
    for s in report["scenes"]:
        for name, c in s["checks"].items():
            if not c["passed"]:
                out.append(f"{s['scene']}/{name}")
    return out
