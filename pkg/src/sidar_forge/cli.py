"""Command-line front end: ``sidar-forge {generate,validate,warp,inspect}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml
from PIL import Image

from . import geometry as geo
from .dataset import failed_checks, read_scene, validate_dataset
from .errors import InvalidConfig, SidarError
from .pipeline import generate_dataset
from .scene import SceneConfig

OUTPUT_ENV = "SIDAR_FORGE_OUTPUT"
DEFAULT_OUTPUT = "sidar_dataset"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# CLI flag -> SceneConfig field
_FLAG_FIELDS = {
    "seed": "seed",
    "frames": "frames",
    "mode": "mode",
    "resolution": "resolution",
    "spp": "spp",
    "bounces": "max_bounces",
    "epsilon": "epsilon",
}


def _on_off(value: str) -> bool:
    v = value.lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {value!r}")


def load_config_file(path) -> dict:
    """YAML or JSON mapping of SceneConfig fields plus ``scenes`` and ``corpus``."""
    text = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise InvalidConfig(f"{path}: config must be a mapping")
    return data


def effective_settings(args) -> tuple[SceneConfig, dict]:
    """Merge defaults < config file < flags. Returns the scene config and run options."""
    file_cfg = load_config_file(args.config) if args.config else {}
    run = {"scenes": file_cfg.pop("scenes", 1), "corpus": file_cfg.pop("corpus", None)}
    cfg = dict(file_cfg)
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            cfg[name] = v
    if args.occluders is not None:
        cfg["occluders"] = [args.occluders, args.occluders]
    if args.lights is not None:
        cfg["lights"] = [args.lights, args.lights]
    if args.randomize_lights is not None:
        cfg["randomize_lights"] = args.randomize_lights
    if args.scenes is not None:
        run["scenes"] = args.scenes
    if args.corpus is not None:
        run["corpus"] = args.corpus
    return SceneConfig.from_dict(cfg), run


def cmd_generate(args) -> int:
    try:
        config, run = effective_settings(args)
    except (InvalidConfig, TypeError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not run["corpus"]:
        print("error: no corpus directory given (--corpus or 'corpus' in the config)", file=sys.stderr)
        return EXIT_USAGE
    output = args.output or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    try:
        manifest, failures = generate_dataset(config, run["corpus"], output, int(run["scenes"]),
                                              jobs=max(1, args.jobs), echo=print)
    except SidarError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"wrote {len(manifest['scenes'])} scene(s) to {output}; {len(failures)} failure(s)")
    return EXIT_FAIL if failures else EXIT_OK


def cmd_validate(args) -> int:
    report = validate_dataset(args.root)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for s in report["scenes"]:
            status = "ok" if s["passed"] else "FAIL"
            print(f"{s['scene']}: {status}")
            for name, c in s["checks"].items():
                if not c["passed"]:
                    print(f"  {name}: FAIL")
                    for line in c["details"][:10]:
                        print(f"    {line}")
        for w in report["warnings"]:
            print(f"warning: {w}")
        failed = failed_checks(report)
        print(f"{len(report['scenes'])} scene(s), {len(failed)} failed check(s)")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_warp(args) -> int:
    try:
        data = read_scene(args.scene)
        n = data.record.n_frames
        for k in (args.source, args.target):
            if not 0 <= k <= n:
                print(f"error: frame {k} out of range 0..{n}", file=sys.stderr)
                return EXIT_FAIL
        src = data.image(args.source)
        W, H = data.record.camera(args.target).resolution
        if args.source == args.target:
            warped, valid = src, np.ones(src.shape[:2], dtype=bool)
        else:
            res = geo.warp_image(src, data.homographies[(args.source, args.target)], (W, H))
            warped, valid = res.image, res.valid
    except SidarError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(warped).save(out)
    sidecar = out.with_name(out.stem + ".valid.png")
    Image.fromarray(np.where(valid, 255, 0).astype(np.uint8)).save(sidecar)
    print(f"wrote {out} and {sidecar}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        data = read_scene(args.scene)
    except SidarError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    rec = data.record
    print(f"scene {rec.scene_index}  seed {rec.seed}  mode {rec.mode}  frames {rec.n_frames}")
    print(f"texture {rec.texture.path} ({rec.texture.width}x{rec.texture.height})  "
          f"plane {rec.plane.width:.4g}x{rec.plane.height:.4g}  resolution {rec.resolution}")
    for k in range(rec.n_frames + 1):
        fr = rec.frame(k)
        cam = fr.camera
        c = cam.pose.center
        print(f"frame {k}: camera at ({c[0]:.3f}, {c[1]:.3f}, {c[2]:.3f}) "
              f"f={cam.intrinsics.principal_distance:.5g} ambient={fr.ambient:g}")
        for l in fr.lights:
            print(f"    light {l.kind:5s} I={l.intensity:.2f} pos={tuple(round(v, 3) for v in l.position)} "
                  f"hsv={tuple(round(v, 3) for v in l.hsv)}")
        for o in fr.occluders:
            print(f"    occluder {o.geometry:8s} {o.material.kind:11s} pos={tuple(round(v, 3) for v in o.position)} "
                  f"scale={tuple(round(v, 3) for v in o.scale)}")
    print("homography condition numbers:")
    for (i, j), H in sorted(data.homographies.items()):
        print(f"  {i}->{j}: {geo.condition_number(H):.4g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sidar-forge", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a dataset from an image corpus")
    g.add_argument("--config", help="YAML/JSON file with SceneConfig fields, 'scenes' and 'corpus'")
    g.add_argument("--corpus", help="directory of input images")
    g.add_argument("--output", help=f"dataset root (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    g.add_argument("--seed", type=int)
    g.add_argument("--scenes", type=int)
    g.add_argument("--frames", type=int, help="distorted frames per scene")
    g.add_argument("--mode", choices=["aligned", "misaligned"])
    g.add_argument("--resolution", type=int, help="long image side in pixels")
    g.add_argument("--spp", type=int, help="samples per pixel")
    g.add_argument("--bounces", type=int, help="maximum path length")
    g.add_argument("--epsilon", type=float, help="maximum light saturation")
    g.add_argument("--occluders", type=int, help="fixed number of occluders per frame")
    g.add_argument("--lights", type=int, help="fixed number of lights per frame")
    g.add_argument("--randomize-lights", type=_on_off, metavar="on|off")
    g.add_argument("--jobs", type=int, default=1, help="scenes rendered in parallel")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", help="check a generated dataset")
    v.add_argument("root")
    v.add_argument("--json", action="store_true", help="print the full machine-readable report")
    v.set_defaults(func=cmd_validate)

    w = sub.add_parser("warp", help="warp one frame into another frame's coordinates")
    w.add_argument("scene", help="scene directory")
    w.add_argument("--source", type=int, required=True, help="frame index to warp (0 = label)")
    w.add_argument("--target", type=int, required=True, help="reference frame index")
    w.add_argument("--out", required=True, help="output PNG; a .valid.png sidecar is written next to it")
    w.set_defaults(func=cmd_warp)

    i = sub.add_parser("inspect", help="print a scene's sampled parameters")
    i.add_argument("scene")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
