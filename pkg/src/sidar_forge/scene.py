"""Randomised scene construction: cameras, lights and occluding objects.

Every scene is a pure function of ``(SceneConfig, texture size)``. Each
frame draws its camera, lights and occluders from its own Philox stream, so
changing one category's count leaves the others untouched.
"""

from __future__ import annotations

import colorsys
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import geometry as geo
from .errors import InvalidConfig
from .rng import stream

SCHEMA = "sidar-forge/1"

LIGHT_KINDS = ("Spot", "Point", "Area")
GEOMETRY_KINDS = ("Sphere", "Cube", "Cylinder", "Cone", "Torus")
MATERIAL_KINDS = ("Diffuse", "Glossy", "Metallic", "Refraction", "Transparent")
MODES = ("aligned", "misaligned")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _pair(v):
    if isinstance(v, (int, float)):
        return (v, v)
    lo, hi = v
    return (lo, hi)


@dataclass(frozen=True)
class SceneConfig:
    """Knobs of the generator. Ranges are closed ``(lo, hi)`` pairs."""

    seed: int = 0
    mode: str = "misaligned"
    frames: int = 4
    resolution: int = 256  # long side in pixels; the short side follows the texture aspect
    spp: int = 16
    max_bounces: int = 6
    pixel_filter: float = 0.5

    # artifact toggles
    randomize_lights: bool = True
    lights: tuple = (1, 3)
    occluders: tuple = (1, 6)

    # illumination
    light_x: tuple = (-2.0, 2.0)
    light_y: tuple = (-2.0, 2.0)
    light_z: tuple = (1.5, 3.5)
    intensity: tuple = (5.0, 50.0)
    epsilon: float = 0.2
    spot_size_deg: float = 45.0
    area_size: float = 0.5
    ambient: float = 0.2
    label_ambient: float = 1.0

    # cameras
    camera_x: tuple = (-1.5, 1.5)
    camera_y: tuple = (-1.5, 1.5)
    camera_z: tuple = (1.5, 4.0)
    fov_deg: tuple = (30.0, 70.0)
    sensor_width: float = 0.036
    aligned_distance: float = 3.0
    plane_size: float = 2.0

    # occluders
    occluder_x: tuple = (-1.0, 1.0)
    occluder_y: tuple = (-1.0, 1.0)
    occluder_z: tuple = (0.15, 1.0)
    scale: tuple = (0.05, 0.4)

    def __post_init__(self):
        for f in fields(self):
            if f.type == "tuple":
                object.__setattr__(self, f.name, tuple(_pair(getattr(self, f.name))))
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}, got {self.mode!r}")
        for f in fields(self):
            if f.type == "tuple":
                lo, hi = getattr(self, f.name)
                if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                    raise InvalidConfig(f"{f.name}: empty range {lo}..{hi}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidConfig("epsilon must lie in [0, 1]")
        lo, hi = self.fov_deg
        if not (10.0 < lo and hi < 120.0):
            raise InvalidConfig("fov range must lie within (10, 120) degrees")
        if self.frames < 1:
            raise InvalidConfig("need at least one frame per scene")
        if self.lights[0] < 0 or self.occluders[0] < 0:
            raise InvalidConfig("counts must be nonnegative")
        if self.scale[0] <= 0:
            raise InvalidConfig("scale must be positive")
        if self.camera_z[0] <= 0 or self.light_z[0] <= 0:
            raise InvalidConfig("cameras and lights must sit above the plane (z > 0)")
        zmin_cam = min(self.camera_z[0], self.aligned_distance)
        if not (0.0 < self.occluder_z[0] and self.occluder_z[1] < zmin_cam):
            raise InvalidConfig("occluder slab must lie strictly between the plane and the cameras")
        if self.spp < 1 or self.max_bounces < 1:
            raise InvalidConfig("spp and max_bounces must be >= 1")
        if self.resolution < 2:
            raise InvalidConfig("resolution too small")
        if self.aligned_distance <= 0 or self.sensor_width <= 0 or self.plane_size <= 0:
            raise InvalidConfig("distances must be positive")
        if self.intensity[0] < 0 or self.ambient < 0 or self.label_ambient < 0:
            raise InvalidConfig("intensities must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    def replace(self, **kw) -> "SceneConfig":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# Scene elements
# ---------------------------------------------------------------------------


def rotation_between(a, b) -> np.ndarray:
    """Smallest rotation taking unit vector ``a`` onto unit vector ``b``."""
    a = np.asarray(a, float) / np.linalg.norm(a)
    b = np.asarray(b, float) / np.linalg.norm(b)
    v = np.cross(a, b)
    c = float(a @ b)
    if c < -1.0 + 1e-12:
        # antiparallel: rotate pi about any axis orthogonal to a
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    vx = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def euler_xyz(angles) -> np.ndarray:
    """Rotation applying x, then y, then z: ``Rz @ Ry @ Rx``."""
    ax, ay, az = angles
    cx, sx, cy, sy, cz, sz = math.cos(ax), math.sin(ax), math.cos(ay), math.sin(ay), math.cos(az), math.sin(az)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def _tuple3(v):
    return tuple(float(x) for x in v)


@dataclass(frozen=True)
class LightSpec:
    kind: str
    position: tuple
    intensity: float
    hsv: tuple
    color: tuple
    orientation: tuple  # 3x3 rotation, rows, taking the default (0,0,-1) axis onto the plane centre
    spot_size_deg: float = 45.0
    area_size: float = 0.5

    @property
    def axis(self) -> np.ndarray:
        return np.asarray(self.orientation) @ np.array([0.0, 0.0, -1.0])

    def to_dict(self):
        d = asdict(self)
        d["orientation"] = [list(r) for r in self.orientation]
        for k in ("position", "hsv", "color"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["orientation"] = tuple(tuple(float(x) for x in r) for r in d["orientation"])
        for k in ("position", "hsv", "color"):
            d[k] = _tuple3(d[k])
        return cls(**d)


@dataclass(frozen=True)
class MaterialSpec:
    kind: str
    base_color: tuple
    roughness: float
    index_of_refraction: float | None = None
    transmission: float | None = None

    def to_dict(self):
        d = asdict(self)
        d["base_color"] = list(self.base_color)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["base_color"] = _tuple3(d["base_color"])
        return cls(**d)


@dataclass(frozen=True)
class OccluderSpec:
    geometry: str
    position: tuple
    rotation: tuple  # Euler angles, applied x then y then z
    scale: tuple
    material: MaterialSpec

    @property
    def rotation_matrix(self) -> np.ndarray:
        return euler_xyz(self.rotation)

    def to_dict(self):
        return {
            "geometry": self.geometry,
            "position": list(self.position),
            "rotation": list(self.rotation),
            "scale": list(self.scale),
            "material": self.material.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["geometry"], _tuple3(d["position"]), _tuple3(d["rotation"]),
                   _tuple3(d["scale"]), MaterialSpec.from_dict(d["material"]))


def camera_to_dict(cam: geo.Camera) -> dict:
    i = cam.intrinsics
    return {
        "sensor_width": i.sensor_width,
        "sensor_height": i.sensor_height,
        "principal_distance": i.principal_distance,
        "resolution": list(i.resolution),
        "principal_point": list(i.principal_point),
        "rotation": cam.pose.rotation.tolist(),
        "translation": cam.pose.translation.tolist(),
    }


def camera_from_dict(d: dict) -> geo.Camera:
    intr = geo.CameraIntrinsics(float(d["sensor_width"]), float(d["sensor_height"]),
                                float(d["principal_distance"]), tuple(d["resolution"]),
                                tuple(d["principal_point"]))
    return geo.Camera(intr, geo.CameraPose(np.array(d["rotation"]), np.array(d["translation"])))


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def _uniform(rng, rng_range):
    lo, hi = rng_range
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


def sample_lights(n: int, rng: np.random.Generator, config: SceneConfig) -> list[LightSpec]:
    """n lights of random type, intensity, position and near-white colour, aimed at the origin."""
    if n < 0:
        raise InvalidConfig("light count must be nonnegative")
    config.validate()
    lights = []
    for _ in range(n):
        kind = LIGHT_KINDS[int(rng.integers(len(LIGHT_KINDS)))]
        intensity = _uniform(rng, config.intensity)
        pos = (_uniform(rng, config.light_x), _uniform(rng, config.light_y), _uniform(rng, config.light_z))
        h = float(rng.uniform(0.0, 1.0))
        s = _uniform(rng, (0.0, config.epsilon))
        hsv = (h, s, 1.0)
        color = colorsys.hsv_to_rgb(*hsv)
        p = np.array(pos)
        R = rotation_between([0.0, 0.0, -1.0], -p / np.linalg.norm(p))
        lights.append(LightSpec(kind, pos, intensity, hsv, _tuple3(color),
                                tuple(_tuple3(r) for r in R),
                                config.spot_size_deg, config.area_size))
    return lights


def sample_material(rng: np.random.Generator) -> MaterialSpec:
    kind = MATERIAL_KINDS[int(rng.integers(len(MATERIAL_KINDS)))]
    base = _tuple3(rng.uniform(0.05, 0.95, size=3))
    roughness = float(rng.uniform(0.0, 1.0))
    ior = float(rng.uniform(1.3, 1.8)) if kind == "Refraction" else None
    transmission = float(rng.uniform(0.3, 0.9)) if kind == "Transparent" else None
    if kind == "Glossy":
        roughness = 0.05 + 0.45 * roughness
    return MaterialSpec(kind, base, roughness, ior, transmission)


def sample_occluders(n: int, rng: np.random.Generator, config: SceneConfig) -> list[OccluderSpec]:
    """n primitives with uniform position in the occluder slab, rotation, scale and material."""
    if n < 0:
        raise InvalidConfig("occluder count must be nonnegative")
    config.validate()
    out = []
    for _ in range(n):
        geometry = GEOMETRY_KINDS[int(rng.integers(len(GEOMETRY_KINDS)))]
        pos = (_uniform(rng, config.occluder_x), _uniform(rng, config.occluder_y),
               _uniform(rng, config.occluder_z))
        rot = _tuple3(rng.uniform(0.0, 2.0 * math.pi, size=3))
        scale = tuple(_uniform(rng, config.scale) for _ in range(3))
        out.append(OccluderSpec(geometry, pos, rot, scale, sample_material(rng)))
    return out


def sample_cameras(n: int, rng: np.random.Generator, config: SceneConfig,
                   resolution=(256, 256)) -> list[geo.Camera]:
    """n look-at cameras aimed at the plane centre with random position and field of view."""
    if n < 1:
        raise InvalidConfig("need at least one camera")
    config.validate()
    cams = []
    for _ in range(n):
        pos = (_uniform(rng, config.camera_x), _uniform(rng, config.camera_y), _uniform(rng, config.camera_z))
        fov = _uniform(rng, config.fov_deg)
        cams.append(geo.camera_from_fov(pos, fov, resolution, config.sensor_width))
    return cams


def _count(rng, count_range) -> int:
    lo, hi = (int(v) for v in count_range)
    return int(rng.integers(lo, hi + 1)) if hi > lo else lo


# ---------------------------------------------------------------------------
# Scene record
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TextureRef:
    path: str
    width: int
    height: int
    sha256: str = ""

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class FrameSpec:
    camera: geo.Camera
    lights: tuple
    occluders: tuple
    ambient: float

    def to_dict(self):
        return {
            "camera": camera_to_dict(self.camera),
            "lights": [l.to_dict() for l in self.lights],
            "occluders": [o.to_dict() for o in self.occluders],
            "ambient": self.ambient,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(camera_from_dict(d["camera"]),
                   tuple(LightSpec.from_dict(l) for l in d["lights"]),
                   tuple(OccluderSpec.from_dict(o) for o in d["occluders"]),
                   float(d["ambient"]))


@dataclass(frozen=True)
class SceneRecord:
    """Everything needed to re-render a scene. Frame 0 is the aligned label view."""

    seed: int
    mode: str
    texture: TextureRef
    plane: geo.PlaneSpec
    resolution: tuple
    frames: tuple  # FrameSpec for frames 1..n
    label_camera: geo.Camera
    label_ambient: float
    spp: int = 16
    max_bounces: int = 6
    pixel_filter: float = 0.5
    scene_index: int = 0
    schema: str = field(default=SCHEMA)

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def camera(self, index: int) -> geo.Camera:
        """Camera of frame ``index``; 0 is the label camera."""
        if index == 0:
            return self.label_camera
        if not 1 <= index <= len(self.frames):
            raise IndexError(f"frame index {index} out of range 0..{len(self.frames)}")
        return self.frames[index - 1].camera

    def frame(self, index: int) -> FrameSpec:
        """Frame content; index 0 is the undistorted label frame."""
        if index == 0:
            return FrameSpec(self.label_camera, (), (), self.label_ambient)
        if not 1 <= index <= len(self.frames):
            raise IndexError(f"frame index {index} out of range 0..{len(self.frames)}")
        return self.frames[index - 1]

    def cameras(self) -> list:
        return [self.camera(k) for k in range(len(self.frames) + 1)]

    def strip_distortions(self) -> "SceneRecord":
        """Same cameras, no lights or occluders, label ambient everywhere."""
        frames = tuple(FrameSpec(f.camera, (), (), self.label_ambient) for f in self.frames)
        return replace(self, frames=frames)

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "seed": self.seed,
            "scene_index": self.scene_index,
            "mode": self.mode,
            "texture": self.texture.to_dict(),
            "plane": {"width": self.plane.width, "height": self.plane.height},
            "resolution": list(self.resolution),
            "label_camera": camera_to_dict(self.label_camera),
            "label_ambient": self.label_ambient,
            "render": {"spp": self.spp, "max_bounces": self.max_bounces, "pixel_filter": self.pixel_filter},
            "frames": [f.to_dict() for f in self.frames],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneRecord":
        tex = TextureRef.from_dict(d["texture"])
        return cls(
            seed=int(d["seed"]),
            mode=d["mode"],
            texture=tex,
            plane=geo.PlaneSpec(float(d["plane"]["width"]), float(d["plane"]["height"]), tex.path),
            resolution=tuple(int(v) for v in d["resolution"]),
            frames=tuple(FrameSpec.from_dict(f) for f in d["frames"]),
            label_camera=camera_from_dict(d["label_camera"]),
            label_ambient=float(d["label_ambient"]),
            spp=int(d["render"]["spp"]),
            max_bounces=int(d["render"]["max_bounces"]),
            pixel_filter=float(d["render"]["pixel_filter"]),
            scene_index=int(d.get("scene_index", 0)),
            schema=d.get("schema", SCHEMA),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SceneRecord":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, SceneRecord):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


def sample_scene(config: SceneConfig, texture: TextureRef | tuple, scene_index: int = 0) -> SceneRecord:
    """Sample a complete scene for one texture.

    ``texture`` is a TextureRef or a bare ``(width, height)`` pair. The result
    depends only on ``config`` and the texture dimensions.
    """
    if not isinstance(texture, TextureRef):
        w, h = texture
        texture = TextureRef("", int(w), int(h))
    if texture.width <= 0 or texture.height <= 0:
        raise InvalidConfig("texture must be non-empty")
    config.validate()
    plane = geo.PlaneSpec.for_texture(texture.width, texture.height, config.plane_size, texture.path)
    resolution = geo.resolution_for_aspect(texture.width / texture.height, config.resolution)
    label_cam = geo.build_aligned_camera(plane, config.aligned_distance, config.sensor_width, resolution)

    frames = []
    for k in range(1, config.frames + 1):
        if config.mode == "aligned":
            cam = label_cam
        else:
            cam = sample_cameras(1, stream(config.seed, "cameras", k), config, resolution)[0]
        if config.randomize_lights:
            rng = stream(config.seed, "lights", k)
            lights = sample_lights(_count(rng, config.lights), rng, config)
            ambient = config.ambient
        else:
            lights, ambient = [], config.label_ambient
        rng = stream(config.seed, "occluders", k)
        occluders = sample_occluders(_count(rng, config.occluders), rng, config)
        frames.append(FrameSpec(cam, tuple(lights), tuple(occluders), float(ambient)))

    return SceneRecord(
        seed=int(config.seed),
        mode=config.mode,
        texture=texture,
        plane=plane,
        resolution=tuple(resolution),
        frames=tuple(frames),
        label_camera=label_cam,
        label_ambient=float(config.label_ambient),
        spp=config.spp,
        max_bounces=config.max_bounces,
        pixel_filter=config.pixel_filter,
        scene_index=scene_index,
    )
