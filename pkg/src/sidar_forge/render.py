"""Wavefront path tracer for the textured plane and its occluders.

Paths are traced in batches of numpy arrays. All random numbers come from
``rng.uniform_hash`` keyed by (scene seed, frame, pixel, sample, decision),
so an image is bit-identical however the pixels are chunked or scheduled.

Light transport: unidirectional path tracing with next-event estimation
toward the sampled lights; escaped rays pick up a constant white ambient
environment. BSDFs: Lambertian, GGX glossy, mirror metal, Fresnel
dielectric and alpha-blended transparent. Lights are not visible to camera
or BSDF-sampled rays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import shapes
from .errors import BudgetInvalid, TextureMissing
from .rng import MASK64, derive_seed, uniform_hash
from .scene import FrameSpec, SceneRecord

PLANE_ID = 0
MISS_ID = -1
T_MIN = 1e-7
SHADOW_EPS = 1e-6
CHUNK_PATHS = 1 << 17
MAX_LIGHTS = 12


@dataclass(frozen=True)
class RenderBudget:
    samples_per_pixel: int = 16
    max_bounces: int = 6
    pixel_filter: float = 0.5

    def __post_init__(self):
        if int(self.samples_per_pixel) < 1 or int(self.max_bounces) < 1:
            raise BudgetInvalid(f"invalid render budget {self}")
        if self.samples_per_pixel >= 1 << 20:
            raise BudgetInvalid("samples_per_pixel must be below 2**20")
        if not 0.0 <= self.pixel_filter <= 4.0:
            raise BudgetInvalid("pixel_filter must lie in [0, 4]")

    @classmethod
    def of(cls, scene: SceneRecord) -> "RenderBudget":
        return cls(scene.spp, scene.max_bounces, scene.pixel_filter)


# ---------------------------------------------------------------------------
# Colour handling
# ---------------------------------------------------------------------------


def srgb_to_linear(c):
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(c):
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, 1.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * np.power(c, 1.0 / 2.4) - 0.055)


def tonemap(radiance) -> np.ndarray:
    """Clamp linear radiance to [0, 1], sRGB-encode and quantise to uint8."""
    return np.rint(linear_to_srgb(radiance) * 255.0).astype(np.uint8)


def load_texture(path) -> np.ndarray:
    """RGB uint8 array of an image file."""
    p = Path(path)
    if not p.is_file():
        raise TextureMissing(f"texture not found: {p}")
    with Image.open(p) as im:
        return np.asarray(im.convert("RGB"))


# ---------------------------------------------------------------------------
# Scene compilation
# ---------------------------------------------------------------------------


@dataclass
class _Occluder:
    kind: str
    position: np.ndarray
    world_to_local: np.ndarray  # 3x3
    normal_to_world: np.ndarray  # 3x3 (inverse transpose of the placement)
    bound: float
    material: str
    color: np.ndarray
    roughness: float
    ior: float
    transmission: float
    shadow_tint: np.ndarray  # light transmittance along a shadow ray


@dataclass
class _Light:
    kind: str
    position: np.ndarray
    axis: np.ndarray
    radiance: np.ndarray  # colour * intensity
    cos_outer: float
    cos_inner: float
    u: np.ndarray
    v: np.ndarray
    area: float


class _Scene:
    def __init__(self, plane, texture_linear, frame: FrameSpec):
        self.half_w = plane.width / 2.0
        self.half_h = plane.height / 2.0
        self.tex = texture_linear
        self.ambient = float(frame.ambient)
        self.occluders = [self._compile_occluder(o) for o in frame.occluders]
        self.lights = [self._compile_light(l) for l in frame.lights]
        if len(self.lights) > MAX_LIGHTS:
            raise BudgetInvalid(f"at most {MAX_LIGHTS} lights per frame")

    @staticmethod
    def _compile_occluder(o):
        R = o.rotation_matrix
        s = np.asarray(o.scale, dtype=float)
        Minv = (R / s[None, :]).T
        m = o.material
        color = np.asarray(m.base_color, dtype=float)
        if m.kind == "Transparent":
            tint = color * float(m.transmission)
        elif m.kind == "Refraction":
            tint = color.copy()
        else:
            tint = np.zeros(3)
        return _Occluder(
            kind=o.geometry,
            position=np.asarray(o.position, dtype=float),
            world_to_local=Minv,
            normal_to_world=Minv.T,
            bound=shapes.BOUND_RADIUS[o.geometry] * float(s.max()),
            material=m.kind,
            color=color,
            roughness=float(m.roughness),
            ior=float(m.index_of_refraction or 1.5),
            transmission=float(m.transmission or 0.0),
            shadow_tint=tint,
        )

    @staticmethod
    def _compile_light(l):
        R = np.asarray(l.orientation, dtype=float)
        half = math.radians(l.spot_size_deg) / 2.0
        return _Light(
            kind=l.kind,
            position=np.asarray(l.position, dtype=float),
            axis=R @ np.array([0.0, 0.0, -1.0]),
            radiance=np.asarray(l.color, dtype=float) * float(l.intensity),
            cos_outer=math.cos(half),
            cos_inner=math.cos(0.9 * half),
            u=R @ np.array([1.0, 0.0, 0.0]),
            v=R @ np.array([0.0, 1.0, 0.0]),
            area=float(l.area_size) ** 2,
        )

    # -- intersection -----------------------------------------------------

    def _plane_t(self, o, d, tmin):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -o[:, 2] / d[:, 2]
        x = o[:, 0] + t * d[:, 0]
        y = o[:, 1] + t * d[:, 1]
        ok = (t > tmin) & (np.abs(x) <= self.half_w) & (np.abs(y) <= self.half_h)
        return np.where(ok, t, np.inf)

    def _occluder_t(self, occ, o, d, tmin, tmax=None):
        """Hit distance (inf on miss) and part code for one occluder."""
        n = len(o)
        t = np.full(n, np.inf)
        part = np.zeros(n, dtype=np.int8)
        oc = o - occ.position
        # bounding-sphere cull
        dd = shapes._dot(d, d)
        b = shapes._dot(oc, d)
        c = shapes._dot(oc, oc) - occ.bound * occ.bound
        disc = b * b - dd * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        far = (-b + sq) / dd
        cand = (disc >= 0) & (far > tmin)
        if tmax is not None:
            near = (-b - sq) / dd
            cand &= near < tmax
        idx = np.flatnonzero(cand)
        if len(idx) == 0:
            return t, part
        lo = shapes.apply3(occ.world_to_local, oc[idx])
        ld = shapes.apply3(occ.world_to_local, d[idx])
        ti, pi = shapes.INTERSECT[occ.kind](lo, ld, tmin)
        t[idx] = ti
        part[idx] = pi
        return t, part

    def intersect(self, o, d):
        """Nearest hit: (t, object id, part). Ids: -1 miss, 0 plane, k >= 1 occluder k-1."""
        t = self._plane_t(o, d, T_MIN)
        obj = np.where(np.isfinite(t), PLANE_ID, MISS_ID).astype(np.int32)
        part = np.zeros(len(o), dtype=np.int8)
        for k, occ in enumerate(self.occluders):
            tk, pk = self._occluder_t(occ, o, d, T_MIN)
            closer = tk < t
            t = np.where(closer, tk, t)
            obj = np.where(closer, k + 1, obj)
            part = np.where(closer, pk, part)
        return t, obj, part

    def occluder_normal(self, k, p, part):
        occ = self.occluders[k]
        local = shapes.apply3(occ.world_to_local, p - occ.position)
        n = shapes.apply3(occ.normal_to_world, shapes.NORMAL[occ.kind](local, part))
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def transmittance(self, p, q):
        """RGB fraction of light reaching ``p`` from ``q`` along the open segment."""
        d = q - p
        T = np.ones((len(p), 3))
        tp = self._plane_t(p, d, SHADOW_EPS)
        T[tp < 1.0 - SHADOW_EPS] = 0.0
        for occ in self.occluders:
            tk, _ = self._occluder_t(occ, p, d, SHADOW_EPS, tmax=1.0)
            blocked = tk < 1.0 - SHADOW_EPS
            if blocked.any():
                T[blocked] *= occ.shadow_tint
        return T

    # -- texture ----------------------------------------------------------

    def albedo(self, p):
        th, tw = self.tex.shape[:2]
        u = (p[:, 0] + self.half_w) / (2.0 * self.half_w) * tw - 0.5
        v = (self.half_h - p[:, 1]) / (2.0 * self.half_h) * th - 0.5
        u = np.clip(u, 0.0, tw - 1)
        v = np.clip(v, 0.0, th - 1)
        x0 = np.minimum(u.astype(np.intp), max(tw - 2, 0))
        y0 = np.minimum(v.astype(np.intp), max(th - 2, 0))
        x1 = np.minimum(x0 + 1, tw - 1)
        y1 = np.minimum(y0 + 1, th - 1)
        a = (u - x0)[:, None]
        b = (v - y0)[:, None]
        tex = self.tex
        top = tex[y0, x0] * (1.0 - a) + tex[y0, x1] * a
        bot = tex[y1, x0] * (1.0 - a) + tex[y1, x1] * a
        return top * (1.0 - b) + bot * b


# ---------------------------------------------------------------------------
# Sampling helpers
# ---------------------------------------------------------------------------


def _basis(n):
    """Orthonormal tangent frame (Duff et al. branchless construction)."""
    sign = np.where(n[:, 2] >= 0, 1.0, -1.0)
    a = -1.0 / (sign + n[:, 2])
    b = n[:, 0] * n[:, 1] * a
    t = np.column_stack([1.0 + sign * n[:, 0] ** 2 * a, sign * b, -sign * n[:, 0]])
    s = np.column_stack([b, sign + n[:, 1] ** 2 * a, -n[:, 1]])
    return t, s


def _cosine_sample(n, u1, u2):
    r = np.sqrt(u1)
    phi = 2.0 * np.pi * u2
    x = r * np.cos(phi)
    y = r * np.sin(phi)
    z = np.sqrt(np.maximum(0.0, 1.0 - u1))
    t, s = _basis(n)
    return t * x[:, None] + s * y[:, None] + n * z[:, None]


def _reflect(d, n):
    return d - 2.0 * shapes._dot(d, n)[:, None] * n


def _ggx_d(cos_h, alpha):
    a2 = alpha * alpha
    den = cos_h * cos_h * (a2 - 1.0) + 1.0
    return a2 / (np.pi * den * den)


def _smith_g1(cos_v, alpha):
    cos_v = np.clip(cos_v, 1e-9, 1.0)
    tan2 = (1.0 - cos_v * cos_v) / (cos_v * cos_v)
    return 2.0 / (1.0 + np.sqrt(1.0 + alpha * alpha * tan2))


def _fresnel_dielectric(cos_i, eta):
    """Unpolarised Fresnel reflectance; eta = n_incident / n_transmitted."""
    sin2_t = eta * eta * np.maximum(0.0, 1.0 - cos_i * cos_i)
    tir = sin2_t >= 1.0
    cos_t = np.sqrt(np.maximum(0.0, 1.0 - sin2_t))
    rs = (eta * cos_i - cos_t) / (eta * cos_i + cos_t)
    rp = (cos_i - eta * cos_t) / (cos_i + eta * cos_t)
    F = 0.5 * (rs * rs + rp * rp)
    return np.where(tir, 1.0, F), cos_t, tir


# ---------------------------------------------------------------------------
# Path tracing
# ---------------------------------------------------------------------------


def _render_key(scene: SceneRecord, frame_index: int) -> int:
    return derive_seed(scene.seed & MASK64, 0x52454E44, frame_index)


def _camera_rays(camera, pix, jx, jy):
    W, H = camera.resolution
    col = (pix % W).astype(float)
    row = (pix // W).astype(float)
    Kinv = np.linalg.inv(camera.K)
    R = camera.pose.rotation
    x = col + jx
    y = row + jy
    dc = np.column_stack([Kinv[0, 0] * x + Kinv[0, 1] * y + Kinv[0, 2],
                          Kinv[1, 1] * y + Kinv[1, 2],
                          np.ones(len(x))])
    d = shapes.apply3(R.T, dc)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    o = np.broadcast_to(camera.pose.center, d.shape).copy()
    return o, d


def _direct_light(sc: _Scene, p, n, wo, counter, key, dim0, bsdf_eval):
    """Next-event estimate summed over all lights (one sample each)."""
    L = np.zeros((len(p), 3))
    for li, light in enumerate(sc.lights):
        u1 = uniform_hash(key, counter, dim0 + 2 * li)
        u2 = uniform_hash(key, counter, dim0 + 2 * li + 1)
        if light.kind == "Area":
            side = math.sqrt(light.area)
            q = (light.position + ((u1 - 0.5) * side)[:, None] * light.u
                 + ((u2 - 0.5) * side)[:, None] * light.v)
        else:
            q = np.broadcast_to(light.position, p.shape)
        to_l = q - p
        dist2 = shapes._dot(to_l, to_l)
        wi = to_l / np.sqrt(dist2)[:, None]
        cos_s = shapes._dot(n, wi)
        cos_l = -shapes._dot(wi, np.broadcast_to(light.axis, wi.shape))
        if light.kind == "Point":
            g = np.ones(len(p))
        elif light.kind == "Spot":
            x = np.clip((cos_l - light.cos_outer) / (light.cos_inner - light.cos_outer), 0.0, 1.0)
            g = x * x * (3.0 - 2.0 * x)
        else:
            # radiance = intensity / area, one-sided; pdf = 1 / area
            g = np.maximum(cos_l, 0.0)
        ok = (cos_s > 0) & (g > 0)
        if not ok.any():
            continue
        idx = np.flatnonzero(ok)
        f = bsdf_eval(idx, wi[idx])
        T = sc.transmittance(p[idx] + n[idx] * 1e-6, q[idx])
        contrib = f * (cos_s[idx] * g[idx] / dist2[idx])[:, None] * T * light.radiance
        L[idx] += contrib
    return L


def _trace(sc: _Scene, o, d, counter, key, max_bounces):
    n_paths = len(o)
    L = np.zeros((n_paths, 3))
    beta = np.ones((n_paths, 3))
    alive = np.arange(n_paths)
    ambient = sc.ambient
    for bounce in range(max_bounces + 1):
        if len(alive) == 0:
            break
        dim = 64 * (bounce + 1)
        t, obj, part = sc.intersect(o, d)
        miss = obj == MISS_ID
        if miss.any() and ambient > 0:
            L[alive[miss]] += beta[miss] * ambient
        keep = ~miss
        if bounce == max_bounces:
            break
        alive, o, d, t, obj, part, beta = (alive[keep], o[keep], d[keep], t[keep], obj[keep],
                                           part[keep], beta[keep])
        if len(alive) == 0:
            break
        cnt = counter[alive]
        p = o + t[:, None] * d

        # geometric normal, albedo and material code per hit
        normal = np.zeros_like(p)
        normal[:, 2] = 1.0
        color = np.empty_like(p)
        mat = np.zeros(len(p), dtype=np.int8)  # 0 diffuse, 1 glossy, 2 metal, 3 refraction, 4 transparent
        rough = np.zeros(len(p))
        ior = np.ones(len(p))
        trans = np.zeros(len(p))
        on_plane = obj == PLANE_ID
        if on_plane.any():
            color[on_plane] = sc.albedo(p[on_plane])
        codes = {"Diffuse": 0, "Glossy": 1, "Metallic": 2, "Refraction": 3, "Transparent": 4}
        for k, occ in enumerate(sc.occluders):
            sel = obj == k + 1
            if not sel.any():
                continue
            normal[sel] = sc.occluder_normal(k, p[sel], part[sel])
            color[sel] = occ.color
            mat[sel] = codes[occ.material]
            rough[sel] = occ.roughness
            ior[sel] = occ.ior
            trans[sel] = occ.transmission

        cos_o = shapes._dot(normal, d)
        n_ff = np.where((cos_o > 0)[:, None], -normal, normal)
        wo = -d
        u_lobe = uniform_hash(key, cnt, dim)
        u1 = uniform_hash(key, cnt, dim + 1)
        u2 = uniform_hash(key, cnt, dim + 2)

        # transparent surfaces pass the ray straight through with probability `transmission`
        pass_through = (mat == 4) & (u_lobe < trans)
        diffuse = (mat == 0) | ((mat == 4) & ~pass_through)
        glossy = mat == 1

        new_d = d.copy()
        new_o = p.copy()
        weight = np.zeros_like(p)
        survive = np.zeros(len(p), dtype=bool)

        # -- diffuse -------------------------------------------------------
        if diffuse.any() and sc.lights:
            idx = np.flatnonzero(diffuse)
            albedo = color[idx]
            Ld = _direct_light(sc, p[idx], n_ff[idx], wo[idx], cnt[idx], key, dim + 8,
                               lambda sub, wi: albedo[sub] / np.pi)
            L[alive[idx]] += beta[idx] * Ld
        if diffuse.any():
            idx = np.flatnonzero(diffuse)
            new_d[idx] = _cosine_sample(n_ff[idx], u1[idx], u2[idx])
            new_o[idx] = p[idx] + n_ff[idx] * 1e-6
            weight[idx] = color[idx]
            survive[idx] = True

        # -- glossy (GGX, Schlick Fresnel tinted by base colour) -------------
        if glossy.any():
            idx = np.flatnonzero(glossy)
            nn = n_ff[idx]
            v = wo[idx]
            alpha = np.maximum(rough[idx] ** 2, 1e-3)
            F0 = color[idx]
            cos_v = np.clip(shapes._dot(nn, v), 1e-9, 1.0)

            def eval_ggx(sub, wi, nn=nn, v=v, alpha=alpha, F0=F0, cos_v=cos_v):
                h = wi + v[sub]
                h /= np.linalg.norm(h, axis=1, keepdims=True)
                cos_h = np.clip(shapes._dot(nn[sub], h), 0.0, 1.0)
                cos_l = np.clip(shapes._dot(nn[sub], wi), 1e-9, 1.0)
                vh = np.clip(shapes._dot(v[sub], h), 0.0, 1.0)
                F = F0[sub] + (1.0 - F0[sub]) * ((1.0 - vh) ** 5)[:, None]
                D = _ggx_d(cos_h, alpha[sub])
                G = _smith_g1(cos_v[sub], alpha[sub]) * _smith_g1(cos_l, alpha[sub])
                return F * (D * G / (4.0 * cos_v[sub] * cos_l))[:, None]

            if sc.lights:
                Lg = _direct_light(sc, p[idx], nn, v, cnt[idx], key, dim + 8, eval_ggx)
                L[alive[idx]] += beta[idx] * Lg
            # sample half vector from D(h) cos(h)
            a2 = alpha * alpha
            cos_th = np.sqrt((1.0 - u1[idx]) / (1.0 + (a2 - 1.0) * u1[idx]))
            sin_th = np.sqrt(np.maximum(0.0, 1.0 - cos_th ** 2))
            phi = 2.0 * np.pi * u2[idx]
            tt, ss = _basis(nn)
            h = (tt * (sin_th * np.cos(phi))[:, None] + ss * (sin_th * np.sin(phi))[:, None]
                 + nn * cos_th[:, None])
            wi = _reflect(-v, h)
            cos_l = shapes._dot(nn, wi)
            vh = np.clip(shapes._dot(v, h), 1e-9, 1.0)
            ok = cos_l > 1e-9
            F = F0 + (1.0 - F0) * ((1.0 - vh) ** 5)[:, None]
            G = _smith_g1(cos_v, alpha) * _smith_g1(np.clip(cos_l, 1e-9, 1.0), alpha)
            w = F * (G * vh / (cos_v * np.clip(cos_th, 1e-9, 1.0)))[:, None]
            new_d[idx] = wi
            new_o[idx] = p[idx] + nn * 1e-6
            weight[idx] = w
            survive[idx] = ok

        # -- metal: perfect mirror -------------------------------------------
        metal = mat == 2
        if metal.any():
            idx = np.flatnonzero(metal)
            new_d[idx] = _reflect(d[idx], n_ff[idx])
            new_o[idx] = p[idx] + n_ff[idx] * 1e-6
            weight[idx] = color[idx]
            survive[idx] = True

        # -- dielectric with Fresnel ----------------------------------------------
        refr = mat == 3
        if refr.any():
            idx = np.flatnonzero(refr)
            entering = cos_o[idx] < 0
            eta = np.where(entering, 1.0 / ior[idx], ior[idx])
            nn = n_ff[idx]
            cos_i = np.clip(-shapes._dot(d[idx], nn), 0.0, 1.0)
            F, cos_t, tir = _fresnel_dielectric(cos_i, eta)
            reflect = tir | (u_lobe[idx] < F)
            refl_d = _reflect(d[idx], nn)
            refr_d = eta[:, None] * d[idx] + (eta * cos_i - cos_t)[:, None] * nn
            refr_d /= np.linalg.norm(refr_d, axis=1, keepdims=True)
            new_d[idx] = np.where(reflect[:, None], refl_d, refr_d)
            new_o[idx] = p[idx] + np.where(reflect[:, None], nn, -nn) * 1e-6
            weight[idx] = np.where(reflect[:, None], 1.0, color[idx])
            survive[idx] = True

        if pass_through.any():
            idx = np.flatnonzero(pass_through)
            new_o[idx] = p[idx] + d[idx] * 1e-6
            weight[idx] = color[idx]
            survive[idx] = True

        beta = beta * weight
        survive &= np.any(beta > 0, axis=1)
        alive, o, d, beta = alive[survive], new_o[survive], new_d[survive], beta[survive]
    return L


def render_radiance(scene: SceneRecord, camera_index: int, budget: RenderBudget | None = None,
                    texture=None, resolution=None) -> np.ndarray:
    """Linear RGB radiance image (H, W, 3) of one frame (0 is the label frame)."""
    if budget is None:
        budget = RenderBudget.of(scene)
    frame = scene.frame(camera_index)
    camera = frame.camera
    if resolution is not None and tuple(resolution) != camera.resolution:
        camera = _resized(camera, resolution)
    tex = _texture_linear(scene, texture)
    sc = _Scene(scene.plane, tex, frame)
    W, H = camera.resolution
    spp = int(budget.samples_per_pixel)
    key = _render_key(scene, camera_index)
    out = np.zeros((W * H, 3))
    px_per_chunk = max(1, CHUNK_PATHS // spp)
    for start in range(0, W * H, px_per_chunk):
        pix = np.arange(start, min(W * H, start + px_per_chunk), dtype=np.int64)
        pix_r = np.repeat(pix, spp)
        samp = np.tile(np.arange(spp, dtype=np.int64), len(pix))
        counter = (pix_r.astype(np.uint64) << np.uint64(20)) | samp.astype(np.uint64)
        fw = budget.pixel_filter
        jx = 0.5 + (uniform_hash(key, counter, 0) - 0.5) * fw
        jy = 0.5 + (uniform_hash(key, counter, 1) - 0.5) * fw
        o, d = _camera_rays(camera, pix_r, jx, jy)
        L = _trace(sc, o, d, counter, key, int(budget.max_bounces))
        out[start:start + len(pix)] = L.reshape(len(pix), spp, 3).sum(axis=1) / spp
    return out.reshape(H, W, 3)


def _resized(camera, resolution):
    from .geometry import Camera, CameraIntrinsics

    W, H = (int(v) for v in resolution)
    i = camera.intrinsics
    intr = CameraIntrinsics(i.sensor_width, i.sensor_height, i.principal_distance, (W, H))
    return Camera(intr, camera.pose)


def _texture_linear(scene: SceneRecord, texture):
    if texture is None:
        if not scene.texture.path:
            raise TextureMissing("scene has no texture path and no texture was supplied")
        texture = load_texture(scene.texture.path)
    tex = np.asarray(texture)
    if tex.size == 0:
        raise TextureMissing("empty texture")
    if tex.ndim == 2:
        tex = np.repeat(tex[..., None], 3, axis=2)
    tex = tex[..., :3]
    if np.issubdtype(tex.dtype, np.integer):
        return srgb_to_linear(tex / 255.0)
    return srgb_to_linear(tex)


def render_view(scene: SceneRecord, camera_index: int, budget: RenderBudget | None = None,
                texture=None) -> np.ndarray:
    """Path-traced 8-bit RGB view of frame ``camera_index``."""
    return tonemap(render_radiance(scene, camera_index, budget, texture))


def render_label(scene: SceneRecord, resolution=None, budget: RenderBudget | None = None,
                 texture=None) -> np.ndarray:
    """Ambient-only, occluder-free render through the aligned camera."""
    return tonemap(render_radiance(scene, 0, budget, texture, resolution=resolution))


def primary_hits(scene: SceneRecord, camera_index: int) -> np.ndarray:
    """Object id of the first surface hit through each pixel centre (H, W).

    -1 background, 0 plane, k >= 1 occluder k-1.
    """
    frame = scene.frame(camera_index)
    camera = frame.camera
    W, H = camera.resolution
    sc = _Scene(scene.plane, np.zeros((1, 1, 3)), frame)
    ids = np.empty(W * H, dtype=np.int32)
    for start in range(0, W * H, CHUNK_PATHS):
        pix = np.arange(start, min(W * H, start + CHUNK_PATHS), dtype=np.int64)
        half = np.full(len(pix), 0.5)
        o, d = _camera_rays(camera, pix, half, half)
        _, obj, _ = sc.intersect(o, d)
        ids[start:start + len(pix)] = obj
    return ids.reshape(H, W)


def render_mask(scene: SceneRecord, camera_index: int) -> np.ndarray:
    """Binary occlusion mask: 0 where the plane is seen first, 255 elsewhere."""
    ids = primary_hits(scene, camera_index)
    return np.where(ids == PLANE_ID, 0, 255).astype(np.uint8)
