import dataclasses
import math

import numpy as np
import pytest

from sidar_forge import geometry as geo
from sidar_forge import render
from sidar_forge.errors import BudgetInvalid, TextureMissing
from sidar_forge.render import RenderBudget, render_label, render_mask, render_radiance, render_view
from sidar_forge.scene import (
    FrameSpec,
    LightSpec,
    MaterialSpec,
    OccluderSpec,
    SceneConfig,
    rotation_between,
    sample_scene,
)

from conftest import painting

CLEAN = SceneConfig(mode="aligned", occluders=0, randomize_lights=False, frames=1)


def clean_scene(size=(64, 64), resolution=64, **kw):
    return sample_scene(CLEAN.replace(resolution=resolution, **kw), size)


def with_frame(scene, lights=(), occluders=(), ambient=0.0, camera=None):
    cam = camera or scene.label_camera
    return dataclasses.replace(scene, frames=(FrameSpec(cam, tuple(lights), tuple(occluders), ambient),))


def point_light(pos, intensity, color=(1.0, 1.0, 1.0)):
    p = np.asarray(pos, float)
    R = rotation_between([0, 0, -1], -p / np.linalg.norm(p))
    return LightSpec("Point", tuple(pos), intensity, (0.0, 0.0, 1.0), color, tuple(tuple(r) for r in R))


def occluder(geometry, pos, scale, kind="Diffuse", **mat):
    m = MaterialSpec(kind, (0.8, 0.8, 0.8), 0.5, mat.get("ior"), mat.get("transmission"))
    return OccluderSpec(geometry, tuple(pos), (0.0, 0.0, 0.0), tuple(scale), m)


def interior_mad(a, b):
    return np.abs(a[1:-1, 1:-1].astype(float) - b[1:-1, 1:-1].astype(float)).mean()


# -- colour ---------------------------------------------------------------------


def test_srgb_round_trip():
    v = np.arange(256) / 255.0
    assert np.array_equal(np.rint(render.linear_to_srgb(render.srgb_to_linear(v)) * 255), np.arange(256))


def test_tonemap_clamps():
    img = render.tonemap(np.array([[[-1.0, 0.5, 7.0]]]))
    assert img.dtype == np.uint8 and img[0, 0, 0] == 0 and img[0, 0, 2] == 255


# -- images -----------------------------------------------------------------------


def test_no_light_is_black(texture):
    sc = with_frame(clean_scene(), ambient=0.0)
    img = render_view(sc, 1, RenderBudget(4, 3), texture)
    assert img.max() == 0


def test_label_matches_texture(texture):
    sc = clean_scene(size=(128, 96), resolution=128)
    lab = render_label(sc, budget=RenderBudget(64, 6), texture=texture)
    assert lab.shape == texture.shape
    assert interior_mad(lab, texture) < 2.0


def test_label_exact_without_filter(texture):
    sc = clean_scene(size=(128, 96), resolution=128)
    lab = render_label(sc, budget=RenderBudget(2, 2, pixel_filter=0.0), texture=texture)
    assert np.array_equal(lab, texture)


def test_white_plane_is_bright():
    white = np.full((32, 32, 3), 255, np.uint8)
    lab = render_label(clean_scene((32, 32), 32), budget=RenderBudget(4, 2), texture=white)
    assert lab.min() >= 250


def test_label_dimensions_follow_aspect(texture):
    sc = sample_scene(SceneConfig(resolution=80), (300, 150))
    lab = render_label(sc, budget=RenderBudget(1, 1), texture=np.zeros((150, 300, 3), np.uint8))
    assert lab.shape == (40, 80, 3)
    assert render_label(sc, resolution=(40, 20), budget=RenderBudget(1, 1),
                        texture=np.zeros((150, 300, 3), np.uint8)).shape == (20, 40, 3)


def test_label_ignores_distortions(texture):
    a = sample_scene(SceneConfig(seed=1, resolution=48, occluders=(3, 3)), (64, 64))
    b = sample_scene(SceneConfig(seed=1, resolution=48, occluders=0, randomize_lights=False), (64, 64))
    bud = RenderBudget(4, 3)
    assert np.array_equal(render_label(a, budget=bud, texture=texture), render_label(b, budget=bud, texture=texture))


def test_label_equals_stripped_view(texture):
    sc = sample_scene(SceneConfig(seed=3, resolution=48, mode="aligned"), (64, 64))
    bud = RenderBudget(4, 3, pixel_filter=0.0)
    lab = render_label(sc, budget=bud, texture=texture)
    stripped = sc.strip_distortions()
    assert np.array_equal(lab, render_view(stripped, 0, bud, texture))
    for k in range(1, stripped.n_frames + 1):
        assert np.array_equal(lab, render_view(stripped, k, bud, texture))


def test_determinism_independent_of_chunking(texture, monkeypatch):
    sc = sample_scene(SceneConfig(seed=4, resolution=32, occluders=(4, 4), lights=(3, 3)), (64, 64))
    bud = RenderBudget(8, 4)
    a = render_radiance(sc, 1, bud, texture)
    monkeypatch.setattr(render, "CHUNK_PATHS", 37)
    b = render_radiance(sc, 1, bud, texture)
    assert np.array_equal(a, b)
    assert np.all(np.isfinite(a)) and a.min() >= 0


def test_radiance_finite_nonnegative_over_scenes(texture):
    for seed in range(6):
        sc = sample_scene(SceneConfig(seed=seed, resolution=24, occluders=(6, 6), lights=(3, 3)), (64, 64))
        L = render_radiance(sc, 1, RenderBudget(4, 6), texture)
        assert np.all(np.isfinite(L)) and L.min() >= 0


def test_spp_convergence():
    tex = painting(3, 64, 64)
    errs = {4: [], 16: [], 64: []}
    for seed in range(10):
        sc = sample_scene(SceneConfig(seed=seed, resolution=20, occluders=(2, 2), lights=(2, 2)), (64, 64))
        ref = render_radiance(sc, 1, RenderBudget(512, 4), tex)
        for spp in errs:
            errs[spp].append(np.abs(render_radiance(sc, 1, RenderBudget(spp, 4), tex) - ref).mean())
    means = [np.mean(errs[s]) for s in (4, 16, 64)]
    assert means[0] > means[1] > means[2]


def test_budget_and_texture_errors():
    with pytest.raises(BudgetInvalid):
        RenderBudget(0, 1)
    with pytest.raises(BudgetInvalid):
        RenderBudget(1, 0)
    with pytest.raises(TextureMissing):
        render_view(clean_scene(), 1, RenderBudget(1, 1))
    with pytest.raises(TextureMissing):
        render_view(clean_scene(), 1, RenderBudget(1, 1), np.zeros((0, 0, 3)))


# -- direct lighting oracle -------------------------------------------------------------------


def plane_points(scene, frame=1):
    """World point seen through every pixel centre (z = 0 intersection)."""
    cam = scene.camera(frame)
    W, H = cam.resolution
    u, v = np.meshgrid(np.arange(W) + 0.5, np.arange(H) + 0.5)
    rays = np.stack([u, v, np.ones_like(u)], -1) @ np.linalg.inv(cam.K).T @ cam.pose.rotation
    C = cam.pose.center
    t = -C[2] / rays[..., 2]
    return C + t[..., None] * rays


def test_point_light_matches_closed_form():
    grey = np.full((64, 64, 3), 180, np.uint8)
    light = point_light((0.4, -0.3, 1.5), 10.0, (1.0, 0.8, 0.6))
    sc = with_frame(clean_scene(resolution=32), lights=[light])
    L = render_radiance(sc, 1, RenderBudget(1, 1, pixel_filter=0.0), grey)
    X = plane_points(sc)
    to_l = np.asarray(light.position) - X
    r2 = (to_l**2).sum(-1)
    cos = to_l[..., 2] / np.sqrt(r2)
    albedo = render.srgb_to_linear(180 / 255.0)
    expected = albedo / math.pi * light.intensity * cos / r2
    assert np.allclose(L, expected[..., None] * np.asarray(light.color), rtol=1e-9)


def test_hard_shadow_soundness():
    grey = np.full((64, 64, 3), 200, np.uint8)
    light = point_light((0.0, 0.0, 2.0), 20.0)
    cube_pos, half = np.array([0.1, 0.05, 0.5]), 0.2
    cube = occluder("Cube", cube_pos, (half, half, half))
    sc = with_frame(clean_scene(resolution=48), lights=[light], occluders=[cube], ambient=0.0)
    L = render_radiance(sc, 1, RenderBudget(16, 3, pixel_filter=0.0), grey)[..., 0]
    mask = render_mask(sc, 1)
    X = plane_points(sc)
    # slab test for the segment X -> light against the axis-aligned cube
    d = np.asarray(light.position) - X
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (cube_pos - half - X) / d
        t2 = (cube_pos + half - X) / d
    tn = np.fmax.reduce(np.fmin(t1, t2), axis=-1)
    tf = np.fmin.reduce(np.fmax(t1, t2), axis=-1)
    shadowed = (tn <= tf) & (tf > 0) & (tn < 1)
    r2 = (d**2).sum(-1)
    direct = render.srgb_to_linear(200 / 255.0) / math.pi * light.intensity * (d[..., 2] / np.sqrt(r2)) / r2
    vis = mask == 0
    assert (shadowed & vis).sum() > 20 and (~shadowed & vis).sum() > 100
    assert np.all(L[shadowed & vis] < direct[shadowed & vis])
    # unshadowed pixels receive at least the full direct term
    assert np.all(L[~shadowed & vis] >= direct[~shadowed & vis] * (1 - 1e-12))


# -- masks -------------------------------------------------------------------------------------


def test_clean_aligned_mask_is_black():
    sc = clean_scene(size=(96, 64), resolution=96)
    assert render_mask(sc, 1).max() == 0
    assert render_mask(sc, 0).max() == 0


@pytest.mark.parametrize("radius,zc", [(0.3, 0.5), (0.15, 1.2), (0.5, 0.8)])
def test_sphere_silhouette_radius(radius, zc):
    sc = with_frame(clean_scene(resolution=200), occluders=[occluder("Sphere", (0, 0, zc), (radius,) * 3)])
    mask = render_mask(sc, 1)
    assert set(np.unique(mask)) <= {0, 255}
    cam = sc.label_camera
    D = sc.label_camera.pose.center[2] - zc
    expected = cam.K[0, 0] * math.tan(math.asin(radius / D))
    measured = math.sqrt((mask == 255).sum() / math.pi)
    assert abs(measured - expected) < 1.0
    # the disk is centred on the principal point
    ys, xs = np.nonzero(mask)
    assert abs(xs.mean() + 0.5 - cam.K[0, 2]) < 0.5 and abs(ys.mean() + 0.5 - cam.K[1, 2]) < 0.5


def test_transparent_occluder_is_white_in_mask():
    occ = occluder("Sphere", (0, 0, 0.5), (0.3,) * 3, kind="Transparent", transmission=0.9)
    sc = with_frame(clean_scene(resolution=64), occluders=[occ])
    mask = render_mask(sc, 1)
    assert mask[32, 32] == 255 and mask[0, 0] == 0


def test_misaligned_mask_binary_and_consistent():
    sc = sample_scene(SceneConfig(seed=9, resolution=64, occluders=(5, 5)), (64, 48))
    for k in range(1, sc.n_frames + 1):
        mask = render_mask(sc, k)
        ids = render.primary_hits(sc, k)
        assert set(np.unique(mask)) <= {0, 255}
        assert np.array_equal(mask == 255, ids != render.PLANE_ID)


def test_warp_probe_detects_one_pixel_offset():
    tex = painting(5, 128, 128)
    sc = sample_scene(SceneConfig(seed=1, resolution=128, occluders=0, randomize_lights=False, frames=2), (128, 128))
    bud = RenderBudget(8, 2)
    a, b = render_view(sc, 1, bud, tex), render_view(sc, 2, bud, tex)
    H = geo.homography_between(sc.camera(2), sc.camera(1))
    shift = np.array([[1.0, 0, 1.0], [0, 1.0, 0], [0, 0, 1.0]])

    def mad(M):
        w = geo.warp_image(b, M)
        ok = w.valid & (render_mask(sc, 1) == 0) & (geo.warp_image(render_mask(sc, 2).astype(float), M, fill=255.0).image == 0)
        return np.abs(w.image.astype(float) - a.astype(float))[ok].mean()

    exact, off = mad(H), mad(shift @ H)
    assert exact < 1.0 and off > 2 * exact
