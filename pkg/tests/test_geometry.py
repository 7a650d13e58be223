import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sidar_forge import geometry as geo
from sidar_forge.errors import (
    DegenerateConfiguration,
    DegenerateProjection,
    InvalidDimension,
    PlaneThroughCenter,
    SingularHomography,
)
from sidar_forge.scene import SceneConfig, sample_cameras
from sidar_forge.rng import stream

Z0 = geo.Plane3D(np.array([0.0, 0.0, 1.0]), 0.0)
IDENTITY_POSE = geo.CameraPose(np.eye(3), np.zeros(3))


def random_cameras(n, seed=0, resolution=(320, 240)):
    return sample_cameras(n, stream(seed, "test-cameras"), SceneConfig(), resolution)


def random_homography(rng):
    while True:
        H = np.eye(3) + rng.normal(scale=0.3, size=(3, 3))
        if abs(np.linalg.det(H)) > 0.1:
            return H


# -- project ------------------------------------------------------------------


def test_project_identity_camera_on_axis():
    assert np.array_equal(geo.project(np.eye(3), IDENTITY_POSE, [0, 0, 1]), [0, 0, 1])


def test_project_translated_point():
    pose = geo.CameraPose(np.eye(3), [0, 0, 2])
    x = geo.project(np.eye(3), pose, [1, 1, 0])
    assert np.array_equal(x, [1, 1, 2])
    assert np.array_equal(x[:2] / x[2], [0.5, 0.5])


def test_project_rejects_principal_plane():
    with pytest.raises(DegenerateProjection):
        geo.project(np.eye(3), IDENTITY_POSE, [1, 1, 0])


def test_project_third_coordinate_is_depth():
    cam = random_cameras(1)[0]
    X = np.array([0.3, -0.2, 0.0])
    x = geo.project(cam.K, cam.pose, X)
    depth = (cam.pose.rotation @ X + cam.pose.translation)[2]
    assert x[2] == pytest.approx(depth, abs=1e-12)


def test_projection_matches_homography_transport():
    plane = geo.PlaneSpec(2.0, 1.5)
    ci, cj = random_cameras(2, seed=4)
    H = geo.homography_between(ci, cj)
    for X in plane.corners:
        xi = geo.project(ci.K, ci.pose, X)
        xj = geo.project(cj.K, cj.pose, X)
        mapped = H @ xi
        assert np.linalg.norm(mapped[:2] / mapped[2] - xj[:2] / xj[2]) < 1e-9


# -- aligned focal length ----------------------------------------------------------


def test_aligned_focal_length_examples():
    assert geo.aligned_focal_length(1.0, 3.0, 3.0) == 1.0
    assert geo.aligned_focal_length(2.0, 4.0, 1.0) == 0.5


@pytest.mark.parametrize("args", [(0, 1, 1), (1, 0, 1), (1, 1, 0), (-1, 1, 1)])
def test_aligned_focal_length_rejects_nonpositive(args):
    with pytest.raises(InvalidDimension):
        geo.aligned_focal_length(*args)


# -- plane-induced homography --------------------------------------------------------


def test_identical_poses_give_identity():
    pose = geo.look_at([0.3, 0.2, 2.0])
    H = geo.homography_from_pose_plane(np.eye(3), pose, np.eye(3), pose, Z0)
    assert np.allclose(H, np.eye(3), atol=1e-12)


def test_pure_rotation_is_plane_independent():
    K_i = np.array([[500.0, 0, 160], [0, 500, 120], [0, 0, 1]])
    K_j = np.array([[420.0, 0, 150], [0, 420, 130], [0, 0, 1]])
    C = np.array([0.2, -0.1, 2.5])
    pi = geo.look_at(C)
    pj = geo.look_at(C, target=[0.4, 0.3, 0.0])
    R = pj.rotation @ pi.rotation.T
    expected = geo.canonicalize(K_j @ R @ np.linalg.inv(K_i))
    for plane in (Z0, geo.Plane3D([0.2, 0.1, 1.0], -0.3), geo.Plane3D([1.0, 0.0, 0.2], 4.0)):
        H = geo.homography_from_pose_plane(K_i, pi, K_j, pj, plane)
        assert np.allclose(H, expected, atol=1e-9)


def test_plane_through_center_rejected():
    pose = geo.look_at([0.0, 0.0, 2.0])
    plane = geo.Plane3D([0.0, 1.0, 0.0], 0.0)  # y = 0 contains the camera centre
    with pytest.raises(PlaneThroughCenter):
        geo.homography_from_pose_plane(np.eye(3), pose, np.eye(3), geo.look_at([1, 0, 2]), plane)


def test_analytic_matches_dlt_on_random_pairs():
    plane = geo.PlaneSpec(2.0, 1.5)
    cams = random_cameras(60, seed=11)
    for ci, cj in zip(cams[::2], cams[1::2]):
        Ha = geo.homography_between(ci, cj)
        Hd = geo.corner_homography(ci, cj, plane)
        assert np.linalg.norm(Ha - Hd) < 1e-6


def test_general_plane_transport():
    # plane not through the origin, cameras looking at it
    plane = geo.Plane3D([0.1, -0.2, 1.0], -0.25)
    ci, cj = random_cameras(2, seed=5)
    H = geo.homography_from_pose_plane(ci.K, ci.pose, cj.K, cj.pose, plane)
    rng = np.random.default_rng(0)
    n, d = plane.normal, plane.offset
    for _ in range(5):
        xy = rng.uniform(-0.5, 0.5, 2)
        z = -(d + n[0] * xy[0] + n[1] * xy[1]) / n[2]
        X = np.array([xy[0], xy[1], z])
        xi = geo.project(ci.K, ci.pose, X)
        xj = geo.project(cj.K, cj.pose, X)
        m = H @ xi
        assert np.linalg.norm(m[:2] / m[2] - xj[:2] / xj[2]) < 1e-8


# -- DLT ------------------------------------------------------------------------------

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def test_dlt_identity():
    assert np.allclose(geo.dlt_homography(SQUARE, SQUARE), np.eye(3), atol=1e-12)


def test_dlt_translation():
    H = geo.dlt_homography(SQUARE, SQUARE + [1.0, 2.0])
    expected = geo.canonicalize([[1, 0, 1], [0, 1, 2], [0, 0, 1]])
    assert np.allclose(H, expected, atol=1e-12)


def test_dlt_reprojection_random():
    rng = np.random.default_rng(3)
    for _ in range(50):
        src = rng.uniform(0, 500, (4, 2))
        dst = rng.uniform(0, 500, (4, 2))
        try:
            H = geo.dlt_homography(src, dst)
        except DegenerateConfiguration:
            continue
        assert np.max(np.abs(geo.apply_homography(H, src) - dst)) < 1e-9


def test_dlt_residual_bound_unnormalized():
    rng = np.random.default_rng(8)
    src = rng.uniform(-1, 1, (4, 2))
    dst = rng.uniform(-1, 1, (4, 2))
    H = geo.dlt_homography(src, dst, normalize=False)
    A = geo.dlt_design_matrix(np.column_stack([src, np.ones(4)]), np.column_stack([dst, np.ones(4)]))
    h = H.ravel() / np.linalg.norm(H)
    assert np.linalg.norm(A @ h) <= 1e-9 * np.linalg.norm(A)


def test_dlt_design_block_layout():
    x = np.array([2.0, 3.0, 1.0])
    xp = np.array([5.0, 7.0, 1.0])
    A = geo.dlt_design_matrix([x], [xp])
    assert np.array_equal(A[0], [0, 0, 0, -2, -3, -1, 14, 21, 7])
    assert np.array_equal(A[1], [-2, -3, -1, 0, 0, 0, 10, 15, 5])


def test_dlt_collinear_degenerate():
    src = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    with pytest.raises(DegenerateConfiguration):
        geo.dlt_homography(src, SQUARE)


# -- null space -------------------------------------------------------------------------


def test_nullspace_explicit():
    A = np.hstack([np.eye(8), np.zeros((8, 1))])
    v = geo.nullspace_last_singular_vector(A)
    assert np.allclose(np.abs(v), np.eye(9)[8])


def test_nullspace_zero_matrix():
    v = geo.nullspace_last_singular_vector(np.zeros((8, 9)))
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.linalg.norm(np.zeros((8, 9)) @ v) == 0.0


def test_nullspace_of_dlt_stack_reprojects():
    rng = np.random.default_rng(2)
    src = rng.uniform(0, 1, (4, 2))
    H_true = random_homography(rng)
    dst = geo.apply_homography(H_true, src)
    A = geo.dlt_design_matrix(np.column_stack([src, np.ones(4)]), np.column_stack([dst, np.ones(4)]))
    v = geo.nullspace_last_singular_vector(A)
    assert np.linalg.norm(A @ v) <= 1e-9 * np.linalg.norm(A)
    assert np.max(np.abs(geo.apply_homography(v.reshape(3, 3), src) - dst)) < 1e-9


# -- compose / invert -------------------------------------------------------------------


def test_compose_with_inverse_is_identity():
    H = geo.canonicalize(random_homography(np.random.default_rng(1)))
    assert np.allclose(geo.compose(H, geo.invert(H)), np.eye(3), atol=1e-9)


def test_compose_identity_left():
    H = geo.canonicalize(random_homography(np.random.default_rng(5)))
    assert np.allclose(geo.compose(np.eye(3), H), H, atol=1e-12)


def test_cocycle_three_cameras():
    for seed in range(5):
        c1, c2, c3 = random_cameras(3, seed=seed)
        H12, H23, H13 = geo.homography_between(c1, c2), geo.homography_between(c2, c3), geo.homography_between(c1, c3)
        assert np.linalg.norm(geo.compose(H12, H23) - H13) < 1e-6
        assert geo.homography_distance(geo.invert(H12), geo.homography_between(c2, c1)) < 1e-6


def test_invert_singular():
    with pytest.raises(SingularHomography):
        geo.invert(np.diag([1.0, 1.0, 0.0]))


# -- distance ----------------------------------------------------------------------------


def test_distance_zero_for_equal():
    H = random_homography(np.random.default_rng(0))
    assert geo.homography_distance(H, H) == 0.0


def test_distance_scale_invariant_factor_five():
    H = geo.canonicalize(random_homography(np.random.default_rng(4)))
    assert geo.homography_distance(H, 5 * H) == pytest.approx(0.0, abs=1e-14)


def test_distance_arithmetic_oracle():
    # diag(1,1,8) / cbrt(8) = diag(0.5, 0.5, 4); difference to I has entries -0.5, -0.5, 3
    expected = math.sqrt((0.5 - 1) ** 2 + (0.5 - 1) ** 2 + (4 - 1) ** 2)
    got = geo.homography_distance(np.eye(3), np.diag([1.0, 1.0, 8.0]))
    assert abs(got - expected) < 1e-12
    assert abs(expected - math.sqrt(9.5)) < 1e-15


def test_distance_singular():
    with pytest.raises(SingularHomography):
        geo.homography_distance(np.eye(3), np.zeros((3, 3)))


# -- canonical form properties ----------------------------------------------------------------

matrices = st.lists(st.floats(-10, 10, allow_nan=False, allow_infinity=False), min_size=9, max_size=9).map(
    lambda v: np.array(v).reshape(3, 3)
)
scales = st.floats(1e-3, 1e3).flatmap(lambda m: st.sampled_from([m, -m]))


@settings(max_examples=200, deadline=None)
@given(matrices, scales)
def test_canonical_quotients_scale(H, c):
    if geo.is_singular(H) or np.linalg.cond(H) > 1e6:
        return
    A = geo.canonicalize(H)
    B = geo.canonicalize(c * H)
    assert abs(abs(np.linalg.det(A)) - 1.0) < 1e-9
    assert np.allclose(A, B, rtol=1e-9, atol=1e-9)
    assert np.allclose(geo.canonicalize(A), A, rtol=1e-12, atol=1e-12)
    k = np.argmax(np.abs(A))
    assert A.ravel()[k] > 0


@settings(max_examples=200, deadline=None)
@given(matrices, scales, scales)
def test_distance_pseudometric(H, a, b):
    if geo.is_singular(H) or np.linalg.cond(H) > 1e6:
        return
    G = H + np.eye(3)
    if geo.is_singular(G):
        return
    assert geo.homography_distance(a * H, b * H) < 1e-9 * max(1.0, np.abs(geo.normalize_det(H)).max())
    assert geo.homography_distance(H, G) == pytest.approx(geo.homography_distance(G, H))
    assert geo.homography_distance(H, G) >= 0


# -- warping -------------------------------------------------------------------------------------


def test_warp_identity_bit_exact(texture):
    res = geo.warp_image(texture, np.eye(3))
    assert np.array_equal(res.image, texture)
    assert res.valid.all()


def test_warp_integer_translation(texture):
    H = geo.canonicalize([[1, 0, 10], [0, 1, 0], [0, 0, 1]])
    res = geo.warp_image(texture, H)
    assert np.array_equal(res.image[:, 10:], texture[:, :-10])
    assert not res.valid[:, :10].any()
    assert res.valid[:, 10:].all()
    assert (res.image[:, :10] == 0).all()


def test_warp_grayscale_and_fill():
    img = np.arange(64, dtype=np.uint8).reshape(8, 8)
    res = geo.warp_image(img, geo.canonicalize([[1, 0, -3], [0, 1, 0], [0, 0, 1]]), fill=7)
    assert res.image.shape == (8, 8)
    assert np.array_equal(res.image[:, :5], img[:, 3:])
    assert (res.image[:, 5:] == 7).all()


def test_warp_bilinear_half_pixel():
    img = np.array([[0.0, 10.0, 20.0]])
    img = np.repeat(img, 3, axis=0)
    res = geo.warp_image(img, [[1, 0, -0.5], [0, 1, 0], [0, 0, 1]])
    assert res.image[1, 0] == pytest.approx(5.0)
    assert res.image[1, 1] == pytest.approx(15.0)
    assert not res.valid[1, 2]


def test_warp_singular():
    with pytest.raises(SingularHomography):
        geo.warp_image(np.zeros((4, 4)), np.zeros((3, 3)))


# -- cameras ---------------------------------------------------------------------------------------


def test_look_at_axis_through_origin():
    for C in ([1.0, 2.0, 3.0], [0.0, 0.0, 2.0], [-1.2, 0.4, 1.6]):
        pose = geo.look_at(C)
        to_origin = -np.asarray(C) / np.linalg.norm(C)
        angle = np.arctan2(np.linalg.norm(np.cross(pose.optical_axis, to_origin)), pose.optical_axis @ to_origin)
        assert angle < 1e-9


def test_look_at_up_fallback():
    pose = geo.look_at([0.0, 3.0, 0.0])
    assert np.allclose(pose.rotation @ pose.rotation.T, np.eye(3), atol=1e-12)
    assert np.allclose(pose.optical_axis, [0, -1, 0])


def test_pose_rejects_non_rotation():
    with pytest.raises(ValueError):
        geo.CameraPose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_plane_corners():
    p = geo.PlaneSpec(4.0, 3.0)
    assert np.array_equal(p.corners[:, :3], [[2, 1.5, 0], [-2, 1.5, 0], [2, -1.5, 0], [-2, -1.5, 0]])
    assert p.plane.normal @ p.corners[0, :3] + p.plane.offset == 0


def test_plane_for_texture_aspect():
    p = geo.PlaneSpec.for_texture(640, 480)
    assert p.width / p.height == pytest.approx(640 / 480)
    assert max(p.width, p.height) == 2.0
