"""Projective geometry for a textured plane seen by calibrated pinhole cameras.

Conventions
-----------
World frame: the painting lies on z = 0 centred at the origin, cameras sit at
z > 0. Camera frame follows the usual vision convention (x right, y down,
z forward). Pixel coordinates are continuous with pixel ``(c, r)`` covering
``[c, c+1) x [r, r+1)``, so pixel centres sit on half-integers and the
calibration matrix maps the sensor rectangle onto ``[0, W] x [0, H]``.

Homographies are plain ``(3, 3)`` float arrays mapping pixels of image i to
pixels of image j. Anything returned from this module is canonical: scaled to
``|det| = 1`` with its largest-magnitude entry positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DegenerateProjection,
    InvalidDimension,
    PlaneThroughCenter,
    SingularCalibration,
    SingularHomography,
)

DET_EPS = 1e-12
DLT_SIGMA_RATIO = 1e-10


def _frozen(a, shape=None) -> np.ndarray:
    a = np.array(a, dtype=float)
    if shape is not None and a.shape != shape:
        raise ValueError(f"expected shape {shape}, got {a.shape}")
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlaneSpec:
    """The textured canonical plane z = 0 of size ``width x height``."""

    width: float
    height: float
    texture: str | None = None

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InvalidDimension(f"plane size must be positive: {self.width}x{self.height}")

    @classmethod
    def for_texture(cls, tex_width: int, tex_height: int, max_dim: float = 2.0, texture=None):
        """Plane with the texture's aspect ratio whose larger side is ``max_dim``."""
        if tex_width <= 0 or tex_height <= 0:
            raise InvalidDimension("texture must be non-empty")
        if tex_width >= tex_height:
            return cls(max_dim, max_dim * tex_height / tex_width, texture)
        return cls(max_dim * tex_width / tex_height, max_dim, texture)

    @property
    def corners(self) -> np.ndarray:
        """Homogeneous corners X1..X4 as rows: (w/2,h/2), (-w/2,h/2), (w/2,-h/2), (-w/2,-h/2)."""
        w2, h2 = self.width / 2.0, self.height / 2.0
        return np.array(
            [[w2, h2, 0.0, 1.0], [-w2, h2, 0.0, 1.0], [w2, -h2, 0.0, 1.0], [-w2, -h2, 0.0, 1.0]]
        )

    @property
    def plane(self) -> "Plane3D":
        return Plane3D(np.array([0.0, 0.0, 1.0]), 0.0)


@dataclass(frozen=True)
class CameraIntrinsics:
    sensor_width: float
    sensor_height: float
    principal_distance: float
    resolution: tuple[int, int]  # (width, height) in pixels
    principal_point: tuple[float, float] | None = None

    def __post_init__(self):
        w, h = self.resolution
        object.__setattr__(self, "resolution", (int(w), int(h)))
        if self.principal_distance <= 0:
            raise InvalidDimension("principal distance must be positive")
        if self.sensor_width <= 0 or self.sensor_height <= 0:
            raise InvalidDimension("sensor size must be positive")
        if w <= 0 or h <= 0:
            raise InvalidDimension(f"resolution must be positive: {self.resolution}")
        if self.principal_point is None:
            object.__setattr__(self, "principal_point", (w / 2.0, h / 2.0))
        else:
            object.__setattr__(self, "principal_point", tuple(float(v) for v in self.principal_point))

    @property
    def K(self) -> np.ndarray:
        W, H = self.resolution
        cx, cy = self.principal_point
        fx = self.principal_distance * W / self.sensor_width
        fy = self.principal_distance * H / self.sensor_height
        return np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera transform ``X_cam = R X + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _frozen(self.rotation, (3, 3))
        t = _frozen(self.translation, (3,))
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation must have det +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation

    @property
    def optical_axis(self) -> np.ndarray:
        return self.rotation[2].copy()

    def __eq__(self, other):
        if not isinstance(other, CameraPose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )

    __hash__ = None


@dataclass(frozen=True)
class Camera:
    intrinsics: CameraIntrinsics
    pose: CameraPose

    @property
    def K(self) -> np.ndarray:
        return self.intrinsics.K

    @property
    def P(self) -> np.ndarray:
        """3x4 projection matrix K [R | t]."""
        return self.K @ np.column_stack([self.pose.rotation, self.pose.translation])

    @property
    def resolution(self) -> tuple[int, int]:
        return self.intrinsics.resolution


@dataclass(frozen=True)
class Plane3D:
    """Plane ``n . X + d = 0`` with unit normal ``n``."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("plane normal must be nonzero")
        object.__setattr__(self, "normal", _frozen(n / norm, (3,)))
        object.__setattr__(self, "offset", float(self.offset) / norm)

    @property
    def homogeneous(self) -> np.ndarray:
        """pi = (v, 1) scaled so the last entry is one (requires offset != 0)."""
        if abs(self.offset) < 1e-12:
            raise PlaneThroughCenter("plane passes through the origin")
        return np.append(self.normal / self.offset, 1.0)


# ---------------------------------------------------------------------------
# Homography normalisation
# ---------------------------------------------------------------------------


def is_singular(H) -> bool:
    """Scale-free singularity test: |det| of H scaled to unit max-entry below 1e-12."""
    H = np.asarray(H, dtype=float)
    m = np.abs(H).max()
    if not np.isfinite(m) or m == 0:
        return True
    return abs(np.linalg.det(H / m)) < DET_EPS


def canonicalize(H) -> np.ndarray:
    """Unique representative of the projective class of ``H``.

    Scaled by the real cube root of its determinant (so ``|det| = 1``) and
    sign-flipped so that the largest-magnitude entry is positive.
    """
    H = np.asarray(H, dtype=float)
    if is_singular(H):
        raise SingularHomography("homography is singular")
    Hc = H / np.cbrt(np.linalg.det(H))
    flat = Hc.ravel()
    mags = np.abs(flat)
    # first entry within rounding of the max, so near-ties resolve the same way
    k = int(np.flatnonzero(mags >= mags.max() * (1.0 - 1e-9))[0])
    if flat[k] < 0:
        Hc = -Hc
    return Hc


def normalize_det(H) -> np.ndarray:
    """Divide by the signed real cube root of det, giving det exactly near +1."""
    H = np.asarray(H, dtype=float)
    if is_singular(H):
        raise SingularHomography("homography is singular")
    return H / np.cbrt(np.linalg.det(H))


def homography_distance(Ha, Hb) -> float:
    """Frobenius distance between two homographies after det-normalisation.

    Each matrix is divided by the real cube root of its determinant, so the
    result does not depend on the arbitrary projective scale of either input.
    """
    return float(np.linalg.norm(normalize_det(Ha) - normalize_det(Hb)))


def compose(H_ij, H_jk) -> np.ndarray:
    """H_ik = H_jk @ H_ij (first i -> j, then j -> k)."""
    return canonicalize(np.asarray(H_jk, dtype=float) @ np.asarray(H_ij, dtype=float))


def invert(H_ij) -> np.ndarray:
    H_ij = np.asarray(H_ij, dtype=float)
    if is_singular(H_ij):
        raise SingularHomography("cannot invert a singular homography")
    return canonicalize(np.linalg.inv(H_ij))


def apply_homography(H, pts) -> np.ndarray:
    """Map (N, 2) inhomogeneous points through ``H``."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    ph = np.column_stack([pts, np.ones(len(pts))]) @ np.asarray(H, dtype=float).T
    return ph[:, :2] / ph[:, 2:3]


# ---------------------------------------------------------------------------
# Cameras and projection
# ---------------------------------------------------------------------------


def project(K, pose: CameraPose, X) -> np.ndarray:
    """Homogeneous pixel ``K (R X + t)`` of a 3D point.

    ``X`` may be a 3-vector or a homogeneous 4-vector. The third output
    coordinate is the camera-frame depth of the point.
    """
    X = np.asarray(X, dtype=float)
    if X.shape == (4,):
        if X[3] == 0:
            raise DegenerateProjection("point at infinity")
        X = X[:3] / X[3]
    x = np.asarray(K, dtype=float) @ (pose.rotation @ X + pose.translation)
    if abs(x[2]) < 1e-12:
        raise DegenerateProjection("point lies on the principal plane of the camera")
    return x


def project_points(camera: Camera, X) -> np.ndarray:
    """Inhomogeneous pixel coordinates of (N, 3) or (N, 4) points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.empty((len(X), 2))
    for k, Xk in enumerate(X):
        x = project(camera.K, camera.pose, Xk)
        out[k] = x[:2] / x[2]
    return out


def aligned_focal_length(distance: float, image_width: float, sensor_width: float) -> float:
    """Principal distance at which a sensor exactly frames an image of width ``image_width``.

    Similar triangles give ``f / d = w' / w``.
    """
    if not (distance > 0 and image_width > 0 and sensor_width > 0):
        raise InvalidDimension(
            f"distance, image width and sensor width must be positive "
            f"(got {distance}, {image_width}, {sensor_width})"
        )
    return distance * sensor_width / image_width


def look_at(position, target=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0)) -> CameraPose:
    """Pose of a camera at ``position`` whose optical axis passes through ``target``.

    Falls back to +x as the up vector when the axis is within 1e-6 of the
    requested one.
    """
    C = np.asarray(position, dtype=float)
    forward = np.asarray(target, dtype=float) - C
    dist = np.linalg.norm(forward)
    if dist == 0:
        raise DegenerateProjection("camera position coincides with look-at target")
    forward = forward / dist
    up = np.asarray(up, dtype=float)
    up = up / np.linalg.norm(up)
    if 1.0 - abs(forward @ up) < 1e-6:
        up = np.array([1.0, 0.0, 0.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.vstack([right, down, forward])
    return CameraPose(R, -R @ C)


def camera_from_fov(position, fov_deg: float, resolution, sensor_width: float = 0.036) -> Camera:
    """Look-at camera with horizontal field of view ``fov_deg`` and square pixels."""
    W, H = resolution
    f = 0.5 * sensor_width / np.tan(np.radians(fov_deg) / 2.0)
    intr = CameraIntrinsics(sensor_width, sensor_width * H / W, f, (W, H))
    return Camera(intr, look_at(position))


def build_aligned_camera(plane: PlaneSpec, distance: float, sensor_width: float = 0.036,
                         resolution=None) -> Camera:
    """Camera on the plane normal at ``distance`` that frames the plane exactly.

    The sensor gets the plane's aspect ratio; ``resolution`` defaults to
    ``(1000, round(1000 h / w))``-style proportions when omitted.
    """
    if not distance > 0:
        raise InvalidDimension(f"distance must be positive, got {distance}")
    f = aligned_focal_length(distance, plane.width, sensor_width)
    sensor_height = sensor_width * plane.height / plane.width
    if resolution is None:
        resolution = resolution_for_aspect(plane.width / plane.height, 1000)
    intr = CameraIntrinsics(sensor_width, sensor_height, f, tuple(resolution))
    return Camera(intr, look_at((0.0, 0.0, distance)))


def resolution_for_aspect(aspect: float, long_side: int) -> tuple[int, int]:
    """(W, H) with the larger side ``long_side`` and W/H close to ``aspect``."""
    if aspect >= 1:
        return int(long_side), max(1, int(round(long_side / aspect)))
    return max(1, int(round(long_side * aspect))), int(long_side)


# ---------------------------------------------------------------------------
# Homographies
# ---------------------------------------------------------------------------


def relative_pose(pose_i: CameraPose, pose_j: CameraPose):
    """(R, t) of camera j expressed in the frame of camera i."""
    R = pose_j.rotation @ pose_i.rotation.T
    t = pose_j.translation - R @ pose_i.translation
    return R, t


def homography_from_pose_plane(K_i, pose_i: CameraPose, K_j, pose_j: CameraPose,
                               plane: Plane3D) -> np.ndarray:
    """Plane-induced homography from image i to image j.

    Moves the origin into camera i's projection centre, re-expresses the
    plane there as ``n' . X + d' = 0`` and evaluates
    ``K_j (R - t n'^T / d') K_i^-1``.
    """
    K_i = np.asarray(K_i, dtype=float)
    K_j = np.asarray(K_j, dtype=float)
    if is_singular(K_i):
        raise SingularCalibration("K_i is not invertible")
    R, t = relative_pose(pose_i, pose_j)
    n = pose_i.rotation @ plane.normal
    d = plane.offset - n @ pose_i.translation
    if abs(d) < 1e-9:
        raise PlaneThroughCenter("plane passes through the projection centre of camera i")
    H = K_j @ (R - np.outer(t, n) / d) @ np.linalg.inv(K_i)
    return canonicalize(H)


def homography_between(cam_i: Camera, cam_j: Camera, plane: Plane3D | None = None) -> np.ndarray:
    if plane is None:
        plane = Plane3D(np.array([0.0, 0.0, 1.0]), 0.0)
    return homography_from_pose_plane(cam_i.K, cam_i.pose, cam_j.K, cam_j.pose, plane)


def nullspace_last_singular_vector(A) -> np.ndarray:
    """Unit vector minimising ``|A v|``: the last right-singular vector of A."""
    A = np.asarray(A, dtype=float)
    _, _, Vt = np.linalg.svd(A, full_matrices=True)
    return Vt[-1]


def _hartley_transform(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(pts - c, axis=1))
    if mean_dist < 1e-300:
        raise DegenerateConfiguration("points are coincident")
    s = np.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def dlt_design_matrix(src_h, dst_h) -> np.ndarray:
    """Stack the two-row blocks ``[0, -w' x^T, y' x^T; -w' x^T, 0, x' x^T]``."""
    rows = []
    for x, (xp, yp, wp) in zip(np.asarray(src_h, float), np.asarray(dst_h, float)):
        z = np.zeros(3)
        rows.append(np.concatenate([z, -wp * x, yp * x]))
        rows.append(np.concatenate([-wp * x, z, xp * x]))
    return np.array(rows)


def dlt_homography(src, dst, normalize: bool = True) -> np.ndarray:
    """Homography from four point correspondences ``src[k] -> dst[k]``.

    Points are (4, 2) inhomogeneous or (4, 3) homogeneous. With ``normalize``
    both sets are conditioned (centroid to origin, mean distance sqrt(2))
    before the design matrix is built and the transform is undone afterwards.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.shape[1] == 3:
        src = src[:, :2] / src[:, 2:3]
    if dst.shape[1] == 3:
        dst = dst[:, :2] / dst[:, 2:3]
    if src.shape != (4, 2) or dst.shape != (4, 2):
        raise ValueError("dlt_homography expects exactly four correspondences")
    T_src = _hartley_transform(src) if normalize else np.eye(3)
    T_dst = _hartley_transform(dst) if normalize else np.eye(3)
    xs = np.column_stack([src, np.ones(4)]) @ T_src.T
    xd = np.column_stack([dst, np.ones(4)]) @ T_dst.T
    A = dlt_design_matrix(xs, xd)
    sigma = np.linalg.svd(A, compute_uv=False)
    if sigma[0] == 0 or sigma[7] / sigma[0] < DLT_SIGMA_RATIO:
        raise DegenerateConfiguration("correspondences are degenerate (rank(A) < 8)")
    h = nullspace_last_singular_vector(A)
    Hn = h.reshape(3, 3)
    try:
        return canonicalize(np.linalg.inv(T_dst) @ Hn @ T_src)
    except SingularHomography as exc:
        # rank-8 system whose solution is rank deficient: three collinear points on one side
        raise DegenerateConfiguration("correspondences map to a singular homography") from exc


def corner_homography(cam_i: Camera, cam_j: Camera, plane: PlaneSpec) -> np.ndarray:
    """Homography i -> j from the four projected plane corners (DLT route)."""
    xi = project_points(cam_i, plane.corners)
    xj = project_points(cam_j, plane.corners)
    return dlt_homography(xi, xj)


def corner_transport_error(H_ij, cam_i: Camera, cam_j: Camera, plane: PlaneSpec) -> float:
    """Max pixel error of H_ij carrying projected corners from image i to image j."""
    xi = project_points(cam_i, plane.corners)
    xj = project_points(cam_j, plane.corners)
    return float(np.max(np.linalg.norm(apply_homography(H_ij, xi) - xj, axis=1)))


def condition_number(H) -> float:
    return float(np.linalg.cond(np.asarray(H, dtype=float)))


# ---------------------------------------------------------------------------
# Warping
# ---------------------------------------------------------------------------


@dataclass
class WarpResult:
    image: np.ndarray
    valid: np.ndarray = field(repr=False)


def warp_image(source, H, target_resolution=None, fill=0) -> WarpResult:
    """Inverse-warp ``source`` into the frame that ``H`` maps it to.

    For every target pixel centre p the source is sampled bilinearly at
    ``H^-1 p``. Target pixels whose sample falls outside the interpolable
    area of the source get ``fill`` and ``valid = False``.
    """
    src = np.asarray(source)
    H = np.asarray(H, dtype=float)
    if is_singular(H):
        raise SingularHomography("cannot warp with a singular homography")
    # The canonical sign can be negative; between two cameras on the same side of
    # the plane the orientation-preserving representative has det > 0 and w > 0.
    if np.linalg.det(H) < 0:
        H = -H
    Hinv = np.linalg.inv(H)
    sh, sw = src.shape[:2]
    if target_resolution is None:
        tw, th = sw, sh
    else:
        tw, th = target_resolution
    ys, xs = np.mgrid[0:th, 0:tw]
    px = xs.astype(float) + 0.5
    py = ys.astype(float) + 0.5
    qx = Hinv[0, 0] * px + Hinv[0, 1] * py + Hinv[0, 2]
    qy = Hinv[1, 0] * px + Hinv[1, 1] * py + Hinv[1, 2]
    qw = Hinv[2, 0] * px + Hinv[2, 1] * py + Hinv[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = qx / qw - 0.5
        v = qy / qw - 0.5
    tol = 1e-9
    valid = (qw > 0) & (u >= -tol) & (u <= sw - 1 + tol) & (v >= -tol) & (v <= sh - 1 + tol)
    u = np.clip(np.where(valid, u, 0.0), 0.0, sw - 1)
    v = np.clip(np.where(valid, v, 0.0), 0.0, sh - 1)
    x0 = np.minimum(np.floor(u).astype(np.intp), max(sw - 2, 0))
    y0 = np.minimum(np.floor(v).astype(np.intp), max(sh - 2, 0))
    x1 = np.minimum(x0 + 1, sw - 1)
    y1 = np.minimum(y0 + 1, sh - 1)
    a = u - x0
    b = v - y0
    data = src.astype(float)
    if data.ndim == 2:
        data = data[..., None]
    a = a[..., None]
    b = b[..., None]
    top = data[y0, x0] * (1.0 - a) + data[y0, x1] * a
    bottom = data[y1, x0] * (1.0 - a) + data[y1, x1] * a
    out = top * (1.0 - b) + bottom * b
    out[~valid] = fill
    if np.issubdtype(src.dtype, np.integer):
        info = np.iinfo(src.dtype)
        out = np.clip(np.rint(out), info.min, info.max)
    out = out.astype(src.dtype)
    if src.ndim == 2:
        out = out[..., 0]
    return WarpResult(out, valid)
