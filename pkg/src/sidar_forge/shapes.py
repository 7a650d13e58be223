"""Vectorised ray intersection with the unit occluder primitives.

Every primitive lives in its own local frame (unit sphere, cube [-1, 1]^3,
cylinder and cone of radius 1 over z in [-1, 1], torus around the z axis)
and is placed in the world by ``X = R diag(s) x + p``. Rays are mapped into
the local frame with the same parameter ``t``; directions are not
normalised there, which keeps world and local hit distances identical.
"""

from __future__ import annotations

import numpy as np

TORUS_MAJOR = 0.7
TORUS_MINOR = 0.3

# bounding-sphere radius of each unit primitive
BOUND_RADIUS = {
    "Sphere": 1.0,
    "Cube": float(np.sqrt(3.0)),
    "Cylinder": float(np.sqrt(2.0)),
    "Cone": float(np.sqrt(2.0)),
    "Torus": TORUS_MAJOR + TORUS_MINOR,
}


def _dot(a, b):
    return a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]


def apply3(M, v):
    """Row-wise ``M @ v[k]`` without BLAS, so results never depend on batch size or threads."""
    return (v[:, 0:1] * M[:, 0] + v[:, 1:2] * M[:, 1]) + v[:, 2:3] * M[:, 2]


def _pick(t_a, t_b, tmin):
    """Nearest of two candidate distances above ``tmin`` (inf when none)."""
    t_a = np.where(t_a > tmin, t_a, np.inf)
    t_b = np.where(t_b > tmin, t_b, np.inf)
    return np.minimum(t_a, t_b)


def _quadratic(a, b, c):
    """Roots of a t^2 + 2 b t + c = 0 (nan when none)."""
    disc = b * b - a * c
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        # numerically stable pairing
        q = -(b + np.copysign(sq, b))
        t0 = q / a
        t1 = c / q
    lo = np.minimum(t0, t1)
    hi = np.maximum(t0, t1)
    lo[~ok] = np.nan
    hi[~ok] = np.nan
    return lo, hi


def sphere(o, d, tmin):
    lo, hi = _quadratic(_dot(d, d), _dot(o, d), _dot(o, o) - 1.0)
    t = _pick(lo, hi, tmin)
    return t, np.zeros(len(t), dtype=np.int8)


def sphere_normal(p, part):
    return p


def cube(o, d, tmin):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-1.0 - o) * inv
        t2 = (1.0 - o) * inv
    tlo = np.fmin(t1, t2)
    thi = np.fmax(t1, t2)
    # rays parallel to a slab: inside -> (-inf, inf), outside -> empty
    par = d == 0
    inside = np.abs(o) <= 1.0
    tlo = np.where(par, np.where(inside, -np.inf, np.inf), tlo)
    thi = np.where(par, np.where(inside, np.inf, -np.inf), thi)
    tnear = tlo.max(axis=1)
    tfar = thi.min(axis=1)
    hit = (tnear <= tfar) & (tfar > tmin)
    t = np.where(tnear > tmin, tnear, tfar)
    t = np.where(hit, t, np.inf)
    return t, np.zeros(len(t), dtype=np.int8)


def cube_normal(p, part):
    a = np.abs(p)
    k = a.argmax(axis=1)
    n = np.zeros_like(p)
    rows = np.arange(len(p))
    n[rows, k] = np.sign(p[rows, k])
    return n


def _caps(o, d, z, tmin, radius2):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (z - o[:, 2]) / d[:, 2]
    x = o[:, 0] + t * d[:, 0]
    y = o[:, 1] + t * d[:, 1]
    ok = (t > tmin) & (x * x + y * y <= radius2)
    return np.where(ok, t, np.inf)


def cylinder(o, d, tmin):
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - 1.0
    lo, hi = _quadratic(a, b, c)
    best = np.full(len(o), np.inf)
    part = np.zeros(len(o), dtype=np.int8)
    for root in (lo, hi):
        z = o[:, 2] + root * d[:, 2]
        ok = (root > tmin) & (np.abs(z) <= 1.0) & (root < best)
        best = np.where(ok, root, best)
    for zc in (-1.0, 1.0):
        tc = _caps(o, d, zc, tmin, 1.0)
        ok = tc < best
        best = np.where(ok, tc, best)
        part = np.where(ok, 1, part).astype(np.int8)
    return best, part


def cylinder_normal(p, part):
    n = np.column_stack([p[:, 0], p[:, 1], np.zeros(len(p))])
    cap = part == 1
    n[cap] = 0.0
    n[cap, 2] = np.sign(p[cap, 2])
    return n


def cone(o, d, tmin):
    # side: x^2 + y^2 = ((1 - z) / 2)^2 with apex at z = 1, radius 1 at z = -1
    A = 0.5 * (1.0 - o[:, 2])
    B = -0.5 * d[:, 2]
    a = d[:, 0] ** 2 + d[:, 1] ** 2 - B * B
    b = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1] - A * B
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - A * A
    lin = np.abs(a) < 1e-14
    lo, hi = _quadratic(np.where(lin, 1.0, a), b, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        tl = np.where(b != 0, -c / (2.0 * b), np.nan)
    lo = np.where(lin, tl, lo)
    hi = np.where(lin, np.nan, hi)
    best = np.full(len(o), np.inf)
    part = np.zeros(len(o), dtype=np.int8)
    for root in (lo, hi):
        z = o[:, 2] + root * d[:, 2]
        ok = (root > tmin) & (z >= -1.0) & (z <= 1.0) & (root < best)
        best = np.where(ok, root, best)
    tc = _caps(o, d, -1.0, tmin, 1.0)
    ok = tc < best
    best = np.where(ok, tc, best)
    part = np.where(ok, 1, part).astype(np.int8)
    return best, part


def cone_normal(p, part):
    n = np.column_stack([p[:, 0], p[:, 1], 0.5 * (1.0 - p[:, 2])])
    cap = part == 1
    n[cap] = [0.0, 0.0, -1.0]
    return n


def torus(o, d, tmin):
    """Nearest root of the torus quartic via batched companion-matrix eigenvalues."""
    n = len(o)
    R, r = TORUS_MAJOR, TORUS_MINOR
    out = np.full(n, np.inf)
    if n == 0:
        return out, np.zeros(0, dtype=np.int8)
    dn = np.linalg.norm(d, axis=1)
    u = d / dn[:, None]
    # shift the origin to the closest approach of the bounding sphere for conditioning
    tc = -_dot(o, u)
    oc = o + tc[:, None] * u
    cand = _dot(oc, oc) <= (R + r) ** 2
    idx = np.flatnonzero(cand)
    if len(idx) == 0:
        return out, np.zeros(n, dtype=np.int8)
    O = oc[idx]
    U = u[idx]
    od = _dot(O, U)
    k = _dot(O, O) + R * R - r * r
    c4 = np.ones(len(idx))
    c3 = 4.0 * od
    c2 = 4.0 * od * od + 2.0 * k - 4.0 * R * R * (U[:, 0] ** 2 + U[:, 1] ** 2)
    c1 = 4.0 * od * k - 8.0 * R * R * (O[:, 0] * U[:, 0] + O[:, 1] * U[:, 1])
    c0 = k * k - 4.0 * R * R * (O[:, 0] ** 2 + O[:, 1] ** 2)
    comp = np.zeros((len(idx), 4, 4))
    comp[:, 0, :] = -np.column_stack([c3, c2, c1, c0]) / c4[:, None]
    comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
    roots = np.linalg.eigvals(comp)
    re = roots.real.copy()
    real = np.abs(roots.imag) <= 1e-5 * (1.0 + np.abs(re))
    # Newton polish on the quartic
    for _ in range(3):
        f = (((re + c3[:, None]) * re + c2[:, None]) * re + c1[:, None]) * re + c0[:, None]
        df = ((4.0 * re + 3.0 * c3[:, None]) * re + 2.0 * c2[:, None]) * re + c1[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df != 0, f / df, 0.0)
        re = re - np.where(np.isfinite(step), step, 0.0)
    # back to the caller's parameterisation: t_local = (s + tc) / |d|
    t = (re + tc[idx, None]) / dn[idx, None]
    t = np.where(real & (t > tmin), t, np.inf)
    out[idx] = t.min(axis=1)
    return out, np.zeros(n, dtype=np.int8)


def torus_normal(p, part):
    R, r = TORUS_MAJOR, TORUS_MINOR
    s = _dot(p, p) + R * R - r * r
    n = 4.0 * s[:, None] * p
    n[:, 0] -= 8.0 * R * R * p[:, 0]
    n[:, 1] -= 8.0 * R * R * p[:, 1]
    return n


INTERSECT = {"Sphere": sphere, "Cube": cube, "Cylinder": cylinder, "Cone": cone, "Torus": torus}
NORMAL = {
    "Sphere": sphere_normal,
    "Cube": cube_normal,
    "Cylinder": cylinder_normal,
    "Cone": cone_normal,
    "Torus": torus_normal,
}
