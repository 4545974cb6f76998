"""Absolute pose estimation from 2D-3D correspondences.

The entry points are :func:`localize_pnp_ransac` (one camera) and
:func:`localize_rig_pnp` (all cameras of a rig jointly).  Both run the same
hypothesize-and-verify loop: minimal P3P solutions are sampled from one
camera at a time, scored by inlier count over every available
correspondence, and the best consensus set is polished with a damped
Gauss-Newton refinement of the full 6-DoF body pose.

All poses returned here are body poses (world-from-body); the camera
extrinsic is folded in internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .geometry import CameraModel, Pose, Rig

__all__ = [
    "Correspondence",
    "RansacConfig",
    "LocalizationResult",
    "solve_p3p",
    "refine_pose",
    "localize_pnp_ransac",
    "localize_rig_pnp",
    "reprojection_errors",
    "localization_call_count",
    "reset_localization_call_count",
]

_SEED_MASK = (1 << 64) - 1

# Audit counter: every localization attempt (single-camera or rig) bumps it.
_CALL_COUNT = 0


def localization_call_count() -> int:
    return _CALL_COUNT


def reset_localization_call_count() -> None:
    global _CALL_COUNT
    _CALL_COUNT = 0


@dataclass(frozen=True)
class Correspondence:
    """One 2D-3D match: pixel observation of a mapped landmark."""

    pixel: np.ndarray
    world_point: np.ndarray
    landmark_id: int

    def __post_init__(self):
        px = np.asarray(self.pixel, dtype=np.float64)
        pt = np.asarray(self.world_point, dtype=np.float64)
        if px.shape != (2,) or not np.all(np.isfinite(px)):
            raise ValueError("pixel must be a finite 2-vector")
        if pt.shape != (3,) or not np.all(np.isfinite(pt)):
            raise ValueError("world_point must be a finite 3-vector")
        px.setflags(write=False)
        pt.setflags(write=False)
        object.__setattr__(self, "pixel", px)
        object.__setattr__(self, "world_point", pt)


@dataclass(frozen=True)
class RansacConfig:
    inlier_threshold_px: float = 2.0
    max_iterations: int = 1000
    confidence: float = 0.99
    min_inliers: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        if self.inlier_threshold_px <= 0.0:
            raise ValueError("inlier_threshold_px must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not (0.0 < self.confidence < 1.0):
            raise ValueError("confidence must lie strictly between 0 and 1")
        if self.min_inliers < 4:
            raise ValueError("min_inliers must be at least 4")


@dataclass(frozen=True)
class LocalizationResult:
    success: bool
    pose: Pose | None
    inlier_count: int
    inlier_ratio: float
    num_matched_points: int

    def __post_init__(self):
        if self.success and self.pose is None:
            raise ValueError("successful result must carry a pose")
        if not 0 <= self.inlier_count <= self.num_matched_points:
            raise ValueError("inlier_count must lie in [0, num_matched_points]")
        expected = self.inlier_count / max(self.num_matched_points, 1)
        if self.inlier_ratio != expected:
            raise ValueError("inlier_ratio must equal inlier_count / max(n, 1)")


def _failed(inlier_count: int, num_matched: int) -> LocalizationResult:
    return LocalizationResult(False, None, inlier_count,
                              inlier_count / max(num_matched, 1), num_matched)


def _observation_arrays(corrs) -> tuple[np.ndarray, np.ndarray]:
    """Accepts a Correspondence sequence or any object with pixels/points arrays."""
    if hasattr(corrs, "pixels") and hasattr(corrs, "points"):
        px = np.asarray(corrs.pixels, dtype=np.float64).reshape(-1, 2)
        pt = np.asarray(corrs.points, dtype=np.float64).reshape(-1, 3)
    else:
        items = list(corrs)
        if not items:
            return np.empty((0, 2)), np.empty((0, 3))
        px = np.array([c.pixel for c in items], dtype=np.float64)
        pt = np.array([c.world_point for c in items], dtype=np.float64)
    if len(px) != len(pt):
        raise ValueError("pixel and point counts differ")
    return px, pt


# ---------------------------------------------------------------------------
# reprojection


def _reproj_sq(R_wb: np.ndarray, t_wb: np.ndarray, cam: CameraModel,
               pixels: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Squared pixel reprojection errors; inf for points behind the camera."""
    ext = cam.extrinsic
    wfc_R = R_wb @ ext.rotation
    wfc_t = R_wb @ ext.translation + t_wb
    local = (points - wfc_t) @ wfc_R
    z = local[:, 2]
    front = z > 0.0
    zs = np.where(front, z, 1.0)
    du = cam.fx * local[:, 0] / zs + (cam.cx - pixels[:, 0])
    dv = cam.fy * local[:, 1] / zs + (cam.cy - pixels[:, 1])
    return np.where(front, du * du + dv * dv, np.inf)


def reprojection_errors(pose: Pose, corrs, cam: CameraModel) -> np.ndarray:
    """Per-correspondence pixel distances under a body pose (inf if behind)."""
    pixels, points = _observation_arrays(corrs)
    return np.sqrt(_reproj_sq(pose.rotation, pose.translation, cam, pixels, points))


# ---------------------------------------------------------------------------
# quartic solver

def _solve_quartic(c4: float, c3: float, c2: float, c1: float, c0: float) -> list[float]:
    """Real roots of a quartic, Ferrari's method plus Newton polish.

    Tuned for the well-scaled quartics produced by the P3P elimination
    (coefficients O(1), roots O(1)); not a general-purpose root finder.
    """
    if abs(c4) < 1e-300:
        return []
    a = c3 / c4
    b = c2 / c4
    c = c1 / c4
    d = c0 / c4
    a4 = 0.25 * a
    # depressed quartic y^4 + p y^2 + q y + r with x = y - a/4
    p = b - 6.0 * a4 * a4
    q = c - 2.0 * b * a4 + 8.0 * a4 ** 3
    r = d - c * a4 + b * a4 * a4 - 3.0 * a4 ** 4
    ys: list[float] = []
    if abs(q) < 1e-13 * (1.0 + abs(p) + abs(r)):
        disc = p * p - 4.0 * r
        if disc >= 0.0:
            sq = math.sqrt(disc)
            for z in (0.5 * (-p + sq), 0.5 * (-p - sq)):
                if z >= 0.0:
                    sz = math.sqrt(z)
                    ys.extend((sz, -sz))
    else:
        # resolvent cubic m^3 + p m^2 + (p^2/4 - r) m - q^2/8, largest root
        b2_ = p
        b1_ = 0.25 * p * p - r
        b0_ = -0.125 * q * q
        aa = b1_ - b2_ * b2_ / 3.0
        bb = 2.0 * b2_ ** 3 / 27.0 - b2_ * b1_ / 3.0 + b0_
        disc = 0.25 * bb * bb + aa ** 3 / 27.0
        if disc >= 0.0:
            sq = math.sqrt(disc)
            u_ = -0.5 * bb + sq
            v_ = -0.5 * bb - sq
            m = (math.copysign(abs(u_) ** (1.0 / 3.0), u_)
                 + math.copysign(abs(v_) ** (1.0 / 3.0), v_))
        else:
            rho = math.sqrt(-aa ** 3 / 27.0)
            theta = math.acos(max(-1.0, min(1.0, -0.5 * bb / rho)))
            m = 2.0 * math.sqrt(-aa / 3.0) * math.cos(theta / 3.0)
        m -= b2_ / 3.0
        if m <= 0.0:
            return []
        s2m = math.sqrt(2.0 * m)
        for sign in (1.0, -1.0):
            lin = sign * s2m
            const = 0.5 * p + m - 0.5 * sign * q / s2m
            disc2 = lin * lin - 4.0 * const
            if disc2 >= 0.0:
                sq2 = math.sqrt(disc2)
                ys.append(0.5 * (-lin + sq2))
                ys.append(0.5 * (-lin - sq2))
    out = []
    for y in ys:
        x = y - a4
        for _ in range(2):  # Newton polish on the original quartic
            f = (((c4 * x + c3) * x + c2) * x + c1) * x + c0
            fp = ((4.0 * c4 * x + 3.0 * c3) * x + 2.0 * c2) * x + c1
            if fp != 0.0:
                x -= f / fp
        out.append(x)
    return out


# ---------------------------------------------------------------------------
# minimal solver

# Accept a candidate only if all three points reproject this close (pixels).
P3P_REPROJECTION_TOL_PX = 1e-6


def _triad(p0, p1, p2) -> np.ndarray:
    """Right-handed orthonormal basis spanned by a point triangle (columns)."""
    e1 = p1 - p0
    e1 = e1 / math.sqrt(e1 @ e1)
    v = p2 - p0
    e3 = np.array([e1[1] * v[2] - e1[2] * v[1],
                   e1[2] * v[0] - e1[0] * v[2],
                   e1[0] * v[1] - e1[1] * v[0]])
    e3 = e3 / math.sqrt(e3 @ e3)
    e2 = np.array([e3[1] * e1[2] - e3[2] * e1[1],
                   e3[2] * e1[0] - e3[0] * e1[2],
                   e3[0] * e1[1] - e3[1] * e1[0]])
    out = np.empty((3, 3))
    out[:, 0] = e1
    out[:, 1] = e2
    out[:, 2] = e3
    return out


def _solve_p3p_raw(pixels: np.ndarray, points: np.ndarray,
                   cam: CameraModel) -> list[tuple[np.ndarray, np.ndarray]]:
    """Body-pose candidates (R_wb, t_wb) for exactly three correspondences.

    Classic three-distance formulation: with s_i the unknown camera-frame
    distances and u = s2/s1, v = s3/s1, the two cosine-law ratio equations
    are quadratics in u whose resultant in u is a quartic in v.  Side
    lengths are normalized so the quartic is well scaled for the
    closed-form solver; a companion-matrix fallback covers the rare
    configuration where the closed form finds no usable root.
    """
    a2 = float(np.sum((points[1] - points[2]) ** 2))
    b2 = float(np.sum((points[0] - points[2]) ** 2))
    c2 = float(np.sum((points[0] - points[1]) ** 2))
    scale2 = max(a2, b2, c2)
    if scale2 <= 0.0 or min(a2, b2, c2) < 1e-16 * max(1.0, scale2):
        raise DegenerateInputError("duplicated world points")
    v1 = points[1] - points[0]
    v2 = points[2] - points[0]
    cr = np.array([v1[1] * v2[2] - v1[2] * v2[1],
                   v1[2] * v2[0] - v1[0] * v2[2],
                   v1[0] * v2[1] - v1[1] * v2[0]])
    if (cr @ cr) <= 1e-18 * (v1 @ v1) * (v2 @ v2):
        raise DegenerateInputError("collinear world points")

    scale = math.sqrt(scale2)
    a2, b2, c2 = a2 / scale2, b2 / scale2, c2 / scale2

    # unit bearing vectors through the pixels
    f = np.column_stack([(pixels[:, 0] - cam.cx) / cam.fx,
                         (pixels[:, 1] - cam.cy) / cam.fy,
                         np.ones(3)])
    f /= np.sqrt(np.sum(f * f, axis=1))[:, None]
    ca = float(f[1] @ f[2])
    cb = float(f[0] @ f[2])
    cg = float(f[0] @ f[1])
    if max(abs(ca), abs(cb), abs(cg)) > 1.0 - 1e-12:
        raise DegenerateInputError("coincident bearing directions")

    # Quadratics in u with polynomial-in-v coefficients (lowest degree first):
    #   p(u) = b2 u^2 + P11 v u + (P00 + P01 v + P02 v^2)
    #   q(u) = b2 u^2 + Q10 u   + (Q00 + Q01 v + Q02 v^2)
    P11 = -2.0 * b2 * ca
    P00, P01, P02 = -a2, 2.0 * a2 * cb, b2 - a2
    Q10 = -2.0 * b2 * cg
    Q00, Q01, Q02 = b2 - c2, 2.0 * c2 * cb, -c2
    # resultant of the two quadratics (shared leading coefficient b2),
    # Res = A^2 - B C with A = b2 (q0 - p0), B = b2 (q1 - p1), C = p1 q0 - p0 q1
    A0, A1, A2 = b2 * (Q00 - P00), b2 * (Q01 - P01), b2 * (Q02 - P02)
    B0, B1 = b2 * Q10, -b2 * P11
    C0 = -P00 * Q10
    C1 = P11 * Q00 - P01 * Q10
    C2 = P11 * Q01 - P02 * Q10
    C3 = P11 * Q02
    r0 = A0 * A0 - B0 * C0
    r1 = 2.0 * A0 * A1 - B0 * C1 - B1 * C0
    r2 = A1 * A1 + 2.0 * A0 * A2 - B0 * C2 - B1 * C1
    r3 = 2.0 * A1 * A2 - B0 * C3 - B1 * C2
    r4 = A2 * A2 - B1 * C3

    roots = _solve_quartic(r4, r3, r2, r1, r0)
    candidates = _p3p_from_roots(roots, points, f, scale,
                                 a2, b2, c2, ca, cb, cg, cam)
    if not candidates:
        # companion-matrix fallback for numerically awkward quartics
        coeffs = np.array([r4, r3, r2, r1, r0])
        top = np.abs(coeffs).max()
        if top > 0.0:
            nz = np.flatnonzero(np.abs(coeffs) > 1e-13 * top)
            trimmed = coeffs[nz[0]:]
            if len(trimmed) >= 2:
                alt = [float(z.real) for z in np.roots(trimmed)
                       if abs(z.imag) < 1e-6 * max(1.0, abs(z.real))]
                candidates = _p3p_from_roots(alt, points, f, scale,
                                             a2, b2, c2, ca, cb, cg, cam)
    return candidates


def _p3p_from_roots(roots, points, f, scale, a2, b2, c2, ca, cb, cg,
                    cam: CameraModel) -> list[tuple[np.ndarray, np.ndarray]]:
    ext_R = cam.extrinsic.rotation
    ext_t = cam.extrinsic.translation
    world_basis = _triad(points[0], points[1], points[2])
    candidates: list[tuple[np.ndarray, np.ndarray]] = []
    for v in roots:
        if not (v > 0.0) or not math.isfinite(v):
            continue
        den = 1.0 + v * v - 2.0 * v * cb
        if den <= 1e-14:
            continue
        s1 = math.sqrt(b2 / den) * scale
        disc = cg * cg - (b2 - c2 * den) / b2
        if disc < -1e-10:
            continue
        sq = math.sqrt(max(disc, 0.0))
        for u in (cg + sq, cg - sq):
            if u <= 0.0:
                continue
            # consistency with the first ratio equation (sides normalized)
            resid = b2 * (u * u - 2.0 * ca * u * v + v * v) - a2 * den
            if abs(resid) > 1e-4:
                continue
            y0 = s1 * f[0]
            y1 = (u * s1) * f[1]
            y2 = (v * s1) * f[2]
            # camera-from-world from the two congruent triangles
            R_cw = _triad(y0, y1, y2) @ world_basis.T
            anchor = (y0 + y1 + y2 - R_cw @ (points[0] + points[1] + points[2])) / 3.0
            R_wc = R_cw.T
            t_wc = -R_wc @ anchor
            R_wb = R_wc @ ext_R.T
            t_wb = t_wc - R_wb @ ext_t
            if any(abs(R_wb - Ra).max() < 1e-9 and abs(t_wb - ta).max() < 1e-9
                   for Ra, ta in candidates):
                continue
            candidates.append((R_wb, t_wb))
    return candidates


def solve_p3p(corrs, cam: CameraModel) -> list[Pose]:
    """Body poses consistent with exactly three correspondences (0 to 4).

    Every returned pose reprojects all three points within
    ``P3P_REPROJECTION_TOL_PX``; near-miss algebraic candidates are polished
    with a few Gauss-Newton steps before that gate.
    """
    pixels, points = _observation_arrays(corrs)
    if len(pixels) != 3:
        raise ValueError(f"P3P needs exactly 3 correspondences, got {len(pixels)}")
    if (np.sum((pixels[0] - pixels[1]) ** 2) < 1e-18
            or np.sum((pixels[0] - pixels[2]) ** 2) < 1e-18
            or np.sum((pixels[1] - pixels[2]) ** 2) < 1e-18):
        raise DegenerateInputError("duplicated pixels")

    tol_sq = P3P_REPROJECTION_TOL_PX ** 2
    accepted: list[tuple[np.ndarray, np.ndarray]] = []
    for R, t in _solve_p3p_raw(pixels, points, cam):
        worst = np.max(_reproj_sq(R, t, cam, pixels, points))
        if worst > tol_sq * 0.01:
            R, t = _gauss_newton_raw(R, t, [(cam, pixels, points)],
                                     max_iterations=10, min_points=3)
            worst = np.max(_reproj_sq(R, t, cam, pixels, points))
        if worst > tol_sq:
            continue
        if any(np.abs(R - Ra).max() < 1e-9 and np.abs(t - ta).max() < 1e-9
               for Ra, ta in accepted):
            continue
        accepted.append((R, t))
    return [Pose(R, t) for R, t in accepted]


# ---------------------------------------------------------------------------
# nonlinear refinement

_STEP_NORM_TOL = 1e-10
_MAX_REFINE_ITERATIONS = 50


def _group_cost(R, t, groups) -> float:
    cost = 0.0
    for cam, pixels, points in groups:
        sq = _reproj_sq(R, t, cam, pixels, points)
        s = float(np.sum(sq))
        if not math.isfinite(s):
            return math.inf
        cost += s
    return cost


def _rodrigues(w: np.ndarray) -> np.ndarray:
    """Rotation matrix for a rotation vector (series branch near zero)."""
    wx, wy, wz = w
    th2 = wx * wx + wy * wy + wz * wz
    if th2 < 1e-16:
        A = 1.0 - th2 / 6.0
        B = 0.5 - th2 / 24.0
    else:
        th = math.sqrt(th2)
        A = math.sin(th) / th
        B = (1.0 - math.cos(th)) / th2
    return np.array([
        [1.0 - B * (wy * wy + wz * wz), B * wx * wy - A * wz, B * wx * wz + A * wy],
        [B * wx * wy + A * wz, 1.0 - B * (wx * wx + wz * wz), B * wy * wz - A * wx],
        [B * wx * wz - A * wy, B * wy * wz + A * wx, 1.0 - B * (wx * wx + wy * wy)],
    ])


def _gauss_newton_raw(R, t, groups, max_iterations=_MAX_REFINE_ITERATIONS,
                      min_points=4):
    """Damped Gauss-Newton on the body pose over (camera, pixels, points) groups.

    The pose update is a right-multiplied increment R <- R exp(w^), so the
    Jacobian is taken w.r.t. a body-frame twist.  Steps are halved until the
    total squared reprojection error does not increase, which keeps the
    descent guarantee; a singular normal system ends the iteration with the
    current (initial on the first pass) pose.
    """
    n_points = sum(len(g[1]) for g in groups)
    if n_points < min_points:
        raise ValueError(f"refinement needs at least {min_points} points, got {n_points}")

    cost = _group_cost(R, t, groups)
    if not math.isfinite(cost):
        return R, t  # a point starts behind a camera; nothing safe to do

    J = np.empty((2 * n_points, 6))
    res = np.empty(2 * n_points)
    for _ in range(max_iterations):
        row = 0
        behind = False
        for cam, pixels, points in groups:
            ext = cam.extrinsic
            X_b = (points - t) @ R  # body-frame points
            local = (X_b - ext.translation) @ ext.rotation  # camera frame
            z = local[:, 2]
            if np.any(z <= 0.0):
                behind = True
                break
            n = len(points)
            fx_z = cam.fx / z
            fy_z = cam.fy / z
            res[row:row + n] = fx_z * local[:, 0] + (cam.cx - pixels[:, 0])
            res[row + n:row + 2 * n] = fy_z * local[:, 1] + (cam.cy - pixels[:, 1])

            # d(pixel)/d(X_b) rows, then J_w = row x X_b, J_t = -row
            Ru = ext.rotation[:, 0]  # camera x-axis in body coords
            Rv = ext.rotation[:, 1]
            Rw = ext.rotation[:, 2]
            xz = local[:, 0] / z
            yz = local[:, 1] / z
            Bu = fx_z[:, None] * (Ru - xz[:, None] * Rw)
            Bv = fy_z[:, None] * (Rv - yz[:, None] * Rw)

            Ju = J[row:row + n]
            Jv = J[row + n:row + 2 * n]
            X0, X1, X2 = X_b[:, 0], X_b[:, 1], X_b[:, 2]
            Ju[:, 0] = Bu[:, 1] * X2 - Bu[:, 2] * X1
            Ju[:, 1] = Bu[:, 2] * X0 - Bu[:, 0] * X2
            Ju[:, 2] = Bu[:, 0] * X1 - Bu[:, 1] * X0
            Jv[:, 0] = Bv[:, 1] * X2 - Bv[:, 2] * X1
            Jv[:, 1] = Bv[:, 2] * X0 - Bv[:, 0] * X2
            Jv[:, 2] = Bv[:, 0] * X1 - Bv[:, 1] * X0
            Ju[:, 3:] = -Bu
            Jv[:, 3:] = -Bv
            row += 2 * n
        if behind:
            return R, t
        try:
            step = np.linalg.solve(J.T @ J, -(J.T @ res))
        except np.linalg.LinAlgError:
            return R, t

        accepted = False
        for _ in range(12):
            R_new = R @ _rodrigues(step[:3])
            t_new = R @ step[3:] + t
            new_cost = _group_cost(R_new, t_new, groups)
            if new_cost <= cost:
                accepted = True
                break
            step = step * 0.5
        if not accepted:
            return R, t
        improvement = cost - new_cost
        R, t = R_new, t_new
        cost = new_cost
        if step @ step < _STEP_NORM_TOL * _STEP_NORM_TOL:
            break
        if improvement <= 1e-12 * cost:
            break
    return R, t


def refine_pose(initial: Pose, inliers, cam: CameraModel) -> Pose:
    """Minimize total squared reprojection error starting from ``initial``.

    The returned pose never has a higher reprojection cost than the initial
    one.  Needs at least 4 correspondences for a well-posed 6-DoF problem.
    """
    pixels, points = _observation_arrays(inliers)
    R, t = _gauss_newton_raw(initial.rotation, initial.translation,
                             [(cam, pixels, points)], min_points=4)
    return Pose(R, t)


# ---------------------------------------------------------------------------
# RANSAC

def _iterations_needed(confidence: float, w: float, cap: int) -> int:
    """Adaptive trial bound: enough samples to hit one all-inlier triple."""
    if w <= 0.0:
        return cap
    w3 = w * w * w
    if w3 >= 1.0:
        return 0
    denom = math.log1p(-w3)
    needed = math.log(1.0 - confidence) / denom
    return min(cap, int(math.ceil(needed)))


def _ransac(groups, cfg: RansacConfig) -> LocalizationResult:
    """Shared hypothesize-and-verify core over (camera, pixels, points) groups."""
    num_matched = int(sum(len(g[1]) for g in groups))
    viable = [gi for gi, g in enumerate(groups) if len(g[1]) >= 3]
    if not viable or num_matched < cfg.min_inliers:
        return _failed(0, num_matched)

    root = np.random.SeedSequence(cfg.rng_seed & _SEED_MASK)
    camera_stream, sample_stream = root.spawn(2)
    sample_rng = np.random.default_rng(sample_stream)
    if len(viable) > 1:
        camera_rng = np.random.default_rng(camera_stream)
        weights = np.array([len(groups[gi][1]) for gi in viable], dtype=np.float64)
        weights /= weights.sum()

    thr_sq = cfg.inlier_threshold_px ** 2
    best_count = 0
    best_pose: tuple[np.ndarray, np.ndarray] | None = None
    best_masks: list[np.ndarray] | None = None
    bound = cfg.max_iterations
    i = 0
    while i < bound:
        i += 1
        if len(viable) > 1:
            gi = viable[int(camera_rng.choice(len(viable), p=weights))]
        else:
            gi = viable[0]
        cam, pixels, points = groups[gi]
        idx = sample_rng.choice(len(pixels), size=3, replace=False)
        try:
            hypotheses = _solve_p3p_raw(pixels[idx], points[idx], cam)
        except DegenerateInputError:
            continue
        for R, t in hypotheses:
            masks = []
            count = 0
            for gcam, gpx, gpt in groups:
                m = _reproj_sq(R, t, gcam, gpx, gpt) <= thr_sq
                masks.append(m)
                count += int(m.sum())
            if count > best_count:
                best_count = count
                best_pose = (R, t)
                best_masks = masks
                bound = min(bound, _iterations_needed(
                    cfg.confidence, count / num_matched, cfg.max_iterations))

    if best_pose is None or best_count < cfg.min_inliers:
        return _failed(best_count, num_matched)

    inlier_groups = [(cam, px[m], pt[m])
                     for (cam, px, pt), m in zip(groups, best_masks) if m.any()]
    R, t = _gauss_newton_raw(best_pose[0], best_pose[1], inlier_groups)
    final_count = 0
    for gcam, gpx, gpt in groups:
        final_count += int(np.sum(_reproj_sq(R, t, gcam, gpx, gpt) <= thr_sq))
    return LocalizationResult(True, Pose(R, t), final_count,
                              final_count / max(num_matched, 1), num_matched)


def localize_pnp_ransac(corrs, cam: CameraModel,
                        cfg: RansacConfig) -> LocalizationResult:
    """Localize the body from one camera's correspondences.

    Deterministic for a fixed (corrs, cfg): the sampling streams derive only
    from ``cfg.rng_seed``.  Fewer than ``min_inliers`` consensus points, or
    fewer than 3 correspondences, yield a Failed result rather than an error.
    """
    global _CALL_COUNT
    _CALL_COUNT += 1
    pixels, points = _observation_arrays(corrs)
    return _ransac([(cam, pixels, points)], cfg)


def localize_rig_pnp(corrs_per_camera, rig: Rig,
                     cfg: RansacConfig) -> LocalizationResult:
    """Localize the body jointly from every camera of the rig.

    Each iteration draws the hypothesis camera with probability proportional
    to its correspondence count (among cameras holding at least 3), solves
    P3P there, and scores inliers across all cameras.  The final refinement
    is joint over every camera's inliers.  With a single populated camera
    this reduces to :func:`localize_pnp_ransac` bit for bit: the triple
    sampling stream is drawn from the same child seed in both.
    """
    global _CALL_COUNT
    _CALL_COUNT += 1
    if len(corrs_per_camera) != len(rig):
        raise ValueError("need one correspondence list per rig camera")
    groups = []
    for cam, corrs in zip(rig, corrs_per_camera):
        pixels, points = _observation_arrays(corrs if corrs is not None else [])
        if len(pixels):
            groups.append((cam, pixels, points))
    if not groups:
        return _failed(0, 0)
    return _ransac(groups, cfg)
