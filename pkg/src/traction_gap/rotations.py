"""3D rotation parameterizations, nearest-rotation projection, and the
quadratic-to-p-growth coercivity profile.

All matrix arguments are plain (3, 3) float64 numpy arrays.  Skew matrices
follow the row convention ``rows (0, a, b), (-a, 0, c), (-b, -c, 0)``; the
rotation generated by such a matrix has axis ``(-c, b, -a)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDENTITY = np.eye(3)

SKEW_TOL = 1e-12
NORMALIZATION_TOL = 1e-12
UNIT_AXIS_TOL = 1e-14


@dataclass(frozen=True)
class SkewParams:
    """The three free entries (a, b, c) of a skew-symmetric matrix."""

    a: float
    b: float
    c: float

    @property
    def matrix(self) -> np.ndarray:
        return skew_matrix(self.a, self.b, self.c)

    @property
    def rotation_axis(self) -> np.ndarray:
        """Axis omega such that W x = omega x x (unnormalized)."""
        return np.array([-self.c, self.b, -self.a])


@dataclass(frozen=True)
class AxisAngle:
    axis: tuple[float, float, float]
    theta: float

    def __post_init__(self):
        n = float(np.linalg.norm(self.axis))
        if abs(n - 1.0) > UNIT_AXIS_TOL:
            raise ValueError(f"axis must be unit length, |axis| = {n}")

    @property
    def matrix(self) -> np.ndarray:
        return exp_so3(self.theta * np.asarray(self.axis))


def skew_matrix(a: float, b: float, c: float) -> np.ndarray:
    return np.array([[0.0, a, b], [-a, 0.0, c], [-b, -c, 0.0]])


def skew_params(W: np.ndarray) -> SkewParams:
    if np.max(np.abs(W + W.T)) > SKEW_TOL:
        raise ValueError("matrix is not skew-symmetric")
    return SkewParams(a=float(W[0, 1]), b=float(W[0, 2]), c=float(W[1, 2]))


def skew_from_axis(omega: np.ndarray) -> np.ndarray:
    """Skew matrix W with W x = omega x x."""
    wx, wy, wz = omega
    return np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])


def rodrigues(W: np.ndarray, theta: float) -> np.ndarray:
    """Rotation from a skew generator normalized to |W|^2 = 2.

    Rejects non-skew or wrongly normalized input; use :func:`exp_so3` for
    the unnormalized exponential map in optimizer loops.
    """
    W = np.asarray(W, dtype=float)
    if np.max(np.abs(W + W.T)) > SKEW_TOL:
        raise ValueError("rodrigues requires a skew-symmetric generator")
    norm_sq = float(np.sum(W * W))
    if abs(norm_sq - 2.0) > NORMALIZATION_TOL:
        raise ValueError(f"rodrigues requires |W|^2 = 2, got {norm_sq}")
    return IDENTITY + np.sin(theta) * W + (1.0 - np.cos(theta)) * (W @ W)


def exp_so3(omega: np.ndarray) -> np.ndarray:
    """Exponential map so(3) -> SO(3) for an arbitrary axis-angle vector."""
    omega = np.asarray(omega, dtype=float)
    theta = float(np.linalg.norm(omega))
    if theta < 1e-12:
        W = skew_from_axis(omega)
        # second-order series; exact enough below the branch cut
        return IDENTITY + W + 0.5 * (W @ W)
    W = skew_from_axis(omega / theta)
    return IDENTITY + np.sin(theta) * W + (1.0 - np.cos(theta)) * (W @ W)


def rotation_about_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def nearest_rotation(F: np.ndarray) -> tuple[np.ndarray, float]:
    """Orthogonal Procrustes projection onto SO(3).

    Returns (R, dist) with R minimizing the Frobenius distance |F - R|.
    A negative-determinant branch is handled by flipping the sign of the
    smallest singular value in the reconstruction.
    """
    F = np.asarray(F, dtype=float)
    U, _, Vt = np.linalg.svd(F)
    D = np.eye(3)
    if np.linalg.det(U @ Vt) < 0.0:
        D[2, 2] = -1.0
    R = U @ D @ Vt
    return R, float(np.linalg.norm(F - R))


def coercivity_profile(t, p: float):
    """Lower-bound profile: t^2 up to t = 1, then (2/p) t^p - 2/p + 1.

    C^1 at the junction and strictly convex for p in (1, 2]; at p = 2 the
    two branches coincide.  Vectorized over t.
    """
    if not 1.0 < p <= 2.0:
        raise ValueError(f"p must lie in (1, 2], got {p}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("profile argument must be nonnegative")
    out = np.where(t <= 1.0, t * t, (2.0 / p) * t ** p - 2.0 / p + 1.0)
    return float(out) if out.ndim == 0 else out


def distance_to_axis_rotations(R: np.ndarray, axis: np.ndarray) -> float:
    """Frobenius distance from R to the one-parameter rotation group about axis."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    W = skew_from_axis(axis)
    # <R, R_t> = <R, I + W^2> + c1 sin t - c2 cos t, maximal at t = atan2(c1, -c2)
    c1 = float(np.sum(R * W))
    c2 = float(np.sum(R * (W @ W)))
    t = np.arctan2(c1, -c2)
    closest = IDENTITY + np.sin(t) * W + (1.0 - np.cos(t)) * (W @ W)
    return float(np.linalg.norm(R - closest))
