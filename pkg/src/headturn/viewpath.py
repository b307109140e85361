"""Cyclic head-turn view path: index -> Euler angles -> look-at camera pose."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HALF_PI = math.pi / 2


@dataclass(frozen=True)
class ViewPath:
    """K views on a closed loop around the frontal direction.

    ``Y`` is the yaw amplitude and ``P`` the pitch amplitude, both in radians.
    ``center`` is the angle of the frontal view on both axes.
    """

    K: int = 360
    Y: float = HALF_PI
    P: float = math.pi / 12
    center: float = HALF_PI

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 2:
            raise ValueError(f"K must be an integer >= 2, got {self.K}")
        if not 0.0 <= self.Y <= HALF_PI:
            raise ValueError(f"Y must lie in [0, pi/2], got {self.Y}")
        if not 0.0 <= self.P <= HALF_PI:
            raise ValueError(f"P must lie in [0, pi/2], got {self.P}")

    def to_dict(self) -> dict:
        return {"K": self.K, "Y": self.Y, "P": self.P, "center": self.center}

    @classmethod
    def from_dict(cls, d: dict) -> "ViewPath":
        return cls(**{k: d[k] for k in ("K", "Y", "P", "center") if k in d})


@dataclass(frozen=True)
class EulerAngles:
    phi: float
    theta: float
    roll: float = 0.0


@dataclass(frozen=True)
class CameraPose:
    rotation: np.ndarray  # camera-to-world, columns = (right, up, back)
    position: np.ndarray

    @property
    def forward(self) -> np.ndarray:
        return -self.rotation[:, 2]


def wrap_index(k: int, K: int) -> int:
    """Reduce ``k`` onto the ring [0, K); correct for negative ``k``."""
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    return int(k) % int(K)


def _ring_sin_cos(idx, K: int):
    """sin and cos of 2*pi*idx/K, exact at quarter turns.

    The argument is reduced to a quadrant and an offset in [0, pi/2) so the
    frontal pair (idx = 0 and idx = K/2) yields a sine of exactly zero.
    """
    m = np.mod(np.asarray(idx, dtype=np.int64) * 4, 4 * K)
    q, rem = np.divmod(m, K)
    x = (np.pi / 2) * rem / K
    s, c = np.sin(x), np.cos(x)
    sin = np.select([q == 0, q == 1, q == 2], [s, c, -s], -c)
    cos = np.select([q == 0, q == 1, q == 2], [c, -s, -c], s)
    return sin, cos


def angles_for_index(path: ViewPath, i: int) -> EulerAngles:
    i = wrap_index(i, path.K)
    s, c = _ring_sin_cos(i, path.K)
    return EulerAngles(
        phi=path.center + path.Y * float(s),
        theta=path.center + path.P * float(c),
    )


def angle_arrays(path: ViewPath, indices=None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``angles_for_index``; returns (phi, theta) arrays."""
    idx = np.arange(path.K) if indices is None else np.mod(np.asarray(indices), path.K)
    s, c = _ring_sin_cos(idx, path.K)
    return path.center + path.Y * s, path.center + path.P * c


def _spherical_position(phi: float, theta: float, radius: float, center: float) -> np.ndarray:
    # Frontal (phi = theta = center) sits on +z; y is up; theta > center tilts the
    # camera below the horizon.
    az = phi - center + HALF_PI
    polar = theta - center + HALF_PI
    s = math.sin(polar)
    return radius * np.array([s * math.cos(az), math.cos(polar), s * math.sin(az)])


def look_at(position: np.ndarray, target=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Camera-to-world rotation with zero roll whose -z axis points at ``target``."""
    forward = np.asarray(target, dtype=float) - position
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=float))
    n = np.linalg.norm(right)
    if n < 1e-12:
        # looking straight along the up axis; any horizontal right vector is zero-roll
        right = np.array([1.0, 0.0, 0.0])
    else:
        right = right / n
    true_up = np.cross(right, forward)
    return np.column_stack([right, true_up, -forward])


def pose_for_angles(angles: EulerAngles, radius: float = 1.0, center: float = HALF_PI) -> CameraPose:
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    position = _spherical_position(angles.phi, angles.theta, radius, center)
    return CameraPose(rotation=look_at(position), position=position)


def pose_for_index(path: ViewPath, i: int, radius: float = 1.0) -> CameraPose:
    return pose_for_angles(angles_for_index(path, i), radius=radius, center=path.center)


def frontal_pose(radius: float = 1.0, center: float = HALF_PI) -> CameraPose:
    return pose_for_angles(EulerAngles(center, center), radius=radius, center=center)
