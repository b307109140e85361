"""Procedural stand-in for a 3D-aware face generator.

A seeded ellipsoid "head" is ray traced from any camera pose.  Everything that
defines the identity (shape, tone, texture, marker layout) lives in surface
coordinates, so renders of one identity are consistent across views.  Fake
identities carry a blending band around the face region plus a texture seam,
both fixed to the surface.  Large yaw offsets blur the render and add noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import prng
from .viewpath import CameraPose, ViewPath, pose_for_index

TAN_HALF_FOV = 0.34
BACKGROUND = 0.08
# Angular radius (from the frontal +z axis, on the unit sphere) of the swapped face region.
FACE_REGION = math.radians(52.0)
BAND_HALF_WIDTH = math.radians(7.0)
# ringing pattern inside the band: cycles per radian of polar angle / around the face
RING_POLAR_FREQ = 25.0
RING_AZIMUTH_FREQ = 14.0
RING_GAIN = 0.22
SEAM_TONE = 0.04
# std-dev of the fine grain a fake carries over its swapped region, per unit strength
FAKE_GRAIN = 0.03
N_WAVES = 7


@dataclass(frozen=True)
class IdentitySpec:
    seed: int
    is_fake: bool = False
    artifact_strength: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.artifact_strength <= 1.0:
            raise ValueError("artifact_strength must lie in [0, 1]")
        if self.is_fake and self.artifact_strength <= 0.0:
            raise ValueError("fake identities need artifact_strength > 0")
        if not self.is_fake and self.artifact_strength != 0.0:
            raise ValueError("real identities have artifact_strength 0")


@dataclass(frozen=True)
class RenderConfig:
    resolution: int = 64
    degradation_gain: float = 0.15
    light_direction: tuple = (0.3, 0.45, 0.84)
    color: bool = False

    def __post_init__(self):
        if self.resolution < 16:
            raise ValueError("resolution must be >= 16")
        if self.degradation_gain < 0:
            raise ValueError("degradation_gain must be >= 0")
        n = math.sqrt(sum(c * c for c in self.light_direction))
        object.__setattr__(self, "light_direction", tuple(float(c) / n for c in self.light_direction))


@dataclass
class _Identity:
    """Per-identity constants drawn from the counter hash."""

    axes: np.ndarray
    tone: float
    wave_k: np.ndarray  # (N_WAVES, 3)
    wave_phase: np.ndarray
    wave_amp: np.ndarray
    seam_phase: np.ndarray
    markers: list = field(default_factory=list)  # (center(3), radius, darkness)


def _draws(seed: int, tag: str, n: int) -> np.ndarray:
    return prng.uniform(seed, tag, np.arange(n))


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _identity_constants(seed: int) -> _Identity:
    u = _draws(seed, "shape", 4)
    axes = np.array([0.20, 0.26, 0.22]) * (1.0 + 0.08 * (u[:3] - 0.5))
    tone = 0.52 + 0.2 * u[3]

    d = _draws(seed, "waves", N_WAVES * 5).reshape(N_WAVES, 5)
    # random directions with frequency 3..11 cycles per unit length
    z = 2.0 * d[:, 0] - 1.0
    az = 2.0 * np.pi * d[:, 1]
    r = np.sqrt(1.0 - z * z)
    dirs = np.stack([r * np.cos(az), r * np.sin(az), z], axis=1)
    wave_k = dirs * (3.0 + 8.0 * d[:, 2:3])
    wave_phase = 2.0 * np.pi * d[:, 3]
    wave_amp = 0.025 + 0.035 * d[:, 4]
    seam_phase = 2.0 * np.pi * _draws(seed, "seam", N_WAVES)

    m = _draws(seed, "markers", 9) - 0.5
    # eyes of unequal size and a mouth off the midline break left-right symmetry,
    # so the yaw direction is readable from a single render
    markers = [
        (_unit([-0.36 + 0.06 * m[0], 0.26 + 0.05 * m[1], 0.9]), 0.15 + 0.03 * m[2], 0.65),
        (_unit([0.34 + 0.06 * m[3], 0.24 + 0.05 * m[4], 0.9]), 0.10 + 0.02 * m[5], 0.55),
        (_unit([0.10 + 0.06 * m[6], -0.40 + 0.05 * m[7], 0.85]), 0.13 + 0.03 * m[8], 0.45),
    ]
    return _Identity(axes, tone, wave_k, wave_phase, wave_amp, seam_phase, markers)


def yaw_offset(pose: CameraPose) -> float:
    """Angle between the camera position and the frontal direction, in the yaw plane."""
    x, _, z = pose.position
    return float(math.atan2(abs(x), z))


def degradation_level(yaw: float, cfg: RenderConfig) -> float:
    """Synthesis degradation for a render at ``yaw`` radians from frontal."""
    return cfg.degradation_gain * abs(yaw)


def noise_sigma(yaw: float, cfg: RenderConfig) -> float:
    """Std-dev of the additive noise injected at ``yaw``; linear in |yaw|."""
    return 0.25 * degradation_level(yaw, cfg)


def blur_weight(yaw: float, cfg: RenderConfig) -> float:
    return min(1.0, 2.0 * degradation_level(yaw, cfg))


def _rays(rotations: np.ndarray, res: int) -> np.ndarray:
    """World-space unit ray directions, shape (n, res, res, 3)."""
    c = (np.arange(res) + 0.5) / res * 2.0 - 1.0
    u, v = np.meshgrid(c * TAN_HALF_FOV, -c * TAN_HALF_FOV)
    d = np.stack([u, v, -np.ones_like(u)], axis=-1)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return np.einsum("hwj,nij->nhwi", d, rotations)


def _albedo(s: np.ndarray, ident: _Identity, spec: IdentitySpec) -> np.ndarray:
    """Surface reflectance at unit-sphere coordinates ``s`` (..., 3)."""
    phase = s @ ident.wave_k.T + ident.wave_phase
    marks = np.ones(s.shape[:-1])
    for center, radius, dark in ident.markers:
        ang = np.arccos(np.clip(s @ center, -1.0, 1.0))
        w = np.clip((radius - ang) / 0.03 + 0.5, 0.0, 1.0)  # soft-edged disc
        marks = marks * (1.0 - dark * w)
    base = ident.tone + np.sin(phase) @ ident.wave_amp
    if not spec.is_fake:
        return base * marks

    a = spec.artifact_strength
    polar = np.arccos(np.clip(s[..., 2], -1.0, 1.0))
    # swapped face: re-phased texture and a tone shift that meet the host at a seam
    swapped = ident.tone + SEAM_TONE + np.sin(phase + ident.seam_phase) @ ident.wave_amp
    alb = np.where(polar < FACE_REGION, (1.0 - a) * base + a * swapped, base)
    # blending band: high-frequency ringing across the boundary
    band = np.clip(1.0 - np.abs(polar - FACE_REGION) / BAND_HALF_WIDTH, 0.0, 1.0)
    azim = np.arctan2(s[..., 1], s[..., 0])
    ring = np.sin(RING_POLAR_FREQ * polar) * np.cos(RING_AZIMUTH_FREQ * azim)
    return (alb + a * band * (RING_GAIN * ring - 0.06)) * marks


def _box_blur(img: np.ndarray) -> np.ndarray:
    """3x3 mean filter over the last two axes, edge-replicated."""
    p = np.pad(img, [(0, 0)] * (img.ndim - 2) + [(1, 1), (1, 1)], mode="edge")
    h, w = img.shape[-2:]
    acc = np.zeros_like(img)
    for dy in range(3):
        for dx in range(3):
            acc += p[..., dy:dy + h, dx:dx + w]
    return acc / 9.0


def _intersect(poses: list[CameraPose], res: int, axes: np.ndarray):
    """Ray-ellipsoid hits.

    Returns the (n, res, res) hit mask plus unit-sphere coordinates and unit
    normals for the hit pixels only, each (n_hits, 3).
    """
    rot = np.stack([p.rotation for p in poses])
    o = np.stack([p.position for p in poses])[:, None, None, :]
    d = _rays(rot, res)
    inv = 1.0 / axes
    o2, d2 = o * inv, d * inv
    qa = np.einsum("...i,...i->...", d2, d2)
    qb = 2.0 * np.einsum("...i,...i->...", d2, o2)
    qc = np.einsum("...i,...i->...", o2, o2) - 1.0
    disc = qb * qb - 4.0 * qa * qc
    hit = disc > 0.0
    t = (-qb[hit] - np.sqrt(disc[hit])) / (2.0 * qa[hit])
    p = np.broadcast_to(o, d.shape)[hit] + t[:, None] * d[hit]
    s = p * inv
    s /= np.sqrt(np.einsum("ij,ij->i", s, s))[:, None]
    n = p * inv * inv
    n /= np.sqrt(np.einsum("ij,ij->i", n, n))[:, None]
    return hit, s, n


def render_many(spec: IdentitySpec, poses: list[CameraPose], cfg: RenderConfig | None = None) -> np.ndarray:
    """Render ``spec`` from each pose; stacked along a new leading axis."""
    cfg = cfg or RenderConfig()
    res = cfg.resolution
    ident = _identity_constants(spec.seed)
    hit, s, n = _intersect(poses, res, ident.axes)
    bg = BACKGROUND + 0.05 * np.linspace(1.0, 0.0, res)[:, None] * np.ones((1, res))
    img = np.broadcast_to(bg, hit.shape).copy()
    lambert = np.clip(n @ np.asarray(cfg.light_direction), 0.0, None)
    img[hit] = _albedo(s, ident, spec) * (0.35 + 0.65 * lambert)
    if spec.is_fake:
        # generator fingerprint: pixel-grid grain over the swapped region
        swapped = np.zeros(hit.shape, dtype=bool)
        swapped[hit] = np.arccos(np.clip(s[:, 2], -1.0, 1.0)) < FACE_REGION + BAND_HALF_WIDTH
        grain = prng.normal(spec.seed, "fake-grain", np.arange(res * res)).reshape(res, res)
        img = img + swapped * (FAKE_GRAIN * spec.artifact_strength) * grain

    yaws = np.array([yaw_offset(p) for p in poses])
    wb = np.array([blur_weight(y, cfg) for y in yaws])[:, None, None]
    sigma = np.array([noise_sigma(y, cfg) for y in yaws])[:, None, None]
    noise = prng.normal(spec.seed, "degrade", np.arange(res * res)).reshape(res, res)
    img = (1.0 - wb) * img + wb * _box_blur(img) + sigma * noise
    img = np.clip(img, 0.0, 1.0)
    if cfg.color:
        tint = np.array([1.0, 0.86, 0.74]) + 0.06 * (_draws(spec.seed, "tint", 3) - 0.5)
        img = np.clip(img[..., None] * tint, 0.0, 1.0)
    return img


def render(spec: IdentitySpec, pose: CameraPose, cfg: RenderConfig | None = None) -> np.ndarray:
    """Render ``spec`` from ``pose``.

    Returns an (H, W) float array in [0, 1], or (H, W, 3) when ``cfg.color``.
    Output is a pure function of the arguments.
    """
    return render_many(spec, [pose], cfg)[0]


def render_path(spec: IdentitySpec, path: ViewPath, cfg: RenderConfig | None = None,
                indices=None) -> np.ndarray:
    """Render every view of ``path`` (or just ``indices``)."""
    idx = range(path.K) if indices is None else indices
    return render_many(spec, [pose_for_index(path, i) for i in idx], cfg)


def band_mask(pose: CameraPose, cfg: RenderConfig | None = None, seed: int = 0) -> np.ndarray:
    """(H, W) mask of pixels seeing the swapped face region or its blending band."""
    cfg = cfg or RenderConfig()
    hit, s, _ = _intersect([pose], cfg.resolution, _identity_constants(seed).axes)
    mask = np.zeros(hit.shape[1:], dtype=bool)
    polar = np.arccos(np.clip(s[:, 2], -1.0, 1.0))
    mask[hit[0]] = polar < FACE_REGION + BAND_HALF_WIDTH
    return mask
