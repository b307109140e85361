import math

import numpy as np
import pytest

from headturn.renderer import (
    IdentitySpec, RenderConfig, band_mask, blur_weight, noise_sigma, render, render_many,
    render_path, yaw_offset,
)
from headturn.viewpath import EulerAngles, ViewPath, frontal_pose, pose_for_angles, pose_for_index

PATH = ViewPath()


def test_render_is_deterministic(cfg):
    spec = IdentitySpec(7, True, 0.6)
    pose = pose_for_index(PATH, 33)
    assert np.array_equal(render(spec, pose, cfg), render(spec, pose, cfg))


def test_batch_matches_single(cfg):
    spec = IdentitySpec(4, True, 0.8)
    poses = [pose_for_index(PATH, i) for i in (0, 50, 90, 300)]
    batch = render_many(spec, poses, cfg)
    for img, pose in zip(batch, poses):
        assert np.array_equal(img, render(spec, pose, cfg))


def test_range_and_shape(cfg):
    imgs = render_path(IdentitySpec(2, True, 1.0), PATH, cfg, indices=range(0, 360, 15))
    assert imgs.shape == (24, cfg.resolution, cfg.resolution)
    assert imgs.min() >= 0.0 and imgs.max() <= 1.0


def test_color_output(cfg):
    c = RenderConfig(color=True)
    img = render(IdentitySpec(1), frontal_pose(), c)
    assert img.shape == (64, 64, 3) and img.min() >= 0 and img.max() <= 1


def test_seeds_change_pixels(cfg):
    pose = pose_for_index(PATH, 45)
    for s in range(100):
        a = render(IdentitySpec(2 * s), pose, cfg)
        b = render(IdentitySpec(2 * s + 1), pose, cfg)
        assert np.mean(np.abs(a - b) >= 1 / 255) >= 0.01


def test_fake_differs_only_in_band_at_frontal(cfg):
    pose = frontal_pose()
    for seed in range(10):
        real = render(IdentitySpec(seed), pose, cfg)
        fake = render(IdentitySpec(seed, True, 0.5), pose, cfg)
        diff = np.abs(fake - real)
        mask = band_mask(pose, cfg, seed)
        assert diff.mean() > 0
        assert np.all(diff[~mask] == 0)


def test_fake_difference_concentrated_off_frontal(cfg):
    pose = pose_for_index(PATH, 40)
    real = render(IdentitySpec(5), pose, cfg)
    fake = render(IdentitySpec(5, True, 0.5), pose, cfg)
    diff = np.abs(fake - real)
    mask = band_mask(pose, cfg, 5)
    assert diff[mask].sum() / diff.sum() > 0.8


def test_zero_strength_reproduces_real(cfg):
    fake = IdentitySpec(11, True, 0.5)
    object.__setattr__(fake, "artifact_strength", 0.0)  # bypass the fake>0 invariant on purpose
    for i in (0, 70, 200):
        pose = pose_for_index(PATH, i)
        assert np.array_equal(render(fake, pose, cfg), render(IdentitySpec(11), pose, cfg))


@pytest.mark.parametrize("phi, want", [
    (math.pi / 2, 0.0), (math.pi, math.pi / 2), (math.pi / 4, math.pi / 4),
])
def test_yaw_offset_examples(phi, want):
    assert abs(yaw_offset(pose_for_angles(EulerAngles(phi, math.pi / 2))) - want) < 1e-12


def test_degradation_monotone_in_yaw(cfg):
    poses = [pose_for_index(PATH, i) for i in range(PATH.K)]
    yaws = np.array([yaw_offset(p) for p in poses])
    order = np.argsort(yaws, kind="stable")
    sig = np.array([noise_sigma(yaws[i], cfg) for i in order])
    blur = np.array([blur_weight(yaws[i], cfg) for i in order])
    assert np.all(np.diff(sig) >= 0) and np.all(np.diff(blur) >= 0)
    assert noise_sigma(0.0, cfg) == 0.0


def test_bad_configs():
    with pytest.raises(ValueError):
        RenderConfig(resolution=8)
    with pytest.raises(ValueError):
        IdentitySpec(1, True, 0.0)
    with pytest.raises(ValueError):
        IdentitySpec(1, False, 0.3)
