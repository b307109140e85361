"""
Walking the head-turn path
==========================

The view path is a closed loop of K camera poses around a synthetic head.
This script prints a few poses, renders the same fake identity from the
front and from the side, and shows how the quality tiers degrade it.
"""
import numpy as np

from headturn.harness import fake_identity
from headturn.imageproc import QualityTier, psnr, quality_transform, write_ppm
from headturn.renderer import RenderConfig, band_mask, render, yaw_offset
from headturn.viewpath import ViewPath, angles_for_index, pose_for_index

path = ViewPath()  # K=360, yaw amplitude pi/2, pitch amplitude pi/12

for i in (0, 45, 90, 180, 270):
    a = angles_for_index(path, i)
    pose = pose_for_index(path, i)
    print(f"i={i:3d}  phi={np.degrees(a.phi):6.1f}  theta={np.degrees(a.theta):6.1f}  "
          f"yaw offset={np.degrees(yaw_offset(pose)):5.1f}")

cfg = RenderConfig()
ident = fake_identity(7)
front = render(ident, pose_for_index(path, 0), cfg)
side = render(ident, pose_for_index(path, 90), cfg)

# the swapped face region plus its blending band, as seen from the front
mask = band_mask(pose_for_index(path, 0), cfg, ident.seed)
print("band covers", round(100 * mask.mean(), 1), "% of the frontal image")

for tier in QualityTier:
    img = quality_transform(front, tier)
    print(f"{tier.value:>3}: PSNR vs raw = {psnr(front, img):.2f} dB")

write_ppm("front.ppm", front)
write_ppm("side.ppm", side)
