"""
A detector that only saw faces from the front
==============================================

Train a logistic detector on frontal renders, then look at every view of a
fake identity it catches from the front.  Views away from the training pose,
tilted or turned with the blur and noise that come with them, can pass as
real.
"""
import numpy as np

from headturn.attack import AttackConfig, advheat_rand, select_transfer_view
from headturn.detector import ImageOracle, Label, QueryLedger, decide, extract_features
from headturn.harness import ViewBank, brute_force_adversarial_set, fake_identity, frontal_jitter_pose, train_tier_detector
from headturn.imageproc import DefenseSpec, QualityTier, apply_defense, quality_transform
from headturn.renderer import RenderConfig, render, render_path
from headturn.viewpath import ViewPath, angle_arrays

cfg = RenderConfig()
path = ViewPath()
det = {t: train_tier_detector(0, t, cfg) for t in QualityTier}
for t, d in det.items():
    print(f"{t.value:>3} detector: train accuracy {d.train_accuracy:.3f}")

phi, _ = angle_arrays(path)
yaw_deg = np.degrees(phi - path.center)

# the LQ detector is the easiest to fool; find an identity it catches
# from the front but misses on a turned view
weak = det[QualityTier.LQ]
for i in range(200):
    ident = fake_identity(1000 + i)
    frontal = quality_transform(render(ident, frontal_jitter_pose(ident.seed), cfg), QualityTier.LQ)
    if decide(weak, frontal, QueryLedger()) is Label.REAL:
        continue
    bank = ViewBank(ident, path, cfg)
    oracle = ImageOracle(weak, bank.features("lq"))
    adv = sorted(brute_force_adversarial_set(oracle, path))
    if adv and np.abs(yaw_deg[adv]).max() > 30:
        break
print(f"identity {ident.seed} (strength {ident.artifact_strength:.2f}): {len(adv)} adversarial views")

print("adversarial yaw offsets (deg):", np.round(yaw_deg[adv], 1)[:10])

res = advheat_rand(oracle, path, AttackConfig(T=360, seed=0))
print("rand attack:", res.success, res.adversarial_index, res.total_queries, "queries")

# does the chosen view survive input transforms?
if res.success:
    img = bank.image(res.adversarial_index, "lq")
    for spec in (DefenseSpec("jpeg", quality=75), DefenseSpec("resize_pad"), DefenseSpec("bit_depth", bits=4)):
        p = float(weak.prob_real(extract_features(apply_defense(img, spec))))
        print(f"  after {spec.name:>10}: P(real) = {p:.3f}")

# transfer: pick the view the LQ detector likes most, show it to the others
views = quality_transform(render_path(ident, path, cfg), QualityTier.LQ)
k, view = select_transfer_view(weak, views)
for t, d in det.items():
    p = float(d.prob_real(extract_features(quality_transform(view, t))))
    print(f"  view {k} scored by {t.value:>3}: P(real) = {p:.3f}")
