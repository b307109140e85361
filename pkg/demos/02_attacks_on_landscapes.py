"""
Three attacks on a scripted loss landscape
==========================================

A scripted oracle replays a loss over the view ring.  The fluctuating family
has one wide basin with ripples and a contiguous arc of adversarial views at
the bottom.  Random search only needs decisions; the score attacks follow a
one-sided difference of the loss.
"""
from headturn.attack import AttackConfig, advheat_rand, advheat_score, baseline_score
from headturn.detector import scripted_oracle
from headturn.harness import brute_force_adversarial_set, fluctuating_landscape
from headturn.viewpath import ViewPath

path = ViewPath()
spec = fluctuating_landscape(seed=3)
oracle = scripted_oracle(spec)
truth = sorted(brute_force_adversarial_set(oracle, path))
print("adversarial arc:", truth[0], "...", truth[-1], f"({len(truth)} views)")

for T in (50, 360):
    for attack in (advheat_rand, advheat_score, baseline_score):
        res = attack(oracle, path, AttackConfig(T=T, seed=1))
        print(f"T={T:3d} {res.kind:>8}: success={res.success!s:5} index={res.adversarial_index} "
              f"queries={res.total_queries} restarts={res.restarts}")

# the score attack's path around the ring, one line per step
res = advheat_score(oracle, path, AttackConfig(T=50, seed=1))
steps = [e for e in res.trace if e.kind == "decision"]
print(" -> ".join(str(e.index) for e in steps))

# over many landscapes the ordering at a small budget becomes visible
wins = {"rand": 0, "score": 0, "baseline": 0}
for s in range(300):
    o = scripted_oracle(fluctuating_landscape(s))
    cfg = AttackConfig(T=50, seed=s)
    wins["rand"] += advheat_rand(o, path, cfg).success
    wins["score"] += advheat_score(o, path, cfg).success
    wins["baseline"] += baseline_score(o, path, cfg).success
print({k: f"{100 * v / 300:.1f}%" for k, v in wins.items()})
