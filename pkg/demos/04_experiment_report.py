"""
Experiments as JSON documents
=============================

Everything the harness does is driven by one spec.  The same dictionaries
can be saved to a file and run with ``python -m headturn experiment``.
"""
import json
from pathlib import Path

from headturn.harness import ExperimentSpec, run_experiment

spec = {
    "kind": "query_curve",
    "landscapes": {"family": "fluctuating", "n": 200, "seed": 0},
    "attacks": ["rand", "score", "baseline"],
    "checkpoints": [10, 25, 50, 100, 200, 360],
}
report = run_experiment(ExperimentSpec.from_dict(spec))
print(report.table.to_csv())

tiers = {
    "kind": "success_matrix",
    "population": {"n": 30, "seed": 0},
    "detectors": [{"seed": 0, "tier": t} for t in ("raw", "hq", "lq")],
    "attacks": ["rand"],
}
report = run_experiment(ExperimentSpec.from_dict(tiers))
print(report.table.to_csv())

out = report.write("report_success_matrix")
Path("tiers.json").write_text(json.dumps(tiers, indent=2))
print("wrote", sorted(p.name for p in out.iterdir()))
