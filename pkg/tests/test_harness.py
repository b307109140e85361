import json

import numpy as np
import pytest

from headturn.detector import LandscapeSpec, Label, QueryLedger, decide, scripted_oracle
from headturn.harness import (
    KINDS, ExperimentError, ExperimentSpec, ViewBank, brute_force_adversarial_set,
    derive_seed, fake_identity, fluctuating_landscape, make_landscapes, random_landscape,
    run_experiment, train_tier_detector, validate_csv,
)
from headturn.imageproc import QualityTier
from headturn.renderer import render
from headturn.viewpath import ViewPath, pose_for_index

SMALL = {"resolution": 32}
TRAIN = {"n_per_class": 60, "epochs": 60}
PATH = ViewPath()


def landscape_spec(kind, **extra):
    d = {"kind": kind, "landscapes": {"family": "random", "n": 40, "seed": 3}}
    d.update(extra)
    return ExperimentSpec.from_dict(d)


def detector_spec(kind, tiers=("raw", "lq"), n=6, **extra):
    d = {"kind": kind, "render": SMALL, "training": TRAIN, "population": {"n": n, "seed": 5},
         "detectors": [{"seed": 1, "tier": t} for t in tiers]}
    d.update(extra)
    return ExperimentSpec.from_dict(d)


def bytes_of(report, tmp_path, name):
    out = report.write(tmp_path / name)
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


# -- ground truth --------------------------------------------------------------------

def test_brute_force_examples():
    vals = [1.0] * 360
    vals[17] = vals[200] = 0.1
    oracle = scripted_oracle(LandscapeSpec(K=360, adversarial_threshold=0.5, loss_values=vals))
    assert brute_force_adversarial_set(oracle, PATH) == {17, 200}
    empty = scripted_oracle(LandscapeSpec(K=360, adversarial_threshold=0.5, loss_values=[1.0] * 360))
    assert brute_force_adversarial_set(empty, PATH) == set()


def test_brute_force_on_detector_matches_independent_loop(cfg):
    det = train_tier_detector(2, QualityTier.RAW, cfg)
    ident = fake_identity(101)
    bank = ViewBank(ident, PATH, cfg)
    from headturn.detector import ImageOracle
    got = brute_force_adversarial_set(ImageOracle(det, bank.features("raw")), PATH)
    led = QueryLedger()
    want = set()
    for i in range(PATH.K):
        if decide(det, render(ident, pose_for_index(PATH, i), cfg), led) is Label.REAL:
            want.add(i)
    assert got == want and len(want) > 0


# -- landscapes --------------------------------------------------------------------------

def test_fluctuating_landscape_has_exact_arc():
    for s in range(50):
        ls = fluctuating_landscape(s, arc_width=10)
        adv = sorted(ls.adversarial_set())
        assert len(adv) == 10
        # contiguous on the ring
        gaps = np.diff(adv + [adv[0] + 360])
        assert sorted(gaps)[:-1] == [1] * 9


def test_random_family_mixes_empty_and_nonempty():
    sizes = [len(random_landscape(s).adversarial_set()) for s in range(200)]
    assert 0 < sum(x == 0 for x in sizes) < 200


def test_make_landscapes_explicit_specs_checked():
    with pytest.raises(ExperimentError):
        make_landscapes({"specs": [{"K": 10, "adversarial_threshold": 0.1, "loss_values": [1] * 10}]}, 360)
    with pytest.raises(ExperimentError):
        make_landscapes({"family": "nope"}, 360)


# -- experiment kinds -----------------------------------------------------------------------

def test_success_matrix_rand_equals_nonempty_fraction():
    spec = landscape_spec("success_matrix", attacks=["rand"], attack={"T": 360})
    report = run_experiment(spec)
    landscapes = make_landscapes(spec.landscapes, 360)
    want = 100.0 * sum(bool(ls.adversarial_set()) for ls in landscapes) / len(landscapes)
    assert report.table.column("asr") == [want]
    for row in report.runs.rows:
        r = dict(zip(report.runs.columns, row))
        assert bool(r["success"]) == (r["bf_count"] > 0)


def test_success_matrix_ground_truth_on_detectors():
    report = run_experiment(detector_spec("success_matrix", attacks=["rand"]))
    for row in report.runs.rows:
        r = dict(zip(report.runs.columns, row))
        assert bool(r["success"]) == (r["bf_count"] > 0)


def test_reports_are_byte_identical(tmp_path):
    for i, spec in enumerate([landscape_spec("query_curve", attacks=["rand", "score", "baseline"]),
                              detector_spec("defense_eval", tiers=("hq",), n=3)]):
        a = bytes_of(run_experiment(spec), tmp_path, f"a{i}")
        b = bytes_of(run_experiment(spec), tmp_path, f"b{i}")
        assert a == b


def test_query_curve_is_monotone():
    report = run_experiment(landscape_spec("query_curve", attacks=["rand", "score", "baseline"]))
    rows = validate_csv("query_curve", report.table.to_csv())
    for attack in ("rand", "score", "baseline"):
        curve = [r["asr"] for r in rows if r["attack"] == attack]
        assert curve == sorted(curve) and len(curve) == 6


def test_view_histogram_single_bar():
    specs = []
    for j in range(25):
        vals = [2.0] * 360
        for i in range(4):
            vals[(37 * j + 50 * i) % 360] = 0.0
        specs.append({"K": 360, "adversarial_threshold": 0.5, "loss_values": vals})
    report = run_experiment(ExperimentSpec.from_dict({"kind": "view_histogram", "landscapes": {"specs": specs}}))
    assert report.table.rows == [["landscape", 4, 25, 100.0]]


def test_transfer_diagonal_matches_own_asr():
    spec = detector_spec("transfer_matrix", tiers=("raw", "hq", "lq"), n=8)
    table = run_experiment(spec).table
    own = run_experiment(detector_spec("success_matrix", tiers=("raw", "hq", "lq"), n=8,
                                       attacks=["rand"], attack={"T": 360}))
    own_asr = dict(zip(own.table.column("detector"), own.table.column("asr")))
    for s, t, a in table.rows:
        assert 0.0 <= a <= 100.0
        if s == t:
            assert a == own_asr[s]


def test_defense_eval_rows():
    report = run_experiment(detector_spec("defense_eval", tiers=("lq",), n=4, attacks=["rand"]))
    rows = validate_csv("defense_eval", report.table.to_csv())
    assert [r["defense"] for r in rows] == ["none", "jpeg_q75", "rp_0.85-1", "bdr_4bit"]
    assert all(r["asr"] <= rows[0]["asr"] for r in rows[1:])


def test_k_ablation_covers_grid():
    report = run_experiment(landscape_spec("k_ablation", attacks=["rand"], k_values=[12, 90, 360]))
    assert report.table.column("K") == [12, 90, 360]


def test_angle_heatmap_conserves_views():
    report = run_experiment(landscape_spec("angle_heatmap", bins={"yaw": 6, "pitch": 3}))
    rows = validate_csv("angle_heatmap", report.table.to_csv())
    assert sum(r["views"] for r in rows) == 40 * 360
    bf_total = sum(len(ls.adversarial_set()) for ls in make_landscapes({"family": "random", "n": 40, "seed": 3}, 360))
    assert sum(r["adversarial"] for r in rows) == bf_total


@pytest.mark.parametrize("kind", KINDS)
def test_every_kind_emits_valid_csv(kind):
    if kind in ("transfer_matrix", "defense_eval"):
        spec = detector_spec(kind, n=2)
    else:
        spec = landscape_spec(kind, k_values=[36, 360])
    report = run_experiment(spec)
    validate_csv(kind, report.table.to_csv())
    assert json.loads(json.dumps(report.manifest()))["kind"] == kind


# -- spec handling ---------------------------------------------------------------------------

def test_spec_errors():
    with pytest.raises(ExperimentError):
        ExperimentSpec.from_dict({"kind": "nope", "landscapes": {}})
    with pytest.raises(ExperimentError):
        ExperimentSpec.from_dict({"kind": "success_matrix"})
    with pytest.raises(ExperimentError):
        ExperimentSpec.from_dict({"kind": "transfer_matrix", "landscapes": {}})
    with pytest.raises(ExperimentError):
        ExperimentSpec.from_dict({"kind": "success_matrix", "landscapes": {}, "bogus": 1})
    with pytest.raises(ExperimentError):
        ExperimentSpec.from_dict({"kind": "success_matrix", "landscapes": {}, "attacks": ["psychic"]})


def test_spec_round_trip():
    spec = detector_spec("defense_eval", tiers=("hq",))
    again = ExperimentSpec.from_dict(spec.to_dict())
    assert again.to_dict() == spec.to_dict()


def test_validate_csv_rejects_bad_rates():
    with pytest.raises(ExperimentError):
        validate_csv("transfer_matrix", "source,target,asr\na,b,101.0\n")
    with pytest.raises(ExperimentError):
        validate_csv("transfer_matrix", "source,asr\na,1.0\n")


def test_derive_seed_is_stable_and_spread():
    assert derive_seed(1, "x", 2) == derive_seed(1, "x", 2)
    assert len({derive_seed(1, "x", i) for i in range(1000)}) == 1000
    assert 0 <= derive_seed(123, "y", 5) < 2**63
