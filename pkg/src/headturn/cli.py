"""Command-line entry point: ``python -m headturn <subcommand> ...``.

Every flag mirrors a key of the optional ``--config`` JSON file.  Precedence is
built-in defaults < config file < flags.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .attack import ATTACKS, AttackConfig
from .detector import Detector, ImageOracle, Label, LandscapeSpec, ScriptedOracle, extract_features, train_detector
from .harness import (ExperimentError, ExperimentSpec, ViewBank, brute_force_adversarial_set,
                      eval_tier, fake_identity, fluctuating_landscape, frontal_jitter_pose, make_corpus,
                      run_experiment)
from .imageproc import DefenseSpec, QualityTier, apply_defense, quality_transform, read_ppm, write_ppm
from .renderer import IdentitySpec, RenderConfig, render
from .viewpath import ViewPath, pose_for_index, wrap_index


class CliError(Exception):
    pass


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicitly given flags."""
    out = dict(defaults)
    if getattr(args, "config", None):
        try:
            with open(args.config) as f:
                cfg = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read config {args.config}: {e}") from None
        unknown = set(cfg) - set(defaults)
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        out.update(cfg)
    for k in defaults:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- shared option groups --------------------------------------------------------------

PATH_DEFAULTS = {"K": 360, "Y": ViewPath.Y, "P": ViewPath.P, "center": ViewPath.center}
RENDER_DEFAULTS = {"resolution": 64, "degradation_gain": 0.15, "color": False}
ORACLE_DEFAULTS = {"landscape": None, "landscape_seed": 0, "arc_width": 10, "detector": None,
                   "identity_seed": 0, "strength_min": 0.4, "strength_max": 1.0, "test_tier": "matched"}


def _add_path(p):
    p.add_argument("--K", type=int)
    p.add_argument("--Y", type=float, help="yaw amplitude, radians")
    p.add_argument("--P", type=float, help="pitch amplitude, radians")
    p.add_argument("--center", type=float, help="frontal angle, radians")


def _add_render(p):
    p.add_argument("--resolution", type=int)
    p.add_argument("--degradation-gain", dest="degradation_gain", type=float)
    p.add_argument("--color", action="store_true", default=None)


def _add_oracle(p):
    p.add_argument("--landscape", help="JSON LandscapeSpec file")
    p.add_argument("--landscape-seed", dest="landscape_seed", type=int,
                   help="seed of a generated fluctuating landscape (used when no other oracle is given)")
    p.add_argument("--arc-width", dest="arc_width", type=int)
    p.add_argument("--detector", help="detector text file; attacks a rendered fake identity")
    p.add_argument("--identity-seed", dest="identity_seed", type=int)
    p.add_argument("--strength-min", dest="strength_min", type=float)
    p.add_argument("--strength-max", dest="strength_max", type=float)
    p.add_argument("--test-tier", dest="test_tier", choices=["matched", "raw", "hq", "lq"])


def _path(o: dict) -> ViewPath:
    return ViewPath(K=o["K"], Y=o["Y"], P=o["P"], center=o["center"])


def _render_cfg(o: dict) -> RenderConfig:
    return RenderConfig(resolution=o["resolution"], degradation_gain=o["degradation_gain"], color=bool(o["color"]))


def _oracle(o: dict, path: ViewPath):
    if o["landscape"]:
        with open(o["landscape"]) as f:
            spec = LandscapeSpec.from_dict(json.load(f))
        return ScriptedOracle(spec), {"landscape": spec.to_dict()}
    if o["detector"]:
        det = Detector.from_text(Path(o["detector"]).read_text())
        ident = fake_identity(o["identity_seed"], o["strength_min"], o["strength_max"])
        feats = ViewBank(ident, path, _render_cfg(o)).features(eval_tier(det, o["test_tier"]))
        return ImageOracle(det, feats), {"detector": o["detector"], "identity_seed": ident.seed,
                                         "artifact_strength": ident.artifact_strength}
    spec = fluctuating_landscape(o["landscape_seed"], path.K, o["arc_width"])
    return ScriptedOracle(spec), {"landscape": spec.to_dict()}


# -- subcommands -----------------------------------------------------------------------

def cmd_render(args):
    o = _merge(args, {**PATH_DEFAULTS, **RENDER_DEFAULTS, "seed": 0, "fake": False, "strength": 0.5,
                      "index": None, "tier": "raw", "out": None})
    if not o["out"]:
        raise CliError("render needs --out")
    path = _path(o)
    ident = IdentitySpec(o["seed"], bool(o["fake"]), o["strength"] if o["fake"] else 0.0)
    pose = frontal_jitter_pose(ident.seed, 0.0, path.center) if o["index"] is None \
        else pose_for_index(path, wrap_index(o["index"], path.K))
    img = quality_transform(render(ident, pose, _render_cfg(o)), QualityTier(o["tier"]))
    write_ppm(o["out"], img)


def cmd_make_corpus(args):
    o = _merge(args, {**RENDER_DEFAULTS, "n_per_class": 200, "seed": 0, "strength_min": 0.4,
                      "strength_max": 1.0, "jitter_deg": 5.0, "out": None})
    if not o["out"]:
        raise CliError("make-corpus needs --out")
    images, labels = make_corpus(o["n_per_class"], o["seed"], _render_cfg(o),
                                 (o["strength_min"], o["strength_max"]), o["jitter_deg"])
    Path(o["out"]).parent.mkdir(parents=True, exist_ok=True)
    with open(o["out"], "wb") as f:
        np.savez(f, images=images, labels=np.array([lab.value for lab in labels]))


def cmd_train_detector(args):
    o = _merge(args, {"corpus": None, "tier": "raw", "epochs": 100, "learning_rate": 0.2, "seed": 0,
                      "out": None})
    if not o["corpus"] or not o["out"]:
        raise CliError("train-detector needs --corpus and --out")
    try:
        with np.load(o["corpus"]) as z:
            images, labels = z["images"], [Label(str(v)) for v in z["labels"]]
    except (OSError, KeyError, ValueError) as e:
        raise CliError(f"cannot read corpus {o['corpus']}: {e}") from None
    tier = QualityTier(o["tier"])
    det = train_detector(extract_features(quality_transform(images, tier)), labels, tier,
                         epochs=o["epochs"], learning_rate=o["learning_rate"], seed=o["seed"])
    Path(o["out"]).parent.mkdir(parents=True, exist_ok=True)
    Path(o["out"]).write_text(det.to_text())
    print(f"train accuracy {det.train_accuracy:.6f}")


def cmd_attack(args):
    o = _merge(args, {**PATH_DEFAULTS, **RENDER_DEFAULTS, **ORACLE_DEFAULTS, "kind": "score", "T": 360,
                      "h": 1, "alpha_max": 10.0, "alpha_min": 3.0, "seed": 0,
                      "sign_convention": "descend_real_loss", "out": None})
    if o["kind"] not in ATTACKS:
        raise CliError(f"unknown attack kind {o['kind']!r}")
    path = _path(o)
    cfg = AttackConfig(T=o["T"], h=o["h"], alpha_max=o["alpha_max"], alpha_min=o["alpha_min"],
                       seed=o["seed"], sign_convention=o["sign_convention"])
    oracle, desc = _oracle(o, path)
    res = ATTACKS[o["kind"]](oracle, path, cfg)
    record = {"config": cfg.to_dict(), "path": path.to_dict(), "oracle": desc, "result": res.to_dict()}
    if o["out"]:
        _write_json(o["out"], record)
    print(f"{res.kind}: success={res.success} index={res.adversarial_index} "
          f"queries={res.total_queries} restarts={res.restarts}")


def cmd_brute_force(args):
    o = _merge(args, {**PATH_DEFAULTS, **RENDER_DEFAULTS, **ORACLE_DEFAULTS, "out": None})
    path = _path(o)
    oracle, desc = _oracle(o, path)
    found = sorted(brute_force_adversarial_set(oracle, path))
    if o["out"]:
        _write_json(o["out"], {"path": path.to_dict(), "oracle": desc, "adversarial_set": found})
    print(f"{len(found)} adversarial views")


def cmd_experiment(args):
    if not args.spec:
        raise CliError("experiment needs --spec")
    try:
        spec = ExperimentSpec.load(args.spec)
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read spec {args.spec}: {e}") from None
    out = args.out or spec.output_dir
    if not out:
        raise CliError("no output directory: pass --out or set output_dir in the experiment file")
    report = run_experiment(spec)
    report.write(out)
    print(f"{spec.kind}: {len(report.table.rows)} rows -> {out}")


def cmd_defend(args):
    o = _merge(args, {"input": None, "out": None, "kind": "jpeg", "quality": 75, "scale_min": 0.85,
                      "scale_max": 1.0, "bits": 4, "seed": 0})
    if not o["input"] or not o["out"]:
        raise CliError("defend needs --in and --out")
    spec = DefenseSpec(kind=o["kind"], quality=o["quality"], scale_min=o["scale_min"],
                       scale_max=o["scale_max"], bits=o["bits"], seed=o["seed"])
    try:
        img = read_ppm(o["input"])
    except (OSError, ValueError) as e:
        raise CliError(str(e)) from None
    write_ppm(o["out"], apply_defense(img, spec))


def cmd_report(args):
    d = Path(args.dir)
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"{d} is not a report directory: {e}") from None
    lines = [f"# {manifest['kind']} (format {manifest['format_version']})", ""]
    cells = list(csv.reader(io.StringIO((d / manifest["tables"][manifest["kind"]]).read_text())))
    widths = [max(len(r[j]) for r in cells) for j in range(len(cells[0]))]
    for r in cells:
        lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
    text = "\n".join(lines) + "\n"
    (d / "summary.txt").write_text(text)
    sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="headturn", description="Adversarial head-turn view search testbed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one view to a PPM file")
    p.add_argument("--config")
    _add_path(p)
    _add_render(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--fake", action="store_true", default=None)
    p.add_argument("--strength", type=float)
    p.add_argument("--index", type=int, help="view index on the path (default: exact frontal)")
    p.add_argument("--tier", choices=["raw", "hq", "lq"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("make-corpus", help="render a frontal real/fake corpus to .npz")
    p.add_argument("--config")
    _add_render(p)
    p.add_argument("--n-per-class", dest="n_per_class", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--strength-min", dest="strength_min", type=float)
    p.add_argument("--strength-max", dest="strength_max", type=float)
    p.add_argument("--jitter-deg", dest="jitter_deg", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_make_corpus)

    p = sub.add_parser("train-detector", help="fit a detector on a corpus")
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--tier", choices=["raw", "hq", "lq"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train_detector)

    p = sub.add_parser("attack", help="run one attack and write its result record")
    p.add_argument("--config")
    _add_path(p)
    _add_render(p)
    _add_oracle(p)
    p.add_argument("--kind", choices=sorted(ATTACKS))
    p.add_argument("--T", type=int)
    p.add_argument("--h", type=int)
    p.add_argument("--alpha-max", dest="alpha_max", type=float)
    p.add_argument("--alpha-min", dest="alpha_min", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--sign-convention", dest="sign_convention", choices=["descend_real_loss", "ascend"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("brute-force", help="list every adversarial view of an oracle")
    p.add_argument("--config")
    _add_path(p)
    _add_render(p)
    _add_oracle(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_brute_force)

    p = sub.add_parser("experiment", help="run an experiment spec and write its report")
    p.add_argument("--spec")
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("defend", help="apply an input-transform defense to a PPM image")
    p.add_argument("--config")
    p.add_argument("--in", dest="input")
    p.add_argument("--out")
    p.add_argument("--kind", choices=["jpeg", "resize_pad", "bit_depth"])
    p.add_argument("--quality", type=int)
    p.add_argument("--scale-min", dest="scale_min", type=float)
    p.add_argument("--scale-max", dest="scale_max", type=float)
    p.add_argument("--bits", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_defend)

    p = sub.add_parser("report", help="print a report directory's main table")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        args.func(args)
    except (CliError, ExperimentError, ValueError, KeyError) as e:
        print(f"headturn {args.command}: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
