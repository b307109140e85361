"""Experiment runner: populations, detector training, ground truth and reports.

An experiment is fully described by one JSON document (see
:class:`ExperimentSpec`).  Oracles come either from scripted loss landscapes
or from detectors trained here on frontal renders and queried on rendered
fake identities.  Every seed used is derived from that document; nothing reads
ambient randomness.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import prng
from .attack import ATTACKS, AttackConfig, AttackResult, select_transfer_index
from .detector import (Detector, ImageOracle, Label, LandscapeSpec, QueryLedger, ScriptedOracle,
                       extract_features, train_detector)
from .imageproc import DefenseSpec, QualityTier, apply_defense, quality_transform
from .renderer import IdentitySpec, RenderConfig, render, render_many
from .viewpath import HALF_PI, EulerAngles, ViewPath, angle_arrays, pose_for_angles, pose_for_index

FORMAT_VERSION = 1
KINDS = ("success_matrix", "query_curve", "transfer_matrix", "defense_eval",
         "k_ablation", "angle_heatmap", "view_histogram")
QUERY_CHECKPOINTS = (10, 25, 50, 100, 200, 360)
K_VALUES = (12, 36, 90, 180, 360, 720)
MASK63 = (1 << 63) - 1


class ExperimentError(ValueError):
    """Spec is inconsistent or references something that does not exist."""


def derive_seed(seed: int, tag: str, i: int = 0) -> int:
    return int(prng.hash64(seed, tag, np.array([i]))[0]) & MASK63


# -- populations ------------------------------------------------------------------

def fake_identity(seed: int, strength_min: float = 0.4, strength_max: float = 1.0) -> IdentitySpec:
    u = float(prng.uniform(seed, "strength", np.array([0]))[0])
    return IdentitySpec(seed, True, strength_min + (strength_max - strength_min) * u)


def real_identity(seed: int) -> IdentitySpec:
    return IdentitySpec(seed, False, 0.0)


def frontal_jitter_pose(seed: int, jitter_deg: float = 5.0, center: float = HALF_PI):
    """A mostly-frontal camera: yaw and pitch offsets uniform in +-jitter_deg."""
    u = prng.uniform(seed, "frontal-jitter", np.arange(2)) * 2.0 - 1.0
    j = math.radians(jitter_deg)
    return pose_for_angles(EulerAngles(center + j * u[0], center + j * u[1]), center=center)


def make_corpus(n_per_class: int, seed: int, cfg: RenderConfig | None = None,
                strength=(0.4, 1.0), jitter_deg: float = 5.0):
    """Frontal renders of ``n_per_class`` real and fake identities, interleaved."""
    specs, labels = [], []
    for i in range(n_per_class):
        specs.append(real_identity(derive_seed(seed, "corpus-real", i)))
        labels.append(Label.REAL)
        specs.append(fake_identity(derive_seed(seed, "corpus-fake", i), *strength))
        labels.append(Label.FAKE)
    images = np.stack([render(s, frontal_jitter_pose(s.seed, jitter_deg), cfg) for s in specs])
    return images, labels


@dataclass(frozen=True)
class TrainingConfig:
    n_per_class: int = 200
    epochs: int = 100
    learning_rate: float = 0.2
    jitter_deg: float = 5.0
    strength_min: float = 0.4
    strength_max: float = 1.0


def train_tier_detector(seed: int, tier, cfg: RenderConfig | None = None,
                        training: TrainingConfig = TrainingConfig()) -> Detector:
    """Train a detector on frontal renders after the tier's quality transform."""
    images, labels = make_corpus(training.n_per_class, seed, cfg,
                                 (training.strength_min, training.strength_max), training.jitter_deg)
    feats = extract_features(quality_transform(images, tier))
    return train_detector(feats, labels, tier, epochs=training.epochs,
                          learning_rate=training.learning_rate, seed=seed)


class ViewBank:
    """Features of every view of one identity, per quality tier, computed on demand."""

    def __init__(self, identity: IdentitySpec, path: ViewPath, cfg: RenderConfig):
        self.identity, self.path, self.cfg = identity, path, cfg
        self._raw = None
        self._features: dict[QualityTier, np.ndarray] = {}

    def _images(self) -> np.ndarray:
        if self._raw is None:
            poses = [pose_for_index(self.path, i) for i in range(self.path.K)]
            self._raw = render_many(self.identity, poses, self.cfg)
        return self._raw

    def features(self, tier) -> np.ndarray:
        tier = QualityTier(tier)
        if tier not in self._features:
            self._features[tier] = extract_features(quality_transform(self._images(), tier))
        return self._features[tier]

    def image(self, i: int, tier) -> np.ndarray:
        return quality_transform(self._images()[i], QualityTier(tier))

    def release_images(self):
        # features stay; images are re-rendered if a new tier is requested
        self._raw = None


def eval_tier(detector: Detector, test_tier: str) -> QualityTier:
    return detector.trained_tier if test_tier == "matched" else QualityTier(test_tier)


# -- scripted landscape families -------------------------------------------------------

def _is_contiguous_arc(indices: set[int], K: int) -> bool:
    """True when ``indices`` form a single run on the ring (the empty set counts)."""
    if len(indices) in (0, K):
        return True
    starts = [i for i in indices if (i - 1) % K not in indices]
    return len(starts) == 1


def fluctuating_landscape(seed: int, K: int = 360, arc_width: int = 10) -> LandscapeSpec:
    """One wide loss basin with rippled walls; exactly ``arc_width`` adversarial views.

    The basin (one period around the ring) carries three smaller harmonics, so
    the loss fluctuates from view to view while still having a global trend.
    Draws whose ``arc_width`` lowest views are not one contiguous arc (about 2%)
    are redrawn under a derived tag, so the result is still a pure function of
    ``seed``.
    """
    for attempt in range(64):
        tag = "fluctuating" if attempt == 0 else f"fluctuating/{attempt}"
        u = prng.uniform(seed, tag, np.arange(8))
        sins = (
            (1.0, 1.0, 2 * math.pi * u[0]),
            (0.15 * (0.5 + u[1]), 2.0, 2 * math.pi * u[2]),
            (0.04 * (0.5 + u[3]), 5.0, 2 * math.pi * u[4]),
            (0.01 * (0.5 + u[5]), 11.0, 2 * math.pi * u[6]),
        )
        base = LandscapeSpec(K=K, adversarial_threshold=0.0, sinusoids=sins, offset=3.0)
        l = np.sort(base.losses())
        spec = replace(base, adversarial_threshold=float(0.5 * (l[arc_width - 1] + l[arc_width])))
        if _is_contiguous_arc(spec.adversarial_set(), K):
            return spec
    raise ExperimentError(f"no contiguous arc of width {arc_width} found for seed {seed}")


def random_landscape(seed: int, K: int = 360) -> LandscapeSpec:
    """Sum of three sinusoids plus hash noise; roughly a third have no adversarial view."""
    u = prng.uniform(seed, "random-landscape", np.arange(10))
    sins = tuple((0.3 + 0.7 * u[3 * j], float(1 + int(8 * u[3 * j + 1])), 2 * math.pi * u[3 * j + 2])
                 for j in range(3))
    base = LandscapeSpec(K=K, adversarial_threshold=0.0, sinusoids=sins, offset=4.0,
                         noise_seed=seed, noise_amplitude=0.1)
    l = base.losses()
    lo, hi = float(l.min()), float(l.max())
    return replace(base, adversarial_threshold=lo + (hi - lo) * (0.15 * u[9] - 0.05))


LANDSCAPE_FAMILIES = {"fluctuating": fluctuating_landscape, "random": random_landscape}


def make_landscapes(cfg: dict, K: int) -> list[LandscapeSpec]:
    if "specs" in cfg:
        specs = [LandscapeSpec.from_dict(d) for d in cfg["specs"]]
        for s in specs:
            if s.K != K:
                raise ExperimentError(f"landscape K={s.K} does not match path K={K}")
        return specs
    family = cfg.get("family", "fluctuating")
    if family not in LANDSCAPE_FAMILIES:
        raise ExperimentError(f"unknown landscape family {family!r}")
    seed, n = int(cfg.get("seed", 0)), int(cfg.get("n", 20))
    kwargs = {"arc_width": int(cfg.get("arc_width", 10))} if family == "fluctuating" else {}
    return [LANDSCAPE_FAMILIES[family](derive_seed(seed, "landscape", i), K, **kwargs) for i in range(n)]


# -- ground truth -----------------------------------------------------------------

def brute_force_adversarial_set(oracle, path: ViewPath) -> set[int]:
    """Every index the oracle labels real; metered on a private throwaway ledger."""
    if oracle.K != path.K:
        raise ValueError(f"oracle has {oracle.K} views but path has K={path.K}")
    scratch = QueryLedger()
    return {i for i in range(path.K) if oracle.decide(i, scratch) is Label.REAL}


# -- spec and report ----------------------------------------------------------------

@dataclass
class ExperimentSpec:
    kind: str
    path: ViewPath = field(default_factory=ViewPath)
    render: RenderConfig = field(default_factory=RenderConfig)
    population: dict = field(default_factory=lambda: {"n": 20, "seed": 0})
    landscapes: dict | None = None
    detectors: list = field(default_factory=list)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    test_tier: str = "matched"
    attacks: tuple = ("rand", "score")
    attack: AttackConfig = field(default_factory=AttackConfig)
    defenses: list = field(default_factory=list)
    checkpoints: tuple = QUERY_CHECKPOINTS
    k_values: tuple = K_VALUES
    bins: dict = field(default_factory=lambda: {"yaw": 12, "pitch": 6})
    output_dir: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ExperimentError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        for a in self.attacks:
            if a not in ATTACKS:
                raise ExperimentError(f"unknown attack {a!r}")
        if self.test_tier != "matched":
            QualityTier(self.test_tier)
        if self.landscapes is None and not self.detectors:
            raise ExperimentError("spec needs either landscapes or detectors")
        if self.landscapes is not None and self.kind in ("transfer_matrix", "defense_eval"):
            raise ExperimentError(f"{self.kind} needs rendered views, not scripted landscapes")

    @property
    def uses_landscapes(self) -> bool:
        return self.landscapes is not None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        kw = {"kind": d.pop("kind", None)}
        if "path" in d:
            kw["path"] = ViewPath.from_dict(d.pop("path"))
        if "render" in d:
            r = dict(d.pop("render"))
            if "light_direction" in r:
                r["light_direction"] = tuple(r["light_direction"])
            kw["render"] = RenderConfig(**r)
        if "training" in d:
            kw["training"] = TrainingConfig(**d.pop("training"))
        if "attack" in d:
            kw["attack"] = AttackConfig(**d.pop("attack"))
        if "defenses" in d:
            kw["defenses"] = [DefenseSpec.from_dict(x) for x in d.pop("defenses")]
        for key in ("attacks", "checkpoints", "k_values"):
            if key in d:
                kw[key] = tuple(d.pop(key))
        for key in ("population", "landscapes", "detectors", "test_tier", "bins", "output_dir"):
            if key in d:
                kw[key] = d.pop(key)
        if d:
            raise ExperimentError(f"unknown spec keys: {sorted(d)}")
        try:
            return cls(**kw)
        except TypeError as e:
            raise ExperimentError(str(e)) from None

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "path": self.path.to_dict(),
            "render": {"resolution": self.render.resolution, "degradation_gain": self.render.degradation_gain,
                       "light_direction": list(self.render.light_direction), "color": self.render.color},
            "attacks": list(self.attacks),
            "attack": self.attack.to_dict(),
            "test_tier": self.test_tier,
        }
        if self.uses_landscapes:
            d["landscapes"] = self.landscapes
        else:
            d["population"] = self.population
            d["detectors"] = self.detectors
            d["training"] = vars(self.training).copy()
        if self.kind == "defense_eval":
            d["defenses"] = [x.to_dict() for x in self.defenses]
        if self.kind == "query_curve":
            d["checkpoints"] = list(self.checkpoints)
        if self.kind == "k_ablation":
            d["k_values"] = list(self.k_values)
        if self.kind == "angle_heatmap":
            d["bins"] = self.bins
        return d


@dataclass
class Table:
    columns: list[str]
    rows: list[list]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "%.6f" % v
    return str(v)


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    table: Table
    runs: Table
    format_version: int = FORMAT_VERSION

    def manifest(self) -> dict:
        return {"format_version": self.format_version, "kind": self.kind, "config": self.config,
                "tables": {self.kind: f"{self.kind}.csv", "runs": "runs.csv"},
                "n_rows": len(self.table.rows), "n_runs": len(self.runs.rows)}

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{self.kind}.csv").write_text(self.table.to_csv())
        (out / "runs.csv").write_text(self.runs.to_csv())
        (out / "manifest.json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        return out


RUN_COLUMNS = ["oracle", "identity", "identity_seed", "attack", "K", "attack_seed", "success",
               "adversarial_index", "decision_queries", "score_queries", "restarts", "bf_count"]


# column name -> type for every table kind; "rate" columns are percentages
TABLE_SCHEMAS = {
    "success_matrix": {"detector": str, "tier": str, "attack": str, "identities": int, "asr": "rate",
                       "mean_queries_success": float},
    "query_curve": {"detector": str, "attack": str, "budget": int, "asr": "rate"},
    "transfer_matrix": {"source": str, "target": str, "asr": "rate"},
    "defense_eval": {"detector": str, "attack": str, "defense": str, "asr": "rate"},
    "k_ablation": {"detector": str, "attack": str, "K": int, "asr": "rate"},
    "angle_heatmap": {"detector": str, "yaw_lo": float, "yaw_hi": float, "pitch_lo": float,
                      "pitch_hi": float, "views": int, "adversarial": int, "density": "rate"},
    "view_histogram": {"detector": str, "adversarial_views": int, "identities": int, "percent": "rate"},
}


def validate_csv(kind: str, text: str) -> list[dict]:
    """Parse a result table and check it against :data:`TABLE_SCHEMAS`; returns typed rows."""
    schema = TABLE_SCHEMAS[kind]
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != list(schema):
        raise ExperimentError(f"{kind}: header {header} != {list(schema)}")
    rows = []
    for n, raw in enumerate(reader, start=2):
        if len(raw) != len(header):
            raise ExperimentError(f"{kind} line {n}: {len(raw)} fields, expected {len(header)}")
        row = {}
        for (name, typ), cell in zip(schema.items(), raw):
            try:
                v = cell if typ is str else int(cell) if typ is int else float(cell)
            except ValueError:
                raise ExperimentError(f"{kind} line {n}: {name}={cell!r} is not {typ}") from None
            if typ == "rate" and not 0.0 <= v <= 100.0:
                raise ExperimentError(f"{kind} line {n}: {name}={v} outside [0, 100]")
            row[name] = v
        rows.append(row)
    if not rows:
        raise ExperimentError(f"{kind}: empty table")
    return rows


def asr(successes) -> float:
    successes = list(successes)
    return 100.0 * sum(bool(s) for s in successes) / len(successes) if successes else 0.0


# -- the experiment context ------------------------------------------------------------

class _Context:
    """Lazily built oracles shared by one experiment run."""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self._detectors: dict[str, Detector] = {}
        self._banks: dict[tuple, ViewBank] = {}
        self.runs: list[list] = []

    # detectors
    def detector_names(self) -> list[str]:
        return [self._name(d) for d in self.spec.detectors]

    @staticmethod
    def _name(d: dict) -> str:
        return f"d{int(d['seed'])}-{QualityTier(d['tier']).value}"

    def detector(self, name: str) -> Detector:
        if name not in self._detectors:
            for d in self.spec.detectors:
                if self._name(d) == name:
                    if "file" in d:
                        self._detectors[name] = Detector.from_text(Path(d["file"]).read_text())
                    else:
                        self._detectors[name] = train_tier_detector(int(d["seed"]), d["tier"],
                                                                    self.spec.render, self.spec.training)
                    break
            else:
                raise ExperimentError(f"spec references missing detector {name!r}")
        return self._detectors[name]

    # identities
    def identities(self) -> list[IdentitySpec]:
        pop = self.spec.population
        seed, n = int(pop.get("seed", 0)), int(pop.get("n", 20))
        lo, hi = float(pop.get("strength_min", 0.4)), float(pop.get("strength_max", 1.0))
        return [fake_identity(derive_seed(seed, "attack-identity", i), lo, hi) for i in range(n)]

    def bank(self, ident: IdentitySpec, path: ViewPath) -> ViewBank:
        key = (ident.seed, path)
        if key not in self._banks:
            self._banks[key] = ViewBank(ident, path, self.spec.render)
        return self._banks[key]

    def image_oracle(self, name: str, ident: IdentitySpec, path: ViewPath) -> ImageOracle:
        det = self.detector(name)
        return ImageOracle(det, self.bank(ident, path).features(eval_tier(det, self.spec.test_tier)))

    # a uniform view of "one population member against one oracle"
    def members(self, path: ViewPath):
        """Yield (oracle_name, member_name, member_seed, oracle) over the population."""
        if self.spec.uses_landscapes:
            for j, ls in enumerate(make_landscapes(self.spec.landscapes, path.K)):
                yield "landscape", f"L{j}", ls.noise_seed, ScriptedOracle(ls)
            return
        names = self.detector_names()
        for i, ident in enumerate(self.identities()):
            for name in names:
                yield name, f"I{i}", ident.seed, self.image_oracle(name, ident, path)
            # at most one identity's images stay resident
            for key in [k for k in self._banks if k[0] == ident.seed]:
                self._banks[key].release_images()

    def run_attack(self, kind: str, oracle, path: ViewPath, oracle_name: str, member: str,
                   member_seed: int, index: int, T: int | None = None) -> AttackResult:
        cfg = replace(self.spec.attack, seed=derive_seed(self.spec.attack.seed, "attack", index),
                      T=T if T is not None else self.spec.attack.T)
        res = ATTACKS[kind](oracle, path, cfg)
        bf = len(brute_force_adversarial_set(oracle, path))
        self.runs.append([oracle_name, member, member_seed, kind, path.K, cfg.seed, res.success,
                          "" if res.adversarial_index is None else res.adversarial_index,
                          res.queries_used[0], res.queries_used[1], res.restarts, bf])
        return res


def _member_index(member: str) -> int:
    return int(member[1:])


# -- experiment kinds -----------------------------------------------------------------

def _success_matrix(ctx: _Context) -> Table:
    spec = ctx.spec
    outcome: dict[tuple, list] = {}
    for oname, member, mseed, oracle in ctx.members(spec.path):
        for kind in spec.attacks:
            res = ctx.run_attack(kind, oracle, spec.path, oname, member, mseed, _member_index(member))
            outcome.setdefault((oname, kind), []).append(res)
    rows = []
    for (oname, kind), results in sorted(outcome.items()):
        tier = "" if oname == "landscape" else ctx.detector(oname).trained_tier.value
        used = [r.total_queries for r in results if r.success]
        rows.append([oname, tier, kind, len(results), asr(r.success for r in results),
                     float(np.mean(used)) if used else 0.0])
    return Table(["detector", "tier", "attack", "identities", "asr", "mean_queries_success"], rows)


def _query_curve(ctx: _Context) -> Table:
    spec = ctx.spec
    budget = max(spec.checkpoints)
    used: dict[tuple, list] = {}
    for oname, member, mseed, oracle in ctx.members(spec.path):
        for kind in spec.attacks:
            res = ctx.run_attack(kind, oracle, spec.path, oname, member, mseed, _member_index(member), T=budget)
            used.setdefault((oname, kind), []).append(res.total_queries if res.success else None)
    rows = []
    for (oname, kind), q in sorted(used.items()):
        for b in sorted(spec.checkpoints):
            rows.append([oname, kind, b, asr(u is not None and u <= b for u in q)])
    return Table(["detector", "attack", "budget", "asr"], rows)


def _transfer_matrix(ctx: _Context) -> Table:
    spec = ctx.spec
    names = ctx.detector_names()
    hits = {(s, t): [] for s in names for t in names}
    for i, ident in enumerate(ctx.identities()):
        bank = ctx.bank(ident, spec.path)
        for s in names:
            src = ctx.detector(s)
            k = select_transfer_index(src.prob_real(bank.features(eval_tier(src, spec.test_tier))))
            for t in names:
                tgt = ctx.detector(t)
                p = float(tgt.prob_real(bank.features(eval_tier(tgt, spec.test_tier))[k]))
                fooled = p >= tgt.threshold
                hits[(s, t)].append(fooled)
                ctx.runs.append([f"{s}->{t}", f"I{i}", ident.seed, "transfer", spec.path.K, "", fooled,
                                 k, 1, spec.path.K, 0, ""])
        bank.release_images()
    rows = [[s, t, asr(hits[(s, t)])] for s in names for t in names]
    return Table(["source", "target", "asr"], rows)


def _defense_eval(ctx: _Context) -> Table:
    spec = ctx.spec
    defenses = spec.defenses or default_defenses()
    identities = {x.seed: x for x in ctx.identities()}
    survived = {}
    for oname, member, mseed, oracle in ctx.members(spec.path):
        det = ctx.detector(oname)
        tier = eval_tier(det, spec.test_tier)
        for kind in spec.attacks:
            res = ctx.run_attack(kind, oracle, spec.path, oname, member, mseed, _member_index(member))
            survived.setdefault((oname, kind, "none"), []).append(res.success)
            adv = None
            if res.success:
                adv = ctx.bank(identities[mseed], spec.path).image(res.adversarial_index, tier)
            for j, dspec in enumerate(defenses):
                ok = False
                if adv is not None:
                    seeded = replace(dspec, seed=derive_seed(dspec.seed, "defense", _member_index(member)))
                    defended = apply_defense(adv, seeded)
                    ok = bool(det.prob_real(extract_features(defended)) >= det.threshold)
                survived.setdefault((oname, kind, f"{j}:{dspec.name}"), []).append(ok)
    rows = []
    for (oname, kind, dname), oks in sorted(survived.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] != "none", kv[0][2])):
        rows.append([oname, kind, dname.split(":", 1)[-1], asr(oks)])
    return Table(["detector", "attack", "defense", "asr"], rows)


def default_defenses() -> list[DefenseSpec]:
    return [DefenseSpec("jpeg", quality=75), DefenseSpec("resize_pad", scale_min=0.85, scale_max=1.0),
            DefenseSpec("bit_depth", bits=4)]


def _k_ablation(ctx: _Context) -> Table:
    spec = ctx.spec
    out: dict[tuple, list] = {}
    for K in spec.k_values:
        path = replace(spec.path, K=int(K))
        for oname, member, mseed, oracle in ctx.members(path):
            for kind in spec.attacks:
                res = ctx.run_attack(kind, oracle, path, oname, member, mseed, _member_index(member))
                out.setdefault((oname, kind, int(K)), []).append(res.success)
        ctx._banks.clear()
    rows = [[o, a, K, asr(v)] for (o, a, K), v in sorted(out.items())]
    return Table(["detector", "attack", "K", "asr"], rows)


def _angle_heatmap(ctx: _Context) -> Table:
    spec = ctx.spec
    path = spec.path
    phi, theta = angle_arrays(path)
    yaw, pitch = phi - path.center, theta - path.center
    ny, npitch = int(spec.bins.get("yaw", 12)), int(spec.bins.get("pitch", 6))
    yaw_edges = np.linspace(-path.Y, path.Y, ny + 1) if path.Y > 0 else np.array([-1e-9, 1e-9])
    pitch_edges = np.linspace(-path.P, path.P, npitch + 1) if path.P > 0 else np.array([-1e-9, 1e-9])
    yb = np.clip(np.searchsorted(yaw_edges, yaw, side="right") - 1, 0, len(yaw_edges) - 2)
    pb = np.clip(np.searchsorted(pitch_edges, pitch, side="right") - 1, 0, len(pitch_edges) - 2)
    views: dict[tuple, int] = {}
    adv: dict[tuple, int] = {}
    for oname, member, mseed, oracle in ctx.members(path):
        bf = brute_force_adversarial_set(oracle, path)
        ctx.runs.append([oname, member, mseed, "brute_force", path.K, "", bool(bf), "", path.K, 0, 0, len(bf)])
        for i in range(path.K):
            key = (oname, int(yb[i]), int(pb[i]))
            views[key] = views.get(key, 0) + 1
            adv[key] = adv.get(key, 0) + (i in bf)
    rows = []
    for key in sorted(views):
        oname, a, b = key
        rows.append([oname, float(yaw_edges[a]), float(yaw_edges[a + 1]), float(pitch_edges[b]),
                     float(pitch_edges[b + 1]), views[key], adv[key], 100.0 * adv[key] / views[key]])
    return Table(["detector", "yaw_lo", "yaw_hi", "pitch_lo", "pitch_hi", "views", "adversarial", "density"],
                 rows)


def _view_histogram(ctx: _Context) -> Table:
    spec = ctx.spec
    counts: dict[str, list] = {}
    for oname, member, mseed, oracle in ctx.members(spec.path):
        bf = brute_force_adversarial_set(oracle, spec.path)
        ctx.runs.append([oname, member, mseed, "brute_force", spec.path.K, "", bool(bf), "",
                         spec.path.K, 0, 0, len(bf)])
        counts.setdefault(oname, []).append(len(bf))
    rows = []
    for oname, c in sorted(counts.items()):
        vals, freq = np.unique(c, return_counts=True)
        for v, f in zip(vals, freq):
            rows.append([oname, int(v), int(f), 100.0 * f / len(c)])
    return Table(["detector", "adversarial_views", "identities", "percent"], rows)


_RUNNERS = {
    "success_matrix": _success_matrix,
    "query_curve": _query_curve,
    "transfer_matrix": _transfer_matrix,
    "defense_eval": _defense_eval,
    "k_ablation": _k_ablation,
    "angle_heatmap": _angle_heatmap,
    "view_histogram": _view_histogram,
}


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    ctx = _Context(spec)
    table = _RUNNERS[spec.kind](ctx)
    runs = Table(RUN_COLUMNS, sorted(ctx.runs, key=lambda r: tuple(str(x) for x in r[:6])))
    return ExperimentReport(spec.kind, spec.to_dict(), table, runs)
