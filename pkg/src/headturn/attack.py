"""Black-box view-search attacks over the index ring.

``advheat_rand`` needs decisions only; ``advheat_score`` and ``baseline_score``
follow a one-sided difference estimate of the real-class cross-entropy, using
its sign or its raw magnitude respectively.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detector import Detector, Label, QueryLedger, cross_entropy, extract_features
from .viewpath import ViewPath, wrap_index

DESCEND = "descend_real_loss"
ASCEND = "ascend"


@dataclass(frozen=True)
class AttackConfig:
    T: int = 360
    h: int = 1
    alpha_max: float = 10.0
    alpha_min: float = 3.0
    seed: int = 0
    sign_convention: str = DESCEND

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.h < 1:
            raise ValueError("h must be >= 1")
        if not self.alpha_max >= self.alpha_min > 0:
            raise ValueError("need alpha_max >= alpha_min > 0")
        if self.sign_convention not in (DESCEND, ASCEND):
            raise ValueError(f"unknown sign_convention {self.sign_convention!r}")

    def to_dict(self) -> dict:
        return {"T": self.T, "h": self.h, "alpha_max": self.alpha_max, "alpha_min": self.alpha_min,
                "seed": self.seed, "sign_convention": self.sign_convention}


@dataclass(frozen=True)
class TraceEntry:
    step: int
    index: int
    kind: str  # "decision" or "score"
    value: object  # label string for decisions, loss for scores


@dataclass
class AttackResult:
    kind: str
    success: bool
    adversarial_index: int | None
    queries_used: tuple[int, int]  # (decision, score)
    trace: list = field(default_factory=list)
    restarts: int = 0

    @property
    def total_queries(self) -> int:
        return self.queries_used[0] + self.queries_used[1]

    def first_success_query(self) -> int | None:
        """Number of queries spent up to and including the successful decision."""
        return self.total_queries if self.success else None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "success": self.success,
            "adversarial_index": self.adversarial_index,
            "queries_used": {"decision": self.queries_used[0], "score": self.queries_used[1]},
            "restarts": self.restarts,
            "trace": [[e.step, e.index, e.kind, e.value] for e in self.trace],
        }


@dataclass(frozen=True)
class GradientEstimate:
    value: float
    at_index: int


def cosine_step_size(t: int, T: int, alpha_max: float, alpha_min: float) -> float:
    if T <= 1:
        return float(alpha_max)
    return alpha_min + (alpha_max - alpha_min) * (1.0 + math.cos(math.pi * t / (T - 1))) / 2.0


def _check_ring(oracle, path: ViewPath):
    if oracle.K != path.K:
        raise ValueError(f"oracle has {oracle.K} views but path has K={path.K}")


class _Run:
    """Ledger, trace and loss memo for one attack run."""

    def __init__(self, oracle, K: int):
        self.oracle = oracle
        self.K = K
        self.ledger = QueryLedger()
        self.trace: list[TraceEntry] = []
        self.losses: dict[int, float] = {}
        self.step = 0

    def decide(self, k: int) -> Label:
        lab = self.oracle.decide(k, self.ledger)
        self.trace.append(TraceEntry(self.step, k, "decision", lab.value))
        return lab

    def loss(self, k: int) -> float:
        if k not in self.losses:
            l = cross_entropy(self.oracle.score(k, self.ledger), Label.REAL)
            self.trace.append(TraceEntry(self.step, k, "score", l))
            self.losses[k] = l
        return self.losses[k]

    def uncached(self, *ks: int) -> int:
        return len({k for k in ks if k not in self.losses})

    def result(self, kind: str, index: int | None, restarts: int = 0) -> AttackResult:
        return AttackResult(kind, index is not None, index,
                            (self.ledger.decision_queries, self.ledger.score_queries),
                            self.trace, restarts)


def advheat_rand(oracle, path: ViewPath, cfg: AttackConfig) -> AttackResult:
    """Decision-only search over a seeded permutation of the views."""
    _check_ring(oracle, path)
    order = np.random.default_rng(cfg.seed).permutation(path.K)
    run = _Run(oracle, path.K)
    for t, k in enumerate(order[:min(cfg.T, path.K)]):
        run.step = t
        if run.decide(int(k)) is Label.REAL:
            return run.result("rand", int(k))
    return run.result("rand", None)


def estimate_gradient(oracle, path: ViewPath, k: int, h: int, ledger: QueryLedger,
                      cache: dict | None = None) -> GradientEstimate:
    """(l(x_k) - l(x_{k-h})) / h with l the real-class cross-entropy.

    ``cache`` maps index -> loss; indices found there cost no query, newly
    scored ones are added.
    """
    cache = {} if cache is None else cache
    k = wrap_index(k, path.K)
    km = wrap_index(k - h, path.K)
    for i in (k, km):
        if i not in cache:
            cache[i] = cross_entropy(oracle.score(i, ledger), Label.REAL)
    return GradientEstimate((cache[k] - cache[km]) / h, k)


def _score_search(oracle, path: ViewPath, cfg: AttackConfig, kind: str, move) -> AttackResult:
    _check_ring(oracle, path)
    K = path.K
    rng = np.random.default_rng(cfg.seed)
    run = _Run(oracle, K)
    direction = -1 if cfg.sign_convention == DESCEND else 1
    k = int(rng.integers(K))
    history = [k]
    restarts = 0
    while run.ledger.total < cfg.T:
        if run.decide(k) is Label.REAL:
            return run.result(kind, k, restarts)
        km = wrap_index(k - cfg.h, K)
        if run.ledger.total + run.uncached(k, km) > cfg.T:
            break
        g = (run.loss(k) - run.loss(km)) / cfg.h
        alpha = cosine_step_size(min(run.step, cfg.T - 1), cfg.T, cfg.alpha_max, cfg.alpha_min)
        k = wrap_index(k + direction * move(alpha, g), K)
        run.step += 1
        if len(history) >= 2 and k == history[-2] and k != history[-1]:
            # bouncing between two indices: start over elsewhere, budget carries on
            k = int(rng.integers(K))
            history = [k]
            restarts += 1
        else:
            history.append(k)
    return run.result(kind, None, restarts)


def _sign_move(alpha: float, g: float) -> int:
    return max(1, round(alpha)) * int(np.sign(g))


def _magnitude_move(alpha: float, g: float) -> int:
    if g == 0.0:
        return 0
    step = round(alpha * g)
    return step if step != 0 else int(np.sign(g))


def advheat_score(oracle, path: ViewPath, cfg: AttackConfig) -> AttackResult:
    """Sign-of-gradient descent on the view ring with oscillation restarts."""
    return _score_search(oracle, path, cfg, "score", _sign_move)


def baseline_score(oracle, path: ViewPath, cfg: AttackConfig) -> AttackResult:
    """Same loop as :func:`advheat_score` but stepping by round(alpha * g)."""
    return _score_search(oracle, path, cfg, "baseline", _magnitude_move)


ATTACKS = {"rand": advheat_rand, "score": advheat_score, "baseline": baseline_score}


def select_transfer_view(source: Detector, views, ledger: QueryLedger | None = None):
    """Index (and image) of the view with the highest real-class score; lowest index on ties."""
    views = np.asarray(views)
    if len(views) == 0:
        raise ValueError("no views to select from")
    p = source.prob_real(extract_features(views))
    if ledger is not None:
        ledger.score_queries += len(views)
    i = int(np.argmax(p))
    return i, views[i]


def select_transfer_index(scores) -> int:
    """Argmax over precomputed real-class scores with the lowest-index tie rule."""
    scores = np.asarray(scores)
    if scores.size == 0:
        raise ValueError("no scores to select from")
    return int(np.argmax(scores))
