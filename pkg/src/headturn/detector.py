"""Real/fake detector oracles and query accounting.

Two oracle flavours answer the same ``decide``/``score`` interface over view
indices: :class:`ImageOracle` runs a trained :class:`Detector` on rendered
views, :class:`ScriptedOracle` replays a loss landscape directly.  Every call
is metered through the :class:`QueryLedger` the caller passes in.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import prng
from .imageproc import QualityTier

P_CLAMP = 1e-12
FORMAT_VERSION = 1


class Label(str, enum.Enum):
    REAL = "real"
    FAKE = "fake"


class UnlearnableError(ValueError):
    """Training corpus cannot produce a classifier (e.g. a single class)."""


@dataclass
class QueryLedger:
    decision_queries: int = 0
    score_queries: int = 0

    @property
    def total(self) -> int:
        return self.decision_queries + self.score_queries


def cross_entropy(p_real: float, target: Label | str) -> float:
    p = min(max(float(p_real), P_CLAMP), 1.0 - P_CLAMP)
    return -math.log(p) if Label(target) is Label.REAL else -math.log(1.0 - p)


# -- features -----------------------------------------------------------------

FEATURE_NAMES = (
    "hf_energy",
    "grad_x_mean",
    "grad_y_mean",
    "grad_x_var",
    "grad_y_var",
    "blockiness",
    "asymmetry",
    "band_contrast",
    "lum_mean",
    "lum_var",
)


def luminance(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim >= 3 and img.shape[-1] == 3:
        return img @ np.array([0.299, 0.587, 0.114])
    return img


def _radial_masks(h: int, w: int):
    y = (np.arange(h) + 0.5) / h * 2.0 - 1.0
    x = (np.arange(w) + 0.5) / w * 2.0 - 1.0
    r = np.hypot(*np.meshgrid(x, y))
    return r < 0.45, (r >= 0.55) & (r < 0.85)


def extract_features(img: np.ndarray) -> np.ndarray:
    """Hand-built statistics of the luminance image.

    Accepts one image or a stack of images (leading axes are kept).  All
    statistics are on the [0, 1] grey scale with no further rescaling:

    * hf_energy: mean squared 4-neighbour Laplacian over interior pixels
    * grad_{x,y}_{mean,var}: mean of |forward difference| and variance of the
      signed forward difference
    * blockiness: mean |difference| across 8-pixel grid lines minus the mean
      elsewhere, averaged over both axes
    * asymmetry: mean(left half) - mean(right half); negates under mirroring
    * band_contrast: mean |Laplacian| in a ring at 0.55-0.85 of the half-size
      minus the mean in the central disc of radius 0.45
    * lum_mean, lum_var: luminance moments
    """
    g = luminance(img)
    h, w = g.shape[-2:]
    lead = g.shape[:-2]
    ax = (-2, -1)

    lap = (g[..., 1:-1, :-2] + g[..., 1:-1, 2:] + g[..., :-2, 1:-1] + g[..., 2:, 1:-1]
           - 4.0 * g[..., 1:-1, 1:-1])
    dx = np.diff(g, axis=-1)
    dy = np.diff(g, axis=-2)

    col_edge = (np.arange(1, w) % 8) == 0
    row_edge = (np.arange(1, h) % 8) == 0
    adx, ady = np.abs(dx), np.abs(dy)
    block_x = adx[..., col_edge].mean(axis=(-2, -1)) - adx[..., ~col_edge].mean(axis=(-2, -1))
    block_y = ady[..., row_edge, :].mean(axis=(-2, -1)) - ady[..., ~row_edge, :].mean(axis=(-2, -1))

    half = w // 2
    asym = g[..., :half].mean(axis=ax) - g[..., w - half:].mean(axis=ax)

    inner, ring = _radial_masks(h - 2, w - 2)
    alap = np.abs(lap)
    band = alap[..., ring].mean(axis=-1) - alap[..., inner].mean(axis=-1)

    feats = np.stack([
        np.mean(lap * lap, axis=ax),
        adx.mean(axis=ax),
        ady.mean(axis=ax),
        dx.var(axis=ax),
        dy.var(axis=ax),
        0.5 * (block_x + block_y),
        asym,
        band,
        g.mean(axis=ax),
        g.var(axis=ax),
    ], axis=-1)
    assert feats.shape == lead + (len(FEATURE_NAMES),)
    return feats


# -- detector -----------------------------------------------------------------

def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


@dataclass
class Detector:
    """Logistic model on standardised features; scores are P(real)."""

    weights: np.ndarray
    bias: float
    trained_tier: QualityTier = QualityTier.RAW
    threshold: float = 0.5
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None
    feature_names: tuple = FEATURE_NAMES
    train_accuracy: float = float("nan")

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        n = self.weights.shape[0]
        if self.feature_mean is None:
            self.feature_mean = np.zeros(n)
        if self.feature_scale is None:
            self.feature_scale = np.ones(n)
        self.feature_mean = np.asarray(self.feature_mean, dtype=float)
        self.feature_scale = np.asarray(self.feature_scale, dtype=float)
        self.trained_tier = QualityTier(self.trained_tier)
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise ValueError("detector parameters must be finite")

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def logit_features(self, feats: np.ndarray) -> np.ndarray:
        feats = np.asarray(feats, dtype=float)
        if feats.shape[-1] != self.n_features:
            raise ValueError(f"feature length {feats.shape[-1]} != detector length {self.n_features}")
        return ((feats - self.feature_mean) / self.feature_scale) @ self.weights + self.bias

    def prob_real(self, feats: np.ndarray) -> np.ndarray:
        """Unmetered P(real) for feature rows; use :func:`score` for metered access."""
        return _sigmoid(self.logit_features(feats))

    def to_text(self) -> str:
        lines = [
            f"headturn-detector {FORMAT_VERSION}",
            f"tier {self.trained_tier.value}",
            f"threshold {self.threshold!r}",
            f"bias {float(self.bias)!r}",
            f"train_accuracy {float(self.train_accuracy)!r}",
        ]
        for name, w, m, s in zip(self.feature_names, self.weights, self.feature_mean, self.feature_scale):
            lines.append(f"feature {name} {float(w)!r} {float(m)!r} {float(s)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Detector":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not rows or rows[0][0] != "headturn-detector":
            raise ValueError("not a detector file")
        if int(rows[0][1]) != FORMAT_VERSION:
            raise ValueError(f"unsupported detector format version {rows[0][1]}")
        kv = {r[0]: r[1] for r in rows[1:] if r[0] != "feature"}
        feats = [r for r in rows[1:] if r[0] == "feature"]
        return cls(
            weights=np.array([float(r[2]) for r in feats]),
            bias=float(kv["bias"]),
            trained_tier=QualityTier(kv["tier"]),
            threshold=float(kv["threshold"]),
            feature_mean=np.array([float(r[3]) for r in feats]),
            feature_scale=np.array([float(r[4]) for r in feats]),
            feature_names=tuple(r[1] for r in feats),
            train_accuracy=float(kv.get("train_accuracy", "nan")),
        )


def train_detector(features: np.ndarray, labels, tier: QualityTier | str = QualityTier.RAW,
                   epochs: int = 200, learning_rate: float = 0.5, seed: int = 0,
                   batch_size: int = 32, l2: float = 1e-3) -> Detector:
    """Fit a logistic-regression detector by seeded mini-batch gradient descent.

    ``features`` are rows from :func:`extract_features` of images that already
    went through ``quality_transform(., tier)``; ``labels`` are :class:`Label`
    values (or their strings).  The target is 1 for real.
    """
    X = np.asarray(features, dtype=float)
    y = np.array([1.0 if Label(lab) is Label.REAL else 0.0 for lab in labels])
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("features must be (n, d) with one label per row")
    if y.min() == y.max():
        raise UnlearnableError("corpus contains a single class")

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    Z = (X - mean) / scale
    n, d = Z.shape
    w = np.zeros(d)
    b = 0.0
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            err = _sigmoid(Z[idx] @ w + b) - y[idx]
            w -= learning_rate * (Z[idx].T @ err / len(idx) + l2 * w)
            b -= learning_rate * float(err.mean())
    acc = float(np.mean((_sigmoid(Z @ w + b) >= 0.5) == (y == 1.0)))
    return Detector(weights=w, bias=b, trained_tier=QualityTier(tier), feature_mean=mean,
                    feature_scale=scale, train_accuracy=acc)


def score(d: Detector, img: np.ndarray, ledger: QueryLedger) -> float:
    p = float(d.prob_real(extract_features(img)))
    ledger.score_queries += 1
    return p


def decide(d: Detector, img: np.ndarray, ledger: QueryLedger) -> Label:
    # ties go to real
    p = float(d.prob_real(extract_features(img)))
    ledger.decision_queries += 1
    return Label.REAL if p >= d.threshold else Label.FAKE


# -- oracles over view indices ---------------------------------------------------

class ImageOracle:
    """A detector queried on the K views of one identity.

    ``features`` holds one pre-extracted row per view (see
    :meth:`headturn.harness.ViewBank.features`); ``images`` is optional and only
    used when the caller wants the adversarial image itself.
    """

    def __init__(self, detector: Detector, features: np.ndarray, images: np.ndarray | None = None):
        self.detector = detector
        self.features = np.asarray(features, dtype=float)
        self.images = images
        self._p = detector.prob_real(self.features)

    @property
    def K(self) -> int:
        return self.features.shape[0]

    def score(self, i: int, ledger: QueryLedger) -> float:
        ledger.score_queries += 1
        return float(self._p[i])

    def decide(self, i: int, ledger: QueryLedger) -> Label:
        ledger.decision_queries += 1
        return Label.REAL if self._p[i] >= self.detector.threshold else Label.FAKE

    def image(self, i: int) -> np.ndarray:
        if self.images is None:
            raise ValueError("oracle was built without images")
        return self.images[i]


@dataclass(frozen=True)
class LandscapeSpec:
    """Loss over the view ring, explicit or generated.

    Generated losses are ``offset + sum(a * sin(2 pi f i / K + phase)) +
    noise_amplitude * n(i)`` with ``n`` standard normal from the counter hash
    keyed on ``noise_seed``.  Losses are clipped to ``[0, -ln 1e-12]`` so the
    implied score ``exp(-loss)`` is a valid probability.
    """

    K: int
    adversarial_threshold: float
    loss_values: tuple | None = None
    sinusoids: tuple = ()  # (amplitude, frequency, phase) triples
    offset: float = 0.0
    noise_seed: int = 0
    noise_amplitude: float = 0.0
    smoothing: int = 0  # half-width of the circular box filter applied to the noise

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.loss_values is not None:
            object.__setattr__(self, "loss_values", tuple(float(v) for v in self.loss_values))
            if len(self.loss_values) != self.K:
                raise ValueError("loss_values length must equal K")
        object.__setattr__(self, "sinusoids", tuple(tuple(float(c) for c in s) for s in self.sinusoids))

    def losses(self) -> np.ndarray:
        if self.loss_values is not None:
            raw = np.array(self.loss_values)
        else:
            i = np.arange(self.K)
            raw = np.full(self.K, float(self.offset))
            for amp, freq, phase in self.sinusoids:
                raw = raw + amp * np.sin(2.0 * np.pi * freq * i / self.K + phase)
            if self.noise_amplitude:
                n = prng.normal(self.noise_seed, "landscape", i)
                if self.smoothing:
                    w = 2 * self.smoothing + 1
                    n = np.convolve(np.concatenate([n[-self.smoothing:], n, n[:self.smoothing]]),
                                    np.ones(w) / math.sqrt(w), mode="valid")
                raw = raw + self.noise_amplitude * n
        return np.clip(raw, 0.0, -math.log(P_CLAMP))

    def adversarial_set(self) -> set[int]:
        return {int(i) for i in np.flatnonzero(self.losses() < self.adversarial_threshold)}

    def to_dict(self) -> dict:
        d = {"K": self.K, "adversarial_threshold": self.adversarial_threshold}
        if self.loss_values is not None:
            d["loss_values"] = list(self.loss_values)
        else:
            d.update(sinusoids=[list(s) for s in self.sinusoids], offset=self.offset,
                     noise_seed=self.noise_seed, noise_amplitude=self.noise_amplitude,
                     smoothing=self.smoothing)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LandscapeSpec":
        d = dict(d)
        if "loss_values" in d:
            d["loss_values"] = tuple(d["loss_values"])
        if "sinusoids" in d:
            d["sinusoids"] = tuple(tuple(s) for s in d["sinusoids"])
        return cls(**d)


class ScriptedOracle:
    """Replays a :class:`LandscapeSpec`: P(real) at index i is exp(-loss(i))."""

    def __init__(self, spec: LandscapeSpec):
        self.spec = spec
        self.loss = spec.losses()
        self._p = np.exp(-self.loss)

    @property
    def K(self) -> int:
        return self.spec.K

    def score(self, i: int, ledger: QueryLedger) -> float:
        ledger.score_queries += 1
        return float(self._p[i])

    def decide(self, i: int, ledger: QueryLedger) -> Label:
        ledger.decision_queries += 1
        return Label.REAL if self.loss[i] < self.spec.adversarial_threshold else Label.FAKE


def scripted_oracle(spec: LandscapeSpec) -> ScriptedOracle:
    return ScriptedOracle(spec)
