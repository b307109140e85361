"""Quality tiers (Raw/HQ/LQ) and input-transform defenses.

Images are float arrays in [0, 1] shaped (H, W) or (H, W, 3).  The block-DCT
functions also accept stacks with extra leading axes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

BLOCK = 8

# ITU-T T.81 Annex K luminance table
_LUMA_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=float)

# DC divisor cap: keeps flat regions within half a grey level at any quality.
DC_DIVISOR_MAX = 8.0


class QualityTier(str, enum.Enum):
    RAW = "raw"
    HQ = "hq"
    LQ = "lq"


TIER_QUALITY = {QualityTier.HQ: 85, QualityTier.LQ: 40}


def quant_table(quality: int) -> np.ndarray:
    """IJG-style quality scaling of the luminance table; all ones at quality 100."""
    if not 1 <= quality <= 100:
        raise ValueError(f"quality must be in 1..100, got {quality}")
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    q = np.floor((_LUMA_TABLE * scale + 50.0) / 100.0)
    q = np.clip(q, 1.0, 255.0)
    q[0, 0] = min(q[0, 0], DC_DIVISOR_MAX)
    return q


def _channels_first(img: np.ndarray):
    if img.ndim >= 3 and img.shape[-1] == 3:
        return np.moveaxis(img, -1, 0), True
    return img, False


def _restore(out: np.ndarray, moved: bool) -> np.ndarray:
    return np.moveaxis(out, 0, -1) if moved else out


def _to_blocks(x: np.ndarray) -> tuple[np.ndarray, tuple[int, int]]:
    h, w = x.shape[-2:]
    ph, pw = -h % BLOCK, -w % BLOCK
    if ph or pw:
        x = np.pad(x, [(0, 0)] * (x.ndim - 2) + [(0, ph), (0, pw)], mode="edge")
    hb, wb = x.shape[-2] // BLOCK, x.shape[-1] // BLOCK
    x = x.reshape(x.shape[:-2] + (hb, BLOCK, wb, BLOCK))
    return x, (h, w)


def _from_blocks(b: np.ndarray, hw: tuple[int, int]) -> np.ndarray:
    x = b.reshape(b.shape[:-4] + (b.shape[-4] * BLOCK, b.shape[-2] * BLOCK))
    return x[..., :hw[0], :hw[1]]


def jpeg_defense(img: np.ndarray, quality: int) -> np.ndarray:
    """Block-DCT quantize/dequantize round trip at the given quality."""
    q = quant_table(quality)[:, None, :]  # broadcast over the block grid
    x, moved = _channels_first(np.asarray(img, dtype=float))
    blocks, hw = _to_blocks(x * 255.0 - 128.0)
    coef = dctn(blocks, axes=(-3, -1), norm="ortho")
    coef = np.round(coef / q) * q
    out = idctn(coef, axes=(-3, -1), norm="ortho")
    out = np.clip((_from_blocks(out, hw) + 128.0) / 255.0, 0.0, 1.0)
    return _restore(out, moved)


def quality_transform(img: np.ndarray, tier: QualityTier | str) -> np.ndarray:
    tier = QualityTier(tier)
    if tier is QualityTier.RAW:
        return img
    return jpeg_defense(img, TIER_QUALITY[tier])


def bit_depth_defense(img: np.ndarray, bits: int) -> np.ndarray:
    if not 1 <= bits <= 8:
        raise ValueError(f"bits must be in 1..8, got {bits}")
    levels = float(2 ** bits - 1)
    return np.round(np.asarray(img, dtype=float) * levels) / levels


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling over the first two axes with pixel-centre alignment."""
    h, w = img.shape[:2]

    def coords(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1)
        i0 = np.floor(src).astype(int)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, src - i0

    y0, y1, fy = coords(out_h, h)
    x0, x1, fx = coords(out_w, w)
    extra = (None,) * (img.ndim - 2)
    fy = fy[(slice(None), None) + extra]
    fx = fx[(None, slice(None)) + extra]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


@dataclass(frozen=True)
class DefenseSpec:
    """One input-transform defense.

    kind is "jpeg" (uses ``quality``), "resize_pad" (``scale_min``, ``scale_max``,
    ``seed``) or "bit_depth" (``bits``).
    """

    kind: str
    quality: int = 75
    scale_min: float = 0.85
    scale_max: float = 1.0
    bits: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("jpeg", "resize_pad", "bit_depth"):
            raise ValueError(f"unknown defense kind {self.kind!r}")
        if not 0.0 < self.scale_min <= self.scale_max <= 1.0:
            raise ValueError("need 0 < scale_min <= scale_max <= 1")
        if not 1 <= self.quality <= 100:
            raise ValueError("quality must lie in 1..100")
        if not 1 <= self.bits <= 8:
            raise ValueError("bits must lie in 1..8")

    @property
    def name(self) -> str:
        if self.kind == "jpeg":
            return f"jpeg_q{self.quality}"
        if self.kind == "bit_depth":
            return f"bdr_{self.bits}bit"
        return f"rp_{self.scale_min:g}-{self.scale_max:g}"

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "seed": self.seed}
        if self.kind == "jpeg":
            d["quality"] = self.quality
        elif self.kind == "bit_depth":
            d["bits"] = self.bits
        else:
            d.update(scale_min=self.scale_min, scale_max=self.scale_max)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DefenseSpec":
        return cls(**d)


def resize_pad_params(shape, spec: DefenseSpec) -> tuple[int, int, int, int]:
    """Seeded (new_h, new_w, top, left) that :func:`resize_pad_defense` will use."""
    h, w = shape[:2]
    rng = np.random.default_rng(spec.seed)
    scale = rng.uniform(spec.scale_min, spec.scale_max)
    nh, nw = max(1, int(round(h * scale))), max(1, int(round(w * scale)))
    top = int(rng.integers(0, h - nh + 1))
    left = int(rng.integers(0, w - nw + 1))
    return nh, nw, top, left


def resize_pad_defense(img: np.ndarray, spec: DefenseSpec) -> np.ndarray:
    """Shrink by a seeded random factor, then zero-pad back at a seeded random offset."""
    if spec.kind != "resize_pad":
        raise ValueError("resize_pad_defense needs a resize_pad spec")
    img = np.asarray(img, dtype=float)
    nh, nw, top, left = resize_pad_params(img.shape, spec)
    out = np.zeros_like(img)
    out[top:top + nh, left:left + nw] = resize_bilinear(img, nh, nw)
    return out


def apply_defense(img: np.ndarray, spec: DefenseSpec) -> np.ndarray:
    if spec.kind == "jpeg":
        return jpeg_defense(img, spec.quality)
    if spec.kind == "bit_depth":
        return bit_depth_defense(img, spec.bits)
    return resize_pad_defense(img, spec)


def psnr(reference: np.ndarray, test: np.ndarray) -> float:
    mse = float(np.mean((np.asarray(reference, float) - np.asarray(test, float)) ** 2))
    return float("inf") if mse == 0.0 else 10.0 * np.log10(1.0 / mse)


def write_ppm(path, img: np.ndarray) -> None:
    """Binary P6 PPM, 8-bit; grey images are replicated to three channels."""
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=-1)
    data = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)  # half-to-even
    h, w = data.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    parts = []
    pos = 0
    while len(parts) < 4:
        # skip whitespace and comments between header tokens
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        parts.append(raw[pos:end])
        pos = end
    if parts[0] != b"P6":
        raise ValueError(f"{path}: not a binary P6 PPM")
    w, h, maxval = (int(p) for p in parts[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PPM supported")
    pix = np.frombuffer(raw[pos + 1:pos + 1 + w * h * 3], dtype=np.uint8)
    return pix.reshape(h, w, 3).astype(float) / 255.0
