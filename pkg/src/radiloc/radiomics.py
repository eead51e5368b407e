"""Gray-level quantization and 2D radiomic features.

Families: first-order statistics, shape, and texture features derived from
the GLCM, GLSZM, GLRLM, NGTDM and GLDM. Feature names are ``family.Feature``
and every vector is emitted in sorted name order.
"""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from . import kernels
from .errors import ConfigError, InputError
from .imgcore import RoiMask

ANGLES = (0, 45, 90, 135)
# (row, col) unit step per angle; rows grow downward so 45 degrees points up-right
_DIRECTIONS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}
AGGREGATIONS = ("mean", "per-angle")


@dataclass(frozen=True)
class RadiomicsConfig:
    ng: int = 32
    delta: int = 1
    alpha: int = 0
    angles: tuple = ANGLES
    aggregation: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(int(a) for a in self.angles))
        if int(self.ng) != self.ng or self.ng < 2:
            raise ConfigError(f"ng must be an integer >= 2, got {self.ng}")
        if int(self.delta) != self.delta or self.delta < 1:
            raise ConfigError(f"delta must be an integer >= 1, got {self.delta}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not self.angles:
            raise ConfigError("angles must be non-empty")
        bad = [a for a in self.angles if a not in _DIRECTIONS]
        if bad:
            raise ConfigError(f"unsupported angles {bad}; choose from {ANGLES}")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}")

    def to_dict(self):
        d = asdict(self)
        d["angles"] = list(self.angles)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in ("ng", "delta", "alpha", "angles", "aggregation") if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown radiomics config keys: {sorted(unknown)}")
        return cls(**known)


@dataclass(frozen=True)
class QuantizedRoi:
    """Masked image on levels 1..ng; 0 marks pixels outside the ROI."""

    levels: np.ndarray
    ng: int
    source_stats: tuple

    @property
    def mask(self):
        return self.levels > 0

    @property
    def count(self):
        return self.source_stats[2]


@dataclass(frozen=True)
class TextureMatrix:
    """Raw texture matrix.

    For NGTDM the two columns are ``n_i`` (pixels with a valid neighbourhood)
    and ``s_i`` (sum of absolute differences); every other kind holds counts
    indexed by (level - 1, size/offset axis).
    """

    kind: str
    entries: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]

    def is_empty(self):
        counts = self.entries[:, 0] if self.kind == "NGTDM" else self.entries
        return not np.any(counts > 0)

    def normalized(self):
        counts = self.entries[:, 0] if self.kind == "NGTDM" else self.entries
        total = counts.sum()
        return counts / total if total > 0 else counts.astype(np.float64)


class FeatureVector:
    """Immutable, name-sorted collection of finite feature values."""

    def __init__(self, pairs):
        pairs = sorted((str(k), float(v)) for k, v in dict(pairs).items())
        for name, v in pairs:
            if not np.isfinite(v):
                raise InputError(f"feature {name} is not finite ({v})")
        self._names = tuple(k for k, _ in pairs)
        self._values = np.array([v for _, v in pairs], dtype=np.float64)
        self._values.setflags(write=False)

    @property
    def names(self):
        return self._names

    @property
    def values(self):
        return self._values

    def as_dict(self):
        return dict(zip(self._names, self._values.tolist()))

    def __getitem__(self, name):
        return self._values[self._names.index(name)]

    def __len__(self):
        return len(self._names)

    def __eq__(self, other):
        return (isinstance(other, FeatureVector) and self._names == other._names
                and np.array_equal(self._values, other._values))

    def __repr__(self):
        return f"FeatureVector({len(self)} features)"

    def merged(self, other):
        return FeatureVector({**self.as_dict(), **other.as_dict()})


def mean_pool(vectors):
    """Element-wise mean of feature vectors sharing one schema."""
    vectors = list(vectors)
    if not vectors:
        raise InputError("nothing to pool")
    names = vectors[0].names
    if any(v.names != names for v in vectors):
        raise InputError("feature vectors have different schemas")
    return FeatureVector(zip(names, np.mean([v.values for v in vectors], axis=0)))


def _check_pair(img, mask):
    if img.shape != mask.shape:
        raise InputError(f"image {img.shape} and mask {mask.shape} sizes differ")
    if not mask.bits.any():
        raise InputError("mask is empty")


def quantize(img, mask, ng=32):
    _check_pair(img, mask)
    if ng < 2:
        raise ConfigError("ng must be >= 2")
    vals = img.pixels[mask.bits]
    lo, hi = float(vals.min()), float(vals.max())
    levels = np.zeros(img.shape, dtype=np.int64)
    if hi == lo:
        levels[mask.bits] = 1
    else:
        binned = np.floor(ng * (vals - lo) / (hi - lo)).astype(np.int64) + 1
        levels[mask.bits] = np.minimum(binned, ng)
    return QuantizedRoi(levels, int(ng), (lo, hi, int(vals.size)))


def _entropy(p):
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum()) if p.size else 0.0


def first_order(img, mask, ng=32):
    _check_pair(img, mask)
    v = img.pixels[mask.bits]
    mean = v.mean()
    dev = v - mean
    m2 = np.mean(dev ** 2)
    if m2 > 0:
        skew = np.mean(dev ** 3) / m2 ** 1.5
        kurt = np.mean(dev ** 4) / m2 ** 2
    else:
        skew = kurt = 0.0
    q = quantize(img, mask, ng)
    hist = np.bincount(q.levels[mask.bits], minlength=ng + 1)[1:] / v.size
    return FeatureVector({
        "firstorder.Mean": mean,
        "firstorder.Median": np.median(v),
        "firstorder.Maximum": v.max(),
        "firstorder.Minimum": v.min(),
        "firstorder.Variance": m2,
        "firstorder.Skewness": skew,
        "firstorder.Kurtosis": kurt,
        "firstorder.Uniformity": np.sum(hist ** 2),
        "firstorder.Entropy": _entropy(hist),
    })


def _perimeter(bits):
    padded = np.pad(bits, 1)
    horiz = np.count_nonzero(padded[:, 1:] != padded[:, :-1])
    vert = np.count_nonzero(padded[1:, :] != padded[:-1, :])
    return int(horiz + vert)


def _max_diameter(bits):
    # the farthest pair always lies on the region boundary
    padded = np.pad(bits, 1)
    interior = (padded[1:-1, 1:-1] & padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    pts = np.argwhere(bits & ~interior).astype(np.float64)
    if len(pts) < 2:
        return 0.0
    return float(pdist(pts).max())


def shape_2d(mask):
    bits = mask.bits
    area = int(bits.sum())
    if area == 0:
        raise InputError("mask is empty")
    perim = _perimeter(bits)
    pts = np.argwhere(bits).astype(np.float64)
    cov = np.cov(pts.T, bias=True) if area > 1 else np.zeros((2, 2))
    lam = np.linalg.eigvalsh(cov)
    major, minor = max(lam[1], 0.0), max(lam[0], 0.0)
    elong = float(np.sqrt(minor / major)) if major > 0 else 1.0
    return FeatureVector({
        "shape.PixelArea": area,
        "shape.Perimeter": perim,
        "shape.MaximumDiameter": _max_diameter(bits),
        "shape.Compactness": 4.0 * np.pi * area / perim ** 2,
        "shape.Elongation": elong,
    })


def _direction(theta):
    try:
        return _DIRECTIONS[int(theta)]
    except (KeyError, ValueError):
        raise ConfigError(f"unsupported angle {theta}; choose from {ANGLES}") from None


def glcm(q, delta=1, theta=0):
    if delta < 1:
        raise ConfigError("delta must be >= 1")
    dy, dx = _direction(theta)
    counts = kernels.glcm_counts(q.levels, q.ng, dy * delta, dx * delta)
    return TextureMatrix("GLCM", counts, {"delta": delta, "theta": theta})


def glszm(q):
    return TextureMatrix("GLSZM", kernels.glszm_counts(q.levels, q.ng), {"connectivity": 8})


def glrlm(q, theta=0):
    dy, dx = _direction(theta)
    return TextureMatrix("GLRLM", kernels.glrlm_counts(q.levels, q.ng, dy, dx), {"theta": theta})


def ngtdm(q, delta=1):
    if delta < 1:
        raise ConfigError("delta must be >= 1")
    n, s = kernels.ngtdm_stats(q.levels, q.ng, delta)
    return TextureMatrix("NGTDM", np.column_stack([n.astype(np.float64), s]), {"delta": delta})


def gldm(q, delta=1, alpha=0):
    if delta < 1:
        raise ConfigError("delta must be >= 1")
    if alpha < 0:
        raise ConfigError("alpha must be >= 0")
    counts = kernels.gldm_counts(q.levels, q.ng, delta, int(np.floor(alpha)))
    return TextureMatrix("GLDM", counts, {"delta": delta, "alpha": alpha})


def _require(m, kind):
    if m.kind != kind:
        raise InputError(f"expected a {kind} matrix, got {m.kind}")
    if m.is_empty():
        raise InputError(f"{kind} matrix is all zero")


def glcm_features(m):
    _require(m, "GLCM")
    p = m.normalized()
    idx = np.arange(1, p.shape[0] + 1, dtype=np.float64)
    i, j = np.meshgrid(idx, idx, indexing="ij")
    px, py = p.sum(axis=1), p.sum(axis=0)
    mux, muy = np.dot(px, idx), np.dot(py, idx)
    sx = np.sqrt(np.dot(px, (idx - mux) ** 2))
    sy = np.sqrt(np.dot(py, (idx - muy) ** 2))
    if sx * sy > 0:
        corr = (np.sum(i * j * p) - mux * muy) / (sx * sy)
    else:
        corr = 1.0
    return {
        "Contrast": np.sum((i - j) ** 2 * p),
        "Energy": np.sum(p ** 2),
        "Homogeneity": np.sum(p / (1.0 + np.abs(i - j))),
        "Correlation": corr,
        "Entropy": _entropy(p.ravel()),
    }


def _zone_features(P, prefix, unit, emph=None, small="Small", large="Large"):
    """Shared emphasis/non-uniformity features for level x size count matrices.

    ``P`` columns are indexed by size 1..n. ``unit`` names the size axis.
    """
    emph = emph or unit
    nz = P.sum()
    sizes = np.arange(1, P.shape[1] + 1, dtype=np.float64)
    per_size = P.sum(axis=0)
    per_level = P.sum(axis=1)
    npix = np.dot(per_size, sizes)
    return {
        f"{small}{emph}Emphasis": np.dot(per_size, 1.0 / sizes ** 2) / nz,
        f"{large}{emph}Emphasis": np.dot(per_size, sizes ** 2) / nz,
        "GrayLevelNonUniformity": np.sum(per_level ** 2) / nz,
        f"{prefix}NonUniformity": np.sum(per_size ** 2) / nz,
        f"{unit}Percentage": nz / npix,
        f"{unit}Entropy": _entropy((P / nz).ravel()),
    }


def glszm_features(m):
    _require(m, "GLSZM")
    return _zone_features(m.entries.astype(np.float64), "SizeZone", "Zone", emph="Area")


def glrlm_features(m):
    _require(m, "GLRLM")
    return _zone_features(m.entries.astype(np.float64), "RunLength", "Run", small="Short", large="Long")


def ngtdm_features(m):
    """Coarseness, Contrast, Busyness, Complexity and Strength.

    Degenerate denominators follow the usual conventions: Coarseness is
    capped at 1e6 and the remaining features fall back to 0.
    """
    if m.kind != "NGTDM":
        raise InputError(f"expected a NGTDM matrix, got {m.kind}")
    n, s = m.entries[:, 0], m.entries[:, 1]
    nvp = n.sum()
    if nvp == 0:
        return {"Coarseness": 1e6, "Contrast": 0.0, "Busyness": 0.0,
                "Complexity": 0.0, "Strength": 0.0}
    p = n / nvp
    levels = np.arange(1, n.size + 1, dtype=np.float64)
    nz = p > 0
    p, s, lv = p[nz], s[nz], levels[nz]
    ngp = p.size
    ps = p * s
    coarse_den = ps.sum()
    coarseness = 1.0 / coarse_den if coarse_den > 0 else 1e6
    diff2 = (lv[:, None] - lv[None, :]) ** 2
    pp = p[:, None] * p[None, :]
    if ngp > 1:
        contrast = np.sum(pp * diff2) / (ngp * (ngp - 1)) * s.sum() / nvp
    else:
        contrast = 0.0
    busy_den = np.sum(np.abs(lv[:, None] * p[:, None] - lv[None, :] * p[None, :]))
    busyness = coarse_den / busy_den if busy_den > 0 else 0.0
    absdiff = np.abs(lv[:, None] - lv[None, :])
    complexity = np.sum(absdiff * (ps[:, None] + ps[None, :]) / (p[:, None] + p[None, :])) / nvp
    s_sum = s.sum()
    strength = np.sum((p[:, None] + p[None, :]) * diff2) / s_sum if s_sum > 0 else 0.0
    return {"Coarseness": coarseness, "Contrast": contrast, "Busyness": busyness,
            "Complexity": complexity, "Strength": strength}


def gldm_features(m):
    """Dependence features; emphasis terms use the centre-inclusive size ``d + 1``."""
    _require(m, "GLDM")
    P = m.entries.astype(np.float64)
    feats = _zone_features(P, "Dependence", "Dependence")
    del feats["DependencePercentage"]  # always 1: every pixel is counted once
    nz = P.sum()
    pl = P.sum(axis=1) / nz
    lv = np.arange(1, P.shape[0] + 1, dtype=np.float64)
    mu = np.dot(pl, lv)
    feats["GrayLevelVariance"] = np.dot(pl, (lv - mu) ** 2)
    return feats


_GLCM_NAMES = ("Contrast", "Correlation", "Energy", "Entropy", "Homogeneity")
_GLRLM_NAMES = ("GrayLevelNonUniformity", "LongRunEmphasis", "RunEntropy",
                "RunLengthNonUniformity", "RunPercentage", "ShortRunEmphasis")


def _aggregate(family, per_angle, names, cfg):
    """Combine per-angle feature dicts; angles whose matrix is empty are skipped."""
    out = {}
    valid = [d for d in per_angle.values() if d is not None]
    for name in names:
        if cfg.aggregation == "mean":
            out[f"{family}.{name}"] = float(np.mean([d[name] for d in valid])) if valid else 0.0
        else:
            for angle, d in per_angle.items():
                out[f"{family}.{name}_{angle}"] = d[name] if d is not None else 0.0
    return out


def texture_features(q, cfg):
    feats = {}
    per = {}
    for a in cfg.angles:
        m = glcm(q, cfg.delta, a)
        per[a] = None if m.is_empty() else glcm_features(m)
    feats.update(_aggregate("glcm", per, _GLCM_NAMES, cfg))
    per = {a: glrlm_features(glrlm(q, a)) for a in cfg.angles}
    feats.update(_aggregate("glrlm", per, _GLRLM_NAMES, cfg))
    feats.update({f"glszm.{k}": v for k, v in glszm_features(glszm(q)).items()})
    feats.update({f"ngtdm.{k}": v for k, v in ngtdm_features(ngtdm(q, cfg.delta)).items()})
    feats.update({f"gldm.{k}": v
                  for k, v in gldm_features(gldm(q, cfg.delta, cfg.alpha)).items()})
    return feats


def extract_all(img, mask, cfg=None):
    """Full radiomic feature vector of ``img`` restricted to ``mask``."""
    cfg = cfg or RadiomicsConfig()
    _check_pair(img, mask)
    q = quantize(img, mask, cfg.ng)
    feats = first_order(img, mask, cfg.ng).as_dict()
    feats.update(shape_2d(mask).as_dict())
    feats.update(texture_features(q, cfg))
    return FeatureVector(feats)


def extract_boxes(img, boxes, cfg=None):
    """One feature vector per box, using the box rectangle as the ROI."""
    return [extract_all(img, RoiMask.from_box(b, img.shape), cfg) for b in boxes]
