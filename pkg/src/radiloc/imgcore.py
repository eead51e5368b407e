"""Images, masks, heatmaps, and the heatmap-to-bounding-box pipeline.

A CAM heatmap is min-max normalized to [0, 255], thresholded at each level
independently, split into connected regions, and each region is covered by
its tight bounding box.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, InputError

DEFAULT_THRESHOLDS = (60, 180)
DEFAULT_CONNECTIVITY = 8


def _as_2d(arr, dtype, what):
    arr = np.asarray(arr, dtype=dtype)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"{what} must be a non-empty 2D array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class GrayImage:
    pixels: np.ndarray

    def __post_init__(self):
        px = _as_2d(self.pixels, np.float64, "image")
        if not np.all(np.isfinite(px)):
            raise InputError("image intensities must be finite")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape


@dataclass(frozen=True)
class RoiMask:
    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", _as_2d(self.bits, bool, "mask"))

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def shape(self):
        return self.bits.shape

    @property
    def area(self):
        return int(self.bits.sum())

    @classmethod
    def from_box(cls, box, shape):
        bits = np.zeros(shape, dtype=bool)
        bits[box.y:box.y + box.h, box.x:box.x + box.w] = True
        return cls(bits)


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Axis-aligned pixel rectangle: left column ``x``, top row ``y``, size ``w`` x ``h``."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if int(v) != v:
                raise InputError(f"box {name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.w < 1 or self.h < 1:
            raise InputError(f"box must have w, h >= 1, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise InputError("box origin must be non-negative")

    @property
    def area(self):
        return self.w * self.h

    def contains(self, other):
        return (self.x <= other.x and self.y <= other.y
                and other.x + other.w <= self.x + self.w
                and other.y + other.h <= self.y + self.h)

    def contains_point(self, col, row):
        return self.x <= col < self.x + self.w and self.y <= row < self.y + self.h

    def fits(self, width, height):
        return self.x + self.w <= width and self.y + self.h <= height

    def to_dict(self):
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def parse(cls, obj):
        """Build from ``{"x","y","w","h"}`` or a 4-sequence."""
        if isinstance(obj, dict):
            try:
                return cls(obj["x"], obj["y"], obj["w"], obj["h"])
            except KeyError as exc:
                raise InputError(f"box is missing key {exc}") from None
        if isinstance(obj, (list, tuple)) and len(obj) == 4:
            return cls(*obj)
        raise InputError(f"cannot interpret {obj!r} as a box")


@dataclass(frozen=True)
class Heatmap:
    """Class activation map for one class.

    ``prenormalized`` marks maps already on the 0..255 scale (8-bit PNG input);
    those skip min-max stretching.
    """

    values: np.ndarray
    class_id: int = 0
    prenormalized: bool = field(default=False)

    def __post_init__(self):
        vals = _as_2d(self.values, np.float64, "heatmap")
        if not np.all(np.isfinite(vals)):
            raise InputError("heatmap values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def shape(self):
        return self.values.shape


def _round_half_away(v):
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def normalize_heatmap(h):
    """Min-max stretch a heatmap onto integer levels 0..255.

    A constant map carries no localization signal and maps to all zeros.
    """
    v = h.values
    if h.prenormalized:
        return GrayImage(np.clip(_round_half_away(v), 0, 255))
    lo, hi = v.min(), v.max()
    if hi == lo:
        return GrayImage(np.zeros_like(v))
    scaled = 255.0 * (v - lo) / (hi - lo)
    return GrayImage(np.clip(_round_half_away(scaled), 0, 255))


def _check_threshold(t):
    if not 0 < t < 255:
        raise ConfigError(f"threshold must lie in (0, 255), got {t}")


def threshold_binary(img, t):
    _check_threshold(t)
    return RoiMask(img.pixels >= t)


def connected_components(mask, connectivity=DEFAULT_CONNECTIVITY):
    """Split a mask into maximal connected regions.

    Regions are ordered by their topmost-then-leftmost pixel.
    """
    if connectivity not in (4, 8):
        raise ConfigError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, n = kernels.label_components(mask.bits, connectivity)
    return [RoiMask(labels == k) for k in range(1, n + 1)]


def bounding_box(region):
    rows = np.flatnonzero(region.bits.any(axis=1))
    cols = np.flatnonzero(region.bits.any(axis=0))
    if rows.size == 0:
        raise InputError("cannot box an empty region")
    return BoundingBox(int(cols[0]), int(rows[0]),
                       int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def boxes_from_components(regions):
    return [bounding_box(r) for r in regions]


def generate_bboxes(h, thresholds=DEFAULT_THRESHOLDS, connectivity=DEFAULT_CONNECTIVITY,
                    min_area=1):
    """Run normalize -> threshold -> components -> boxes once per threshold.

    Returns a list of ``(threshold, BoundingBox)``; components smaller than
    ``min_area`` pixels are dropped.
    """
    thresholds = list(thresholds)
    if not thresholds:
        raise ConfigError("at least one threshold is required")
    for t in thresholds:
        _check_threshold(t)
    if min_area < 1:
        raise ConfigError("min_area must be >= 1")
    norm = normalize_heatmap(h)
    out = []
    for t in thresholds:
        regions = connected_components(threshold_binary(norm, t), connectivity)
        for region in regions:
            if region.area >= min_area:
                out.append((t, bounding_box(region)))
    return out


def _jet(t):
    r = np.clip(1.5 - np.abs(4.0 * t - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * t - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * t - 1.0), 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


def to_display(img):
    """Map an image to 8-bit display levels; 0..255 data is kept as is."""
    px = img.pixels
    if px.min() >= 0 and px.max() <= 255:
        return _round_half_away(px)
    lo, hi = px.min(), px.max()
    if hi == lo:
        return np.zeros_like(px)
    return _round_half_away(255.0 * (px - lo) / (hi - lo))


def render_overlay(img, h, boxes=(), box_color=(255, 255, 0), max_alpha=0.5):
    """Blend a jet-colored heatmap over ``img`` and outline ``boxes``.

    Per-pixel opacity is ``max_alpha * level / 255`` so a zero heatmap leaves
    the base image untouched. Returns an (H, W, 3) uint8 array.
    """
    if img.shape != h.shape:
        raise InputError(f"image {img.shape} and heatmap {h.shape} sizes differ")
    gray = to_display(img)
    base = np.repeat(gray[..., None], 3, axis=2)
    t = normalize_heatmap(h).pixels / 255.0
    alpha = (max_alpha * t)[..., None]
    rgb = (1.0 - alpha) * base + alpha * 255.0 * _jet(t)
    out = np.clip(_round_half_away(rgb), 0, 255).astype(np.uint8)
    color = np.asarray(box_color, dtype=np.uint8)
    height, width = img.shape
    for box in boxes:
        if not box.fits(width, height):
            raise InputError(f"box {box} exceeds image bounds {width}x{height}")
        x0, y0, x1, y1 = box.x, box.y, box.x + box.w - 1, box.y + box.h - 1
        out[y0, x0:x1 + 1] = color
        out[y1, x0:x1 + 1] = color
        out[y0:y1 + 1, x0] = color
        out[y0:y1 + 1, x1] = color
    return out
