"""Reading and writing images, heatmaps, boxes, and JSON with fixed float formatting."""
import json
import math
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError
from .imgcore import GrayImage, Heatmap, RoiMask

RAW_SUFFIXES = (".f32", ".raw", ".bin")


def _read_array(path):
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "1", "I;16", "I;16B", "I;16L", "I", "P"):
                raise InputError(f"{path}: expected a grayscale image, got mode {im.mode}")
            if im.mode == "P":
                im = im.convert("L")
            arr = np.array(im)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except OSError as exc:
        raise InputError(f"{path}: unreadable image ({exc})") from None
    return arr


def load_gray(path):
    """Read an 8/16-bit grayscale PNG or binary PGM (P5)."""
    return GrayImage(_read_array(path).astype(np.float64))


def load_mask(path):
    """Any nonzero pixel is inside the mask."""
    return RoiMask(_read_array(path) != 0)


def load_heatmap(path, class_id=None):
    """Load a heatmap.

    Raw little-endian float32 files (``.f32``/``.raw``/``.bin``) need a JSON
    sidecar with the same stem holding ``width``, ``height`` and ``class_id``.
    8-bit PNGs are taken as already normalized to 0..255.
    """
    path = Path(path)
    if path.suffix.lower() in RAW_SUFFIXES:
        sidecar = path.with_suffix(".json")
        try:
            meta = json.loads(sidecar.read_text())
            payload = path.read_bytes()
        except FileNotFoundError as exc:
            raise InputError(f"{exc.filename}: no such file") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{sidecar}: invalid JSON ({exc})") from None
        try:
            w, h = int(meta["width"]), int(meta["height"])
        except (KeyError, TypeError, ValueError):
            raise InputError(f"{sidecar}: sidecar needs integer width and height") from None
        if len(payload) != 4 * w * h:
            raise InputError(f"{path}: expected {4 * w * h} bytes for {w}x{h}, got {len(payload)}")
        vals = np.frombuffer(payload, dtype="<f4").reshape(h, w).astype(np.float64)
        cid = meta.get("class_id", 0) if class_id is None else class_id
        return Heatmap(vals, class_id=int(cid))
    arr = _read_array(path)
    if arr.dtype != np.uint8:
        raise InputError(f"{path}: PNG heatmaps must be 8-bit")
    return Heatmap(arr.astype(np.float64), class_id=int(class_id or 0), prenormalized=True)


def save_heatmap_raw(path, h):
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(h.values, dtype="<f4").tobytes())
    sidecar = {"width": h.shape[1], "height": h.shape[0], "class_id": h.class_id}
    path.with_suffix(".json").write_text(json.dumps(sidecar))


def save_gray_png(path, img, bits=8):
    dtype = np.uint8 if bits == 8 else np.uint16
    arr = np.asarray(img.pixels if isinstance(img, GrayImage) else img).astype(dtype)
    Image.fromarray(arr).save(path)


def save_mask_png(path, mask):
    Image.fromarray(mask.bits.astype(np.uint8) * 255).save(path)


def save_rgb_png(path, rgb):
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def boxes_to_records(tagged_boxes, class_id):
    return [{"class_id": int(class_id), "threshold": t, **box.to_dict()}
            for t, box in tagged_boxes]


def _encode(obj):
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return "null"
        if v == int(v) and abs(v) < 2 ** 53:
            return f"{int(v)}.0"
        return format(v, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    """JSON text with floats written at 17 significant digits (round-trip exact)."""
    return _encode(obj)


def format_float(v):
    v = float(v)
    if not math.isfinite(v):
        return ""
    return format(v, ".17g")
