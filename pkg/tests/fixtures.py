"""Synthetic on-disk fixtures: images, heatmaps, masks and manifests."""
import json

import numpy as np

from radiloc import files
from radiloc.imgcore import Heatmap, RoiMask


def blob(shape, cy, cx, sigma):
    yy, xx = np.mgrid[:shape[0], :shape[1]]
    return np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2))


def build_manifest(root, n=20, seed=0, size=(48, 40)):
    """Write ``n`` entries alternating heatmap-driven and mask-driven extraction."""
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n):
        img = rng.integers(0, 256, size).astype(np.uint8)
        files.save_gray_png(root / f"img{i:02d}.png", img)
        entry = {"image_path": f"img{i:02d}.png", "class_id": i % 8}
        if i % 2 == 0:
            cy, cx = rng.integers(10, size[0] - 10), rng.integers(10, size[1] - 10)
            h = Heatmap(blob(size, cy, cx, rng.uniform(3, 6)) + 0.01 * rng.random(size),
                        class_id=i % 8)
            files.save_heatmap_raw(root / f"cam{i:02d}.f32", h)
            entry["heatmap_path"] = f"cam{i:02d}.f32"
        else:
            m = np.zeros(size, bool)
            y, x = rng.integers(0, size[0] - 12), rng.integers(0, size[1] - 12)
            m[y:y + 12, x:x + 10] = True
            files.save_mask_png(root / f"mask{i:02d}.png", RoiMask(m))
            entry["mask_path"] = f"mask{i:02d}.png"
        lines.append(json.dumps(entry))
    path = root / "manifest.jsonl"
    path.write_text("\n".join(lines) + "\n")
    return path


def write_cases(path, n=40, seed=0, perfect=False):
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n):
        x, y = (int(v) for v in rng.integers(0, 30, 2))
        w, h = (int(v) for v in rng.integers(2, 20, 2))
        gt = [x, y, w, h]
        if perfect:
            preds = [gt]
        else:
            preds = [[x + int(rng.integers(-3, 4)) + 3, y + int(rng.integers(-3, 4)) + 3,
                      w + int(rng.integers(0, 4)), h] for _ in range(int(rng.integers(0, 3)))]
        lines.append(json.dumps({"image_id": f"c{i}", "class_id": i % 8, "gt": gt, "preds": preds}))
    path.write_text("\n".join(lines) + "\n")
    return path
