"""Command-line interface: extract, maskgen, eval, auc, loss, gradcheck.

Settings precedence: built-in defaults < ``--config`` file < explicit flags.
"""
import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import attn, evaluation, files, objective
from .errors import ConfigError, InputError, RadilocError
from .imgcore import DEFAULT_THRESHOLDS, generate_bboxes, render_overlay
from .radiomics import RadiomicsConfig, extract_all, extract_boxes, mean_pool

GRADCHECK_TOL = 1e-5


@dataclass(frozen=True)
class RunConfig:
    radiomics: RadiomicsConfig = field(default_factory=RadiomicsConfig)
    thresholds: tuple = DEFAULT_THRESHOLDS
    connectivity: int = 8
    min_area: int = 1
    p_norm: float = 2
    seed: int = 0
    output_format: str = "json"
    strict: bool = False
    pool: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(self.thresholds))
        for t in self.thresholds:
            if not 0 < t < 255:
                raise ConfigError(f"threshold must lie in (0, 255), got {t}")
        if self.connectivity not in (4, 8):
            raise ConfigError("connectivity must be 4 or 8")
        if self.min_area < 1:
            raise ConfigError("min_area must be >= 1")
        if self.p_norm < 1:
            raise ConfigError("p_norm must be >= 1")
        if self.output_format not in ("json", "csv"):
            raise ConfigError("output format must be json or csv")
        if self.pool not in ("none", "mean"):
            raise ConfigError("pool must be none or mean")

    def to_dict(self):
        return {"radiomics": self.radiomics.to_dict(), "thresholds": list(self.thresholds),
                "connectivity": self.connectivity, "min_area": self.min_area,
                "p_norm": self.p_norm, "seed": self.seed,
                "output_format": self.output_format, "pool": self.pool}


_FLAG_KEYS = ("thresholds", "connectivity", "min_area", "p_norm", "seed", "output_format",
              "strict", "pool")
_RADIOMICS_FLAGS = {"ng": "ng", "delta": "delta", "alpha": "alpha", "angles": "angles",
                    "aggregation": "aggregation"}


def build_config(args):
    """Merge defaults, the optional config file, then explicit flags."""
    values = {}
    rad = {}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise InputError(f"{args.config}: no such file") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: invalid JSON ({exc.msg})") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        raw = dict(raw)
        rad.update(raw.pop("radiomics", {}) or {})
        for key in list(raw):
            if key in _RADIOMICS_FLAGS:
                rad[key] = raw.pop(key)
        unknown = set(raw) - set(_FLAG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    for flag, key in _RADIOMICS_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            rad[key] = v
    return RunConfig(radiomics=RadiomicsConfig.from_dict(rad), **values)


def _resolve(root, p):
    p = Path(p)
    return p if p.is_absolute() else Path(root) / p


def load_manifest(path, root=None):
    """Read a JSON-lines manifest; paths resolve against ``root`` (default: its directory)."""
    root = Path(root) if root else Path(path).resolve().parent
    entries = []
    for n, obj in evaluation.read_jsonl(path):
        if not isinstance(obj, dict) or "image_path" not in obj and "heatmap_path" not in obj:
            raise InputError(f"{path}:{n}: entry needs image_path or heatmap_path")
        entries.append(obj)
    if not entries:
        raise InputError(f"{path}: manifest is empty")
    return root, entries


def _extract_entry(job):
    index, entry, root, cfg = job
    base = {"index": index, "image_path": entry.get("image_path")}
    try:
        if "image_path" not in entry:
            raise InputError("entry has no image_path")
        img = files.load_gray(_resolve(root, entry["image_path"]))
        records = []
        if entry.get("heatmap_path"):
            hm = files.load_heatmap(_resolve(root, entry["heatmap_path"]), entry.get("class_id"))
            if hm.shape != img.shape:
                raise InputError(f"heatmap {hm.shape} and image {img.shape} sizes differ")
            tagged = generate_bboxes(hm, cfg.thresholds, cfg.connectivity, cfg.min_area)
            vecs = extract_boxes(img, [b for _, b in tagged], cfg.radiomics)
            meta = {"heatmap_path": entry["heatmap_path"], "class_id": hm.class_id}
            if cfg.pool == "mean" and vecs:
                records.append({**base, **meta, "pooled": len(vecs),
                                "features": mean_pool(vecs).as_dict()})
            elif cfg.pool == "none":
                for (t, box), vec in zip(tagged, vecs):
                    records.append({**base, **meta, "threshold": t, "box": box.to_dict(),
                                    "features": vec.as_dict()})
        elif entry.get("mask_path"):
            mask = files.load_mask(_resolve(root, entry["mask_path"]))
            vec = extract_all(img, mask, cfg.radiomics)
            records.append({**base, "mask_path": entry["mask_path"], "features": vec.as_dict()})
        else:
            raise InputError("entry needs mask_path or heatmap_path")
        return {"records": records, "error": None, **base}
    except RadilocError as exc:
        return {"records": [], "error": str(exc), **base}


def _run_jobs(fn, jobs, n_jobs):
    if n_jobs <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))


def _emit(text, output):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _features_csv(records):
    names = sorted({k for r in records for k in r["features"]})
    meta = ["index", "image_path", "mask_path", "heatmap_path", "class_id", "threshold",
            "x", "y", "w", "h"]
    lines = [",".join(meta + names)]
    for r in records:
        box = r.get("box", {})
        row = [r.get("index"), r.get("image_path"), r.get("mask_path"), r.get("heatmap_path"),
               r.get("class_id"), r.get("threshold"), box.get("x"), box.get("y"),
               box.get("w"), box.get("h")]
        cells = ["" if v is None else str(v) for v in row]
        cells += [files.format_float(r["features"][n]) if n in r["features"] else ""
                  for n in names]
        lines.append(",".join(_csv_cell(c) for c in cells))
    return "\n".join(lines) + "\n"


def _csv_cell(s):
    return f'"{s}"' if ("," in s or '"' in s) else s


def _report_failures(results, cfg, what):
    failures = [{"index": r["index"], "image_path": r["image_path"], "error": r["error"]}
                for r in results if r["error"]]
    for f in failures:
        print(f"warning: entry {f['index']} ({f['image_path']}): {f['error']}", file=sys.stderr)
    n_ok = len(results) - len(failures)
    print(f"{what}: {n_ok}/{len(results)} entries succeeded", file=sys.stderr)
    code = 1 if (failures and cfg.strict) else 0
    return failures, code


def cmd_extract(args):
    cfg = build_config(args)
    root, entries = load_manifest(args.manifest, args.root)
    jobs = [(i, e, str(root), cfg) for i, e in enumerate(entries)]
    results = _run_jobs(_extract_entry, jobs, args.jobs)
    failures, code = _report_failures(results, cfg, "extract")
    records = [rec for r in results for rec in r["records"]]
    if cfg.output_format == "csv":
        text = _features_csv(records)
    else:
        text = files.dumps({"config": cfg.to_dict(), "records": records,
                            "failures": failures}) + "\n"
    _emit(text, args.output)
    return code


def _maskgen_entry(job):
    index, entry, root, cfg, overlay_dir = job
    base = {"index": index, "image_path": entry.get("image_path"),
            "heatmap_path": entry.get("heatmap_path")}
    try:
        if not entry.get("heatmap_path"):
            raise InputError("entry has no heatmap_path")
        hm = files.load_heatmap(_resolve(root, entry["heatmap_path"]), entry.get("class_id"))
        tagged = generate_bboxes(hm, cfg.thresholds, cfg.connectivity, cfg.min_area)
        boxes = files.boxes_to_records(tagged, hm.class_id)
        if overlay_dir:
            if not entry.get("image_path"):
                raise InputError("overlay needs image_path")
            img = files.load_gray(_resolve(root, entry["image_path"]))
            rgb = render_overlay(img, hm, [b for _, b in tagged])
            stem = Path(entry["heatmap_path"]).stem
            files.save_rgb_png(Path(overlay_dir) / f"{index:04d}_{stem}.png", rgb)
        return {**base, "boxes": boxes, "error": None}
    except RadilocError as exc:
        return {**base, "boxes": [], "error": str(exc)}


def cmd_maskgen(args):
    cfg = build_config(args)
    root, entries = load_manifest(args.manifest, args.root)
    if args.overlay:
        Path(args.overlay).mkdir(parents=True, exist_ok=True)
    jobs = [(i, e, str(root), cfg, args.overlay) for i, e in enumerate(entries)]
    results = _run_jobs(_maskgen_entry, jobs, args.jobs)
    failures, code = _report_failures(results, cfg, "maskgen")
    ok = [{k: r[k] for k in ("index", "image_path", "heatmap_path", "boxes")}
          for r in results if not r["error"]]
    if cfg.output_format == "csv":
        lines = ["index,heatmap_path,class_id,threshold,x,y,w,h"]
        for r in ok:
            for b in r["boxes"]:
                lines.append(",".join(str(v) for v in (r["index"], r["heatmap_path"], b["class_id"],
                                                       b["threshold"], b["x"], b["y"], b["w"], b["h"])))
        text = "\n".join(lines) + "\n"
    else:
        text = files.dumps({"config": cfg.to_dict(), "entries": ok, "failures": failures}) + "\n"
    _emit(text, args.output)
    return code


def _parse_floats(s):
    return [float(v) for v in s.split(",") if v.strip()]


def cmd_eval(args):
    cfg = build_config(args)
    cases = evaluation.load_cases(args.cases)
    thresholds = _parse_floats(args.iou) if args.iou else evaluation.IOU_THRESHOLDS
    report = evaluation.sweep_report(cases, thresholds)
    if cfg.output_format == "csv":
        text = report.to_csv()
    else:
        text = files.dumps(report.to_dict()) + "\n"
    _emit(text, args.output)
    return 0


def cmd_auc(args):
    cfg = build_config(args)
    result = evaluation.auc_by_class(evaluation.load_scores(args.scores))
    for name in result["skipped"]:
        print(f"warning: class {name} lacks positives or negatives; skipped", file=sys.stderr)
    if not result["per_class"]:
        raise InputError("no class has both positive and negative samples")
    if cfg.output_format == "csv":
        lines = [",".join(list(result["per_class"]) + ["Mean"])]
        lines.append(",".join(files.format_float(v)
                              for v in list(result["per_class"].values()) + [result["mean"]]))
        text = "\n".join(lines) + "\n"
    else:
        text = files.dumps(result) + "\n"
    _emit(text, args.output)
    return 0


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"{what} file {path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path}: invalid JSON ({exc.msg})") from None


def _vector(obj, key, what):
    if isinstance(obj, dict) and key in obj:
        obj = obj[key]
    if isinstance(obj, dict):
        obj = obj.get("features", obj)
        obj = [obj[k] for k in sorted(obj)]
    try:
        v = np.asarray(obj, dtype=np.float64).ravel()
    except (TypeError, ValueError):
        raise InputError(f"{what} is not a numeric vector") from None
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise InputError(f"{what} must be a non-empty finite vector")
    return v


def cmd_loss(args):
    cfg = build_config(args)
    feats = _read_json(args.features, "features")
    if not isinstance(feats, dict) or "image_features" not in feats or "radiomic_features" not in feats:
        raise InputError("features file needs image_features and radiomic_features")
    i_f = _vector(feats["image_features"], None, "image_features")
    r_f = _vector(feats["radiomic_features"], None, "radiomic_features")
    probs = _vector(_read_json(args.probs, "probs"), "probs", "probs")
    labels = _vector(_read_json(args.labels, "labels"), "labels", "labels")
    if probs.size != labels.size:
        raise InputError(f"probs has {probs.size} entries but labels has {labels.size}")
    if probs.size != args.num_classes:
        raise InputError(f"probs/labels have {probs.size} classes, expected {args.num_classes}")
    if args.projections:
        pj = _read_json(args.projections, "projections")
        try:
            proj_i = objective.Projection.from_dict(pj["image"])
            proj_r = objective.Projection.from_dict(pj["radiomic"])
        except (KeyError, TypeError):
            raise InputError("projections file needs 'image' and 'radiomic' objects") from None
    else:
        rng = np.random.default_rng(cfg.seed)
        proj_i = objective.Projection.init(i_f.size, args.d_out, rng)
        proj_r = objective.Projection.init(r_f.size, args.d_out, rng)
    if proj_i.d_in != i_f.size:
        raise InputError(f"image_features has length {i_f.size} but the image projection "
                         f"expects d_in={proj_i.d_in}")
    if proj_r.d_in != r_f.size:
        raise InputError(f"radiomic_features has length {r_f.size} but the radiomic projection "
                         f"expects d_in={proj_r.d_in}")
    report = objective.total_loss(probs, labels, i_f, r_f, proj_i, proj_r, cfg.p_norm, args.lam)
    _emit(files.dumps(report.to_dict()) + "\n", args.output)
    return 0


def cmd_gradcheck(args):
    dims = tuple(int(v) for v in args.dims.split(","))
    if len(dims) != 4:
        raise InputError("--dims needs four comma-separated extents B,C,H,W")
    if max(dims) > attn.MAX_GRADCHECK_EXTENT:
        raise InputError(f"refusing dims {dims}: at most {attn.MAX_GRADCHECK_EXTENT} per axis")
    seed = args.seed if args.seed is not None else 0
    report = attn.gradcheck(dims, seed=seed, k=args.k, eps=args.eps)
    report["tolerance"] = GRADCHECK_TOL
    report["passed"] = report["max"] < GRADCHECK_TOL
    _emit(files.dumps(report) + "\n", args.output)
    return 0 if report["passed"] else 1


def _common(run_flags=True):
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file with run settings (flags override it)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="worker processes (default: CPU count)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", "-o", help="output file (default: stdout)")
    p.add_argument("--format", dest="output_format", choices=("json", "csv"), default=None)
    if run_flags:
        p.add_argument("--thresholds", type=_parse_floats, default=None,
                       help="comma-separated heatmap thresholds (default 60,180)")
        p.add_argument("--connectivity", type=int, choices=(4, 8), default=None)
        p.add_argument("--min-area", dest="min_area", type=int, default=None)
        p.add_argument("--ng", type=int, default=None, help="gray levels (default 32)")
        p.add_argument("--delta", type=int, default=None)
        p.add_argument("--alpha", type=int, default=None)
        p.add_argument("--aggregation", choices=("mean", "per-angle"), default=None)
        p.add_argument("--strict", action="store_true", default=None,
                       help="exit nonzero if any entry fails")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="radiloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[_common()], help="radiomic features per entry/box")
    p.add_argument("manifest")
    p.add_argument("--root", help="base directory for manifest paths")
    p.add_argument("--pool", choices=("none", "mean"), default=None,
                   help="mean-pool box features per entry")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("maskgen", parents=[_common()], help="bounding boxes from heatmaps")
    p.add_argument("manifest")
    p.add_argument("--root")
    p.add_argument("--overlay", help="directory for overlay PNGs")
    p.set_defaults(func=cmd_maskgen)

    p = sub.add_parser("eval", parents=[_common(False)], help="localization accuracy sweep")
    p.add_argument("cases", help="JSON-lines case manifest")
    p.add_argument("--iou", help="comma-separated IoU thresholds (default 0.1..0.7)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("auc", parents=[_common(False)], help="per-class ROC AUC")
    p.add_argument("scores", help="JSON-lines score manifest")
    p.set_defaults(func=cmd_auc)

    p = sub.add_parser("loss", parents=[_common(False)], help="L_I, distance and L_II")
    p.add_argument("--features", required=True)
    p.add_argument("--probs", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--projections")
    p.add_argument("--p-norm", dest="p_norm", type=float, default=None)
    p.add_argument("--d-out", dest="d_out", type=int, default=32)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--num-classes", dest="num_classes", type=int, default=objective.NUM_CLASSES)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("gradcheck", parents=[_common(False)], help="triplet-attention gradient check")
    p.add_argument("--dims", default="1,2,4,4", help="B,C,H,W (each <= 8)")
    p.add_argument("--k", type=int, default=attn.DEFAULT_KERNEL)
    p.add_argument("--eps", type=float, default=1e-6)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RadilocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
