"""ROC AUC, box IoU, and IoU-threshold localization accuracy."""
import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, UndefinedMetricError
from .imgcore import BoundingBox

# ChestX-ray14 label order; the first eight carry ground-truth boxes
CLASS_NAMES = (
    "Atelectasis", "Cardiomegaly", "Effusion", "Infiltration", "Mass", "Nodule",
    "Pneumonia", "Pneumothorax", "Consolidation", "Edema", "Emphysema", "Fibrosis",
    "Pleural_Thickening", "Hernia",
)
LOCALIZATION_CLASSES = CLASS_NAMES[:8]
IOU_THRESHOLDS = tuple(round(0.1 * i, 1) for i in range(1, 8))


def class_index(c):
    """Accept an integer index or a class name (case-insensitive, spaces or underscores)."""
    if isinstance(c, bool):
        raise InputError(f"invalid class id {c!r}")
    if isinstance(c, (int, np.integer)):
        if not 0 <= c < len(CLASS_NAMES):
            raise InputError(f"class id {c} out of range 0..{len(CLASS_NAMES) - 1}")
        return int(c)
    if isinstance(c, str):
        key = c.strip().replace(" ", "_").lower()
        for i, name in enumerate(CLASS_NAMES):
            if name.lower() == key:
                return i
    raise InputError(f"unknown class {c!r}")


@dataclass(frozen=True)
class ScoredSample:
    score: float
    label: int
    class_id: int = 0
    image_id: str = ""

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise InputError(f"score must be finite, got {self.score}")
        if self.label not in (0, 1):
            raise InputError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class LocalizationCase:
    image_id: str
    class_id: int
    ground_truth: BoundingBox
    predictions: tuple = field(default_factory=tuple)


def _midranks(x):
    """1-based ranks with ties sharing their average rank."""
    _, inv, counts = np.unique(x, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    avg = ends - (counts - 1) / 2.0
    return avg[inv]


def auc_from_arrays(scores, labels):
    """Mann-Whitney AUC: P(s+ > s-) + 0.5 P(s+ == s-)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise InputError("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative sample")
    ranks = _midranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_auc(samples):
    samples = list(samples)
    return auc_from_arrays([s.score for s in samples], [s.label for s in samples])


def iou(a, b):
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = max(ix, 0) * max(iy, 0)
    return inter / (a.area + b.area - inter)


def case_correct(case, t_iou):
    return any(iou(p, case.ground_truth) >= t_iou for p in case.predictions)


def localization_accuracy(cases, t_iou, classes=LOCALIZATION_CLASSES):
    """Per-class fraction of cases with some prediction at IoU >= ``t_iou``.

    Classes without cases get ``None`` and are left out of the mean.
    """
    if not 0 < t_iou <= 1:
        raise InputError(f"IoU threshold must lie in (0, 1], got {t_iou}")
    wanted = {class_index(c): c for c in classes}
    hits = {c: 0 for c in wanted}
    totals = {c: 0 for c in wanted}
    for case in cases:
        if case.class_id in wanted:
            totals[case.class_id] += 1
            hits[case.class_id] += case_correct(case, t_iou)
    if not any(totals.values()):
        raise UndefinedMetricError("no cases for the evaluated classes")
    per_class = {CLASS_NAMES[c]: (hits[c] / totals[c] if totals[c] else None) for c in wanted}
    present = [v for v in per_class.values() if v is not None]
    return {"per_class": per_class, "mean": float(np.mean(present)), "counts":
            {CLASS_NAMES[c]: totals[c] for c in wanted}}


@dataclass
class SweepReport:
    thresholds: tuple
    classes: tuple
    rows: list  # one localization_accuracy result per threshold

    def table(self):
        return [[t] + [r["per_class"][c] for c in self.classes] + [r["mean"]]
                for t, r in zip(self.thresholds, self.rows)]

    def header(self):
        return ["T(IoU)", *self.classes, "Mean"]

    def to_csv(self, fmt=lambda v: format(v, ".17g")):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for row in self.table():
            w.writerow([f"{row[0]:.1f}"] + ["" if v is None else fmt(v) for v in row[1:]])
        return buf.getvalue()

    def to_dict(self):
        return {
            "columns": self.header(),
            "rows": [{"T(IoU)": t, **r["per_class"], "Mean": r["mean"]}
                     for t, r in zip(self.thresholds, self.rows)],
            "counts": self.rows[0]["counts"] if self.rows else {},
        }


def sweep_report(cases, thresholds=IOU_THRESHOLDS, classes=LOCALIZATION_CLASSES):
    thresholds = tuple(float(t) for t in thresholds)
    if list(thresholds) != sorted(thresholds):
        raise InputError("IoU thresholds must be sorted ascending")
    cases = list(cases)
    rows = [localization_accuracy(cases, t, classes) for t in thresholds]
    return SweepReport(thresholds, tuple(CLASS_NAMES[class_index(c)] for c in classes), rows)


def read_jsonl(path):
    """Yield ``(line_number, object)`` for every non-blank line."""
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield n, json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{n}: malformed JSON ({exc.msg})") from None


def parse_case(obj):
    try:
        gt = BoundingBox.parse(obj["gt"])
        preds = tuple(BoundingBox.parse(b) for b in obj.get("preds", []))
        return LocalizationCase(str(obj.get("image_id", "")), class_index(obj["class_id"]), gt, preds)
    except KeyError as exc:
        raise InputError(f"case is missing {exc}") from None
    except TypeError as exc:
        raise InputError(f"malformed case ({exc})") from None


def load_cases(path):
    cases = []
    for n, obj in read_jsonl(path):
        try:
            cases.append(parse_case(obj))
        except InputError as exc:
            raise InputError(f"{path}:{n}: {exc}") from None
    if not cases:
        raise InputError(f"{path}: no cases")
    return cases


def load_scores(path):
    samples = []
    for n, obj in read_jsonl(path):
        try:
            samples.append(ScoredSample(float(obj["score"]), int(obj["label"]),
                                        class_index(obj.get("class_id", 0)),
                                        str(obj.get("image_id", ""))))
        except KeyError as exc:
            raise InputError(f"{path}:{n}: sample is missing {exc}") from None
        except (TypeError, ValueError) as exc:
            raise InputError(f"{path}:{n}: {exc}") from None
    if not samples:
        raise InputError(f"{path}: no samples")
    return samples


def auc_by_class(samples):
    """Per-class AUC plus unweighted mean; classes lacking a positive or negative are skipped."""
    by_class = {}
    for s in samples:
        by_class.setdefault(s.class_id, []).append(s)
    aucs, skipped = {}, []
    for c in sorted(by_class):
        try:
            aucs[CLASS_NAMES[c]] = roc_auc(by_class[c])
        except UndefinedMetricError:
            skipped.append(CLASS_NAMES[c])
    mean = float(np.mean(list(aucs.values()))) if aucs else None
    return {"per_class": aucs, "mean": mean, "skipped": skipped}
