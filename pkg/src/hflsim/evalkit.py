"""Segmentation-style metrics from confusion matrices and report emission."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import HflError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are ground truth, columns are predictions."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise HflError(f"confusion matrix must be square, got shape {c.shape}")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(np.equal(np.mod(c, 1), 0)):
                raise HflError("confusion matrix counts must be integers")
            c = c.astype(np.int64)
        if np.any(c < 0):
            raise HflError("confusion matrix counts must be non-negative")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @classmethod
    def empty(cls, classes: int) -> "ConfusionMatrix":
        return cls(np.zeros((classes, classes), dtype=np.int64))

    @property
    def classes(self) -> int:
        return self.counts.shape[0]

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.classes != self.classes:
            raise HflError("cannot merge confusion matrices of different sizes")
        return ConfusionMatrix(self.counts + other.counts)


def accumulate(cm: ConfusionMatrix, truth, pred) -> ConfusionMatrix:
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    p = np.asarray(pred, dtype=np.int64).reshape(-1)
    if t.shape != p.shape:
        raise HflError(f"truth and prediction lengths differ: {t.size} vs {p.size}")
    k = cm.classes
    bad = (t < 0) | (t >= k) | (p < 0) | (p >= k)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise HflError(f"label out of range [0, {k}) at position {i}: truth={t[i]}, pred={p[i]}")
    inc = np.bincount(t * k + p, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(cm.counts + inc)


@dataclass(frozen=True)
class MetricsReport:
    miou: float
    mprecision: float
    mrecall: float
    mf1: float
    iou: tuple
    precision: tuple
    recall: tuple
    f1: tuple
    present: tuple

    def to_dict(self) -> dict:
        return {
            "miou": self.miou, "mprecision": self.mprecision,
            "mrecall": self.mrecall, "mf1": self.mf1,
            "per_class": [
                {"class": c, "present": self.present[c], "iou": self.iou[c],
                 "precision": self.precision[c], "recall": self.recall[c], "f1": self.f1[c]}
                for c in range(len(self.iou))
            ],
        }


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(num.shape, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class IoU / precision / recall / F1 and their macro means.

    Classes with an empty row and column are left out of the means; a zero
    precision or recall denominator contributes 0.
    """
    c = cm.counts
    if c.sum() == 0:
        raise HflError("metrics need at least one count")
    tp = np.diag(c).astype(np.float64)
    fp = c.sum(axis=0) - tp
    fn = c.sum(axis=1) - tp
    present = (c.sum(axis=0) + c.sum(axis=1)) > 0
    iou = _ratio(tp, tp + fp + fn)
    prec = _ratio(tp, tp + fp)
    rec = _ratio(tp, tp + fn)
    f1 = _ratio(2 * prec * rec, prec + rec)

    def mean(v):
        return float(np.mean(v[present]))

    return MetricsReport(
        miou=mean(iou), mprecision=mean(prec), mrecall=mean(rec), mf1=mean(f1),
        iou=tuple(map(float, iou)), precision=tuple(map(float, prec)),
        recall=tuple(map(float, rec)), f1=tuple(map(float, f1)),
        present=tuple(map(bool, present)),
    )


def load_confusion_text(text: str) -> ConfusionMatrix:
    """Parse a whitespace-separated C x C grid of non-negative integers."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([int(tok) for tok in line.replace(",", " ").split()])
        except ValueError:
            raise HflError(f"line {lineno}: non-integer entry in confusion grid") from None
    if not rows:
        raise HflError("confusion grid is empty")
    k = len(rows)
    for i, r in enumerate(rows, 1):
        if len(r) != k:
            raise HflError(f"row {i} has {len(r)} entries, expected {k} (grid must be square)")
    return ConfusionMatrix(np.array(rows, dtype=np.int64))


# ---------------------------------------------------------------------------
# reports


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=False, default=_json_default, allow_nan=False)


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise HflError(f"cannot write {path}: {exc.strerror}") from exc


def emit_reports(reports: Iterable, out_dir: str, fields: Sequence[str],
                 header: Optional[dict] = None, stem: str = "rounds") -> tuple[str, str]:
    """Write ``<stem>.csv`` and ``<stem>.jsonl`` with a fixed column order.

    ``header``, when given, becomes the first JSON-lines record (under a
    ``"config"`` key) so a run can be reproduced from the report alone.
    """
    rows = [r.to_dict() if hasattr(r, "to_dict") else dict(r) for r in reports]
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise HflError(f"cannot create {out_dir}: {exc.strerror}") from exc

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_cell(r.get(f)) for f in fields])
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    _write(csv_path, buf.getvalue())

    lines = []
    if header is not None:
        lines.append(dumps({"config": header}))
    lines += [dumps({f: r.get(f) for f in fields}) for r in rows]
    jsonl_path = os.path.join(out_dir, f"{stem}.jsonl")
    _write(jsonl_path, "".join(line + "\n" for line in lines))
    return csv_path, jsonl_path
