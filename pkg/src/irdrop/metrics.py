"""Contest scoring: MAE, hotspot F1 and worst-case errors.

The array-level functions are unit-agnostic (output unit = input unit).
``evaluate`` takes maps in volts and reports millivolts.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import IrdropError, ShapeError
from .grid import FeatureMap

HOTSPOT_FRACTION = 0.9
MV_PER_V = 1000.0


def _pair(pred, truth):
    p = np.asarray(pred.data if isinstance(pred, FeatureMap) else pred, dtype=np.float64)
    t = np.asarray(truth.data if isinstance(truth, FeatureMap) else truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} != ground truth shape {t.shape}")
    return p, t


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(t - p)))


@dataclass
class F1Result:
    f1: float
    precision: float
    recall: float
    threshold: float
    tp: int
    fp: int
    fn: int
    tn: int


def f1_worst_case(pred, truth) -> F1Result:
    """Hotspot F1 where positives exceed 90% of the ground-truth maximum.

    The same threshold labels both maps.  With no true positives, precision,
    recall and F1 are all 0.
    """
    p, t = _pair(pred, truth)
    peak = float(t.max())
    if not peak > 0:
        raise IrdropError(f"degenerate ground truth: maximum IR drop is {peak}")
    thr = HOTSPOT_FRACTION * peak
    lt, lp = t > thr, p > thr
    tp = int(np.sum(lt & lp))
    fp = int(np.sum(~lt & lp))
    fn = int(np.sum(lt & ~lp))
    tn = int(np.sum(~lt & ~lp))
    if tp == 0:
        return F1Result(0.0, 0.0, 0.0, thr, tp, fp, fn, tn)
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall)
    return F1Result(f1, precision, recall, thr, tp, fp, fn, tn)


def worst_case_errors(pred, truth) -> tuple[float, float, float]:
    """(worst-case drop, error at the worst-case cell, largest error anywhere)."""
    p, t = _pair(pred, truth)
    err = np.abs(t - p)
    k = int(np.argmax(t))  # first maximum in row-major order
    return float(t.flat[k]), float(err.flat[k]), float(err.max())


@dataclass
class EvalReport:
    mae: float
    f1: float
    precision: float
    recall: float
    threshold: float
    w_ir: float
    w_ir_error: float
    max_ir_error: float
    tp: int
    fp: int
    fn: int
    tn: int
    unit: str = "mV"

    @property
    def w_ir_error_pct(self) -> float:
        """Worst-case error relative to the worst-case drop, in percent."""
        return 100.0 * self.w_ir_error / self.w_ir

    def to_dict(self) -> dict:
        d = asdict(self)
        d["w_ir_error_pct"] = self.w_ir_error_pct
        return d


def _to_mv(m) -> np.ndarray:
    if isinstance(m, FeatureMap):
        if m.unit != "V":
            raise IrdropError(f"expected an IR drop map in V, got unit {m.unit!r}")
        return m.data * MV_PER_V
    return np.asarray(m, dtype=np.float64) * MV_PER_V


def evaluate(pred, truth) -> EvalReport:
    """All metrics for maps in volts, reported in millivolts."""
    p, t = _pair(_to_mv(pred), _to_mv(truth))
    f = f1_worst_case(p, t)
    w_ir, w_err, max_err = worst_case_errors(p, t)
    return EvalReport(
        mae=mae(p, t), f1=f.f1, precision=f.precision, recall=f.recall,
        threshold=f.threshold, w_ir=w_ir, w_ir_error=w_err, max_ir_error=max_err,
        tp=f.tp, fp=f.fp, fn=f.fn, tn=f.tn,
    )


def format_pct(err: float, w_ir: float) -> str:
    """Table-style rendering, e.g. ``0.038 ( 0.89%)``."""
    return f"{err:.3f} ({100.0 * err / w_ir:5.2f}%)"
