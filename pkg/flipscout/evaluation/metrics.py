"""Scoring of flip predictions: confusion counts, ROC/AUC, accuracy and KL divergence.

A flip is predicted positive when its probability is strictly larger than the
detection level α, except at α = 0 where every event is predicted positive so
that the ROC curve always reaches (1, 1).
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy.special import rel_entr
from sklearn.metrics import auc, confusion_matrix

from flipscout.exceptions import (
    DataValidationError,
    DegenerateRunError,
    ShapeError,
    SupportError,
)

logger = logging.getLogger(__name__)

# Points of the fixed grids used to average curves over folds
GRID_POINTS = 101


@dataclass
class PredictionRun:
    """Per-event flip predictions: one record per (entity, bin)."""

    entity: np.ndarray
    time: np.ndarray
    probability: np.ndarray
    actual: np.ndarray
    model: str = "pairwise"
    entities: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.entity = np.asarray(self.entity, dtype=int)
        self.time = np.asarray(self.time, dtype=int)
        self.probability = np.asarray(self.probability, dtype=float)
        self.actual = np.asarray(self.actual, dtype=np.int8)
        size = self.probability.shape
        if not (self.entity.shape == self.time.shape == self.actual.shape == size):
            raise ShapeError("prediction run columns must have equal lengths")
        if np.any((self.probability < 0) | (self.probability > 1)) or np.isnan(
            self.probability
        ).any():
            raise DataValidationError("flip probabilities must lie in [0, 1]")
        if not np.isin(self.actual, (0, 1)).all():
            raise DataValidationError("actual flips must be 0 or 1")

    def __len__(self) -> int:
        return self.probability.size

    @classmethod
    def concat(cls, runs: list["PredictionRun"]) -> "PredictionRun":
        """Pool several runs of the same model over the same entities."""
        if not runs:
            raise ShapeError("cannot pool an empty list of runs")
        return cls(
            entity=np.concatenate([r.entity for r in runs]),
            time=np.concatenate([r.time for r in runs]),
            probability=np.concatenate([r.probability for r in runs]),
            actual=np.concatenate([r.actual for r in runs]),
            model=runs[0].model,
            entities=list(runs[0].entities),
        )

    def for_entity(self, i: int) -> "PredictionRun":
        keep = self.entity == i
        return PredictionRun(
            entity=self.entity[keep],
            time=self.time[keep],
            probability=self.probability[keep],
            actual=self.actual[keep],
            model=self.model,
            entities=list(self.entities),
        )

    def to_frame(self) -> pd.DataFrame:
        """One row per event, with entity names when known."""
        names = (
            [self.entities[i] for i in self.entity] if self.entities else self.entity.tolist()
        )
        return pd.DataFrame(
            {
                "entity": names,
                "time": self.time,
                "probability": self.probability,
                "actual": self.actual,
                "model": self.model,
            }
        )


class Confusion(NamedTuple):
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / max(self.tp + self.fp + self.tn + self.fn, 1)


@dataclass
class RocResult:
    """Exact ROC curve over every distinct predicted probability."""

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float
    accuracy: np.ndarray
    n_events: int
    n_flips: int

    @property
    def accuracy_curve(self) -> list[tuple[float, float]]:
        return list(zip(self.thresholds.tolist(), self.accuracy.tolist()))

    @property
    def max_accuracy(self) -> float:
        return float(self.accuracy.max())

    @property
    def best_alpha(self) -> float:
        """Detection level of the maximum accuracy (the largest α on ties)."""
        return float(self.thresholds[int(np.argmax(self.accuracy))])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"alpha": self.thresholds, "fpr": self.fpr, "tpr": self.tpr, "accuracy": self.accuracy}
        )


def _check_alpha(alpha: float):
    if not 0.0 <= alpha <= 1.0:
        raise DataValidationError(f"detection level must lie in [0, 1] (got {alpha})")


def predicted_positive(probability: np.ndarray, alpha: float) -> np.ndarray:
    """Boolean predictions at detection level α."""
    if alpha == 0.0:
        return np.ones(probability.shape, dtype=bool)
    return probability > alpha


def _positive_counts(sorted_scores: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    above = sorted_scores.size - np.searchsorted(sorted_scores, alphas, side="right")
    return np.where(alphas == 0.0, sorted_scores.size, above)


def _rates(run: PredictionRun, alphas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flips = np.sort(run.probability[run.actual == 1])
    stays = np.sort(run.probability[run.actual == 0])
    return _positive_counts(flips, alphas), _positive_counts(stays, alphas)


def confusion_at(run: PredictionRun, alpha: float) -> Confusion:
    """Confusion counts at detection level α.

    Args:
        run: Scored prediction run
        alpha: Detection level in [0, 1]

    Returns:
        Confusion(tp, fp, tn, fn) partitioning every event
    """
    _check_alpha(alpha)
    predicted = predicted_positive(run.probability, alpha).astype(np.int8)
    tn, fp, fn, tp = confusion_matrix(run.actual, predicted, labels=[0, 1]).ravel()
    return Confusion(tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn))


def accuracy_at(run: PredictionRun, alpha: float) -> float:
    """Fraction of events classified correctly at detection level α."""
    return confusion_at(run, alpha).accuracy


def accuracy_curve(run: PredictionRun, alphas: np.ndarray) -> np.ndarray:
    """Accuracy at each requested detection level."""
    alphas = np.asarray(alphas, dtype=float)
    tp, fp = _rates(run, alphas)
    negatives = len(run) - int(run.actual.sum())
    return (tp + negatives - fp) / max(len(run), 1)


def roc(run: PredictionRun) -> RocResult:
    """ROC curve, AUC and accuracy curve over all distinct probabilities plus {0, 1}.

    Args:
        run: Prediction run holding at least one flip and one non-flip

    Returns:
        RocResult with thresholds in descending order
    """
    positives = int(run.actual.sum())
    negatives = len(run) - positives
    if positives == 0 or negatives == 0:
        raise DegenerateRunError(
            f"ROC needs both outcome classes (got {positives} flips, {negatives} non-flips)"
        )

    levels = [run.probability, [0.0, 1.0]]
    if np.any(run.probability == 0.0):
        # α = 0 counts every event, so p > 0 needs its own point
        levels.append([np.nextafter(0.0, 1.0)])
    thresholds = np.unique(np.concatenate(levels))[::-1]
    tp, fp = _rates(run, thresholds)
    tpr = tp / positives
    fpr = fp / negatives
    accuracy = (tp + negatives - fp) / len(run)
    return RocResult(
        thresholds=thresholds,
        tpr=tpr,
        fpr=fpr,
        auc=float(auc(fpr, tpr)),
        accuracy=accuracy,
        n_events=len(run),
        n_flips=positives,
    )


def alpha_grid() -> np.ndarray:
    return np.linspace(0.0, 1.0, GRID_POINTS)


def tpr_on_grid(result: RocResult, fpr_grid: Optional[np.ndarray] = None) -> np.ndarray:
    """True-positive rate interpolated at fixed false-positive rates.

    At a vertical step of the curve the highest true-positive rate is used.
    """
    fpr_grid = alpha_grid() if fpr_grid is None else fpr_grid
    last_of_run = np.r_[result.fpr[1:] != result.fpr[:-1], True]
    return np.interp(fpr_grid, result.fpr[last_of_run], result.tpr[last_of_run])


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Σ p log(p/q) in nats.

    Args:
        p: Reference distribution
        q: Model distribution, positive wherever p is

    Returns:
        Non-negative divergence
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ShapeError(f"distributions have shapes {p.shape} and {q.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise DataValidationError("distributions must be non-negative")
    if np.any((q == 0) & (p > 0)):
        raise SupportError("model assigns zero mass where the reference has mass")
    return float(max(rel_entr(p, q).sum(), 0.0))


def smooth_support(
    p: np.ndarray, q: np.ndarray, epsilon: float
) -> tuple[np.ndarray, bool]:
    """Give mass ε to q wherever p > 0 = q, then renormalize; reports whether it applied."""
    q = np.asarray(q, dtype=float)
    empty = (q == 0) & (np.asarray(p) > 0)
    if not empty.any():
        return q, False
    smoothed = np.where(empty, epsilon, q)
    return smoothed / smoothed.sum(), True


@dataclass
class DailyAccuracy:
    """Distribution over bins of the fraction of entities classified correctly."""

    alpha: float
    times: np.ndarray
    per_bin: np.ndarray
    values: np.ndarray
    counts: np.ndarray

    @property
    def zero_bins(self) -> int:
        return int((self.per_bin == 0).sum())


def daily_accuracy_distribution(
    run: PredictionRun, alpha: Optional[float] = None
) -> DailyAccuracy:
    """Histogram of per-bin accuracy averaged over entities.

    Args:
        run: Prediction run covering at least one bin
        alpha: Detection level; defaults to the argmax of the run's own accuracy curve

    Returns:
        DailyAccuracy whose histogram counts sum to the number of bins
    """
    if len(run) == 0:
        raise DataValidationError("prediction run is empty")
    if alpha is None:
        alpha = roc(run).best_alpha
    _check_alpha(alpha)

    frame = pd.DataFrame(
        {
            "time": run.time,
            "correct": predicted_positive(run.probability, alpha) == (run.actual == 1),
        }
    )
    per_bin = frame.groupby("time")["correct"].mean()
    values, counts = np.unique(per_bin.to_numpy(), return_counts=True)
    logger.debug(f"Per-bin accuracy at alpha={alpha:.4f}: {int((per_bin == 0).sum())} zero bins")
    return DailyAccuracy(
        alpha=float(alpha),
        times=per_bin.index.to_numpy(),
        per_bin=per_bin.to_numpy(),
        values=values,
        counts=counts,
    )
