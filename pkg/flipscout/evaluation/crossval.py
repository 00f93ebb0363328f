"""Out-of-sample prediction: fold plans, cross-validation and block studies."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Literal, Optional

import numpy as np
import pandas as pd

from flipscout.config import DEFAULT_ALPHA, DEFAULT_FOLDS
from flipscout.exceptions import (
    CapacityError,
    DegenerateRunError,
    FitDivergenceError,
    InsufficientDataError,
    ShapeError,
)
from flipscout.evaluation.metrics import (
    PredictionRun,
    RocResult,
    accuracy_at,
    accuracy_curve,
    alpha_grid,
    roc,
    tpr_on_grid,
)
from flipscout.infer.base import FitConfig, FitReport
from flipscout.infer.baselines import fit_independent, homogenize
from flipscout.infer.pseudolikelihood import fit_rpml
from flipscout.ingest import SignPanel
from flipscout.model import CouplingSet

logger = logging.getLogger(__name__)

ModelKind = Literal["pairwise", "independent", "homogeneous", "history_only"]
MODEL_KINDS = ("pairwise", "independent", "homogeneous", "history_only")

# Largest N for which every subset of a given size is scored
SUBSET_ENUMERATION_CAP = 12


def first_usable_bin(lags: int) -> int:
    """A flip at t needs s_{t−1}, and the historical model needs L past states."""
    return max(lags, 1)


def predict_bins(
    panel: SignPanel, params: CouplingSet, times: np.ndarray, model: str = "pairwise"
) -> PredictionRun:
    """Flip probabilities for every entity at the given bins, from observed context."""
    if params.n != panel.n:
        raise ShapeError(f"panel has {panel.n} entities, parameters have {params.n}")
    times = np.asarray(times, dtype=int)
    start = first_usable_bin(params.l)
    if times.size and (times.min() < start or times.max() >= panel.t):
        raise ShapeError(f"prediction bins must lie in [{start}, {panel.t}) for L={params.l}")

    signs = panel.signs.astype(float)
    fields = params.J @ signs[:, times] + params.h[:, None]
    for tau, k in enumerate(params.lags, start=1):
        fields = fields + k @ signs[:, times - tau]
    previous = signs[:, times - 1]
    probability = 0.5 * (1.0 - previous * np.tanh(fields))
    actual = signs[:, times] != previous

    entity, time = np.meshgrid(np.arange(panel.n), times, indexing="ij")
    return PredictionRun(
        entity=entity.ravel(),
        time=time.ravel(),
        probability=probability.ravel(),
        actual=actual.ravel(),
        model=model,
        entities=list(panel.entities),
    )


def predict_panel(
    panel: SignPanel, params: CouplingSet, start: int, stop: int, model: str = "pairwise"
) -> PredictionRun:
    """Score every entity over the bins [start, stop).

    Args:
        panel: Observed ±1 orientations
        params: Memoryless or historical coupling set
        start: First predicted bin (at least max(L, 1))
        stop: One past the last predicted bin
        model: Label stored with the run

    Returns:
        PredictionRun with the flip probability and actual outcome of each event
    """
    if not 0 <= start <= stop <= panel.t:
        raise ShapeError(f"range [{start}, {stop}) lies outside the panel's {panel.t} bins")
    return predict_bins(panel, params, np.arange(start, stop), model=model)


@dataclass
class FoldPlan:
    """Partition of the usable bins into k test folds."""

    k: int
    folds: list[np.ndarray]
    lags: int = 0
    shuffle: bool = False
    seed: int = 0

    @classmethod
    def build(
        cls, t: int, lags: int = 0, k: int = DEFAULT_FOLDS, shuffle: bool = False, seed: int = 0
    ) -> "FoldPlan":
        """Split [max(L,1), T) into k folds whose sizes differ by at most one.

        Folds are contiguous blocks in time unless shuffle is set, in which
        case bins are assigned by a seeded permutation.
        """
        usable = np.arange(first_usable_bin(lags), t)
        if k < 2:
            raise ShapeError(f"cross-validation needs at least 2 folds (got {k})")
        if usable.size < k:
            raise InsufficientDataError(f"{usable.size} usable bins cannot form {k} folds")
        if shuffle:
            rng = np.random.Generator(np.random.PCG64(seed))
            usable = rng.permutation(usable)
        folds = [np.sort(part) for part in np.array_split(usable, k)]
        return cls(k=k, folds=folds, lags=lags, shuffle=shuffle, seed=seed)

    @property
    def usable(self) -> np.ndarray:
        return np.sort(np.concatenate(self.folds))

    def test_bins(self, fold: int) -> np.ndarray:
        return self.folds[fold]

    def train_bins(self, fold: int) -> np.ndarray:
        """Usable bins outside the fold whose window [t−L, t] avoids the fold."""
        test = self.folds[fold]
        usable = self.usable
        blocked = np.zeros(usable.max() + 1, dtype=bool)
        blocked[test] = True
        clean = np.ones(usable.size, dtype=bool)
        for tau in range(self.lags + 1):
            clean &= ~blocked[usable - tau]
        return usable[clean]

    def boundaries(self) -> list[tuple[int, int]]:
        """(first, last + 1) of each fold; exact ranges only for contiguous plans."""
        return [(int(f[0]), int(f[-1]) + 1) for f in self.folds]


def fit_model(
    panel: SignPanel,
    kind: ModelKind = "pairwise",
    lags: int = 0,
    config: Optional[FitConfig] = None,
    times: Optional[np.ndarray] = None,
) -> tuple[CouplingSet, Optional[FitReport]]:
    """Fit one of the compared model variants on the given training bins.

    Returns:
        The parameters and, for rPML-based variants, the fit report
    """
    if kind not in MODEL_KINDS:
        raise ShapeError(f"unknown model kind '{kind}'")
    if kind == "independent":
        columns = np.arange(panel.t) if times is None else np.asarray(times, dtype=int)
        training = SignPanel(
            entities=list(panel.entities),
            timestamps=[panel.timestamps[t] for t in columns],
            signs=panel.signs[:, columns],
        )
        return fit_independent(training), None
    if kind == "homogeneous":
        if lags:
            raise ShapeError("the homogeneous model is memoryless; use lags=0")
        report = fit_rpml(panel, 0, config, times=times)
        return homogenize(report.params), report
    if kind == "history_only":
        if lags < 1:
            raise ShapeError("the history-only model needs at least one lag")
        report = fit_rpml(panel, lags, config, times=times, freeze_couplings=True)
        return report.params, report
    report = fit_rpml(panel, lags, config, times=times)
    return report.params, report


@dataclass
class FoldResult:
    fold: int
    training_bins: int
    test_bins: int
    roc: RocResult
    converged: Optional[bool]


@dataclass
class CvResult:
    """Per-fold scores of one model variant plus fold-averaged aggregates."""

    kind: str
    lags: int
    folds: list[FoldResult]
    run: PredictionRun
    fpr_grid: np.ndarray
    mean_tpr: np.ndarray
    alpha_grid: np.ndarray
    mean_accuracy_curve: np.ndarray
    entity_first_accuracy_curve: np.ndarray
    per_entity: pd.DataFrame = field(default_factory=pd.DataFrame)

    @property
    def aucs(self) -> np.ndarray:
        return np.array([f.roc.auc for f in self.folds])

    @property
    def mean_auc(self) -> float:
        return float(self.aucs.mean())

    @property
    def auc_std(self) -> float:
        return float(self.aucs.std())

    @property
    def mean_max_accuracy(self) -> float:
        """Mean over folds of each fold's own maximum accuracy."""
        return float(np.mean([f.roc.max_accuracy for f in self.folds]))

    @property
    def max_mean_accuracy(self) -> float:
        """Maximum of the fold-averaged accuracy curve."""
        return float(self.mean_accuracy_curve.max())

    @property
    def max_entity_first_accuracy(self) -> float:
        """Maximum of the curve averaged over entities within folds, then over folds."""
        return float(self.entity_first_accuracy_curve.max())

    def fold_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "fold": f.fold,
                    "training_bins": f.training_bins,
                    "test_bins": f.test_bins,
                    "auc": f.roc.auc,
                    "max_accuracy": f.roc.max_accuracy,
                    "best_alpha": f.roc.best_alpha,
                    "converged": f.converged,
                }
                for f in self.folds
            ]
        )


def _per_entity_scores(run: PredictionRun, n: int) -> pd.DataFrame:
    rows = []
    for i in range(n):
        entity_run = run.for_entity(i)
        try:
            result = roc(entity_run)
            auc_value, best = result.auc, result.max_accuracy
        except DegenerateRunError:
            auc_value, best = np.nan, np.nan
        rows.append(
            {
                "entity": run.entities[i] if run.entities else i,
                "auc": auc_value,
                "max_accuracy": best,
                "flips": int(entity_run.actual.sum()),
            }
        )
    return pd.DataFrame(rows)


def cross_validate(
    panel: SignPanel,
    lags: int = 0,
    config: Optional[FitConfig] = None,
    folds: Optional[FoldPlan] = None,
    kind: ModelKind = "pairwise",
    threads: int = 1,
) -> CvResult:
    """Fit on each fold's complement, predict the fold and score it.

    Args:
        panel: ±1 orientations
        lags: Number of lagged couplings of the fitted model
        config: Fit configuration
        folds: Fold plan (ten contiguous folds over [max(L,1), T) by default)
        kind: Model variant
        threads: Folds scored in parallel

    Returns:
        CvResult with per-fold ROC results and fold-averaged curves
    """
    plan = folds or FoldPlan.build(panel.t, lags)
    if plan.lags != lags:
        raise ShapeError(f"fold plan was built for L={plan.lags}, model has L={lags}")

    def score_fold(f: int) -> tuple[FoldResult, PredictionRun]:
        train = plan.train_bins(f)
        test = plan.test_bins(f)
        if np.intersect1d(train, test).size:
            raise ShapeError(f"fold {f}: training and test bins overlap")
        try:
            params, report = fit_model(panel, kind, lags, config, times=train)
        except FitDivergenceError as e:
            raise FitDivergenceError(
                f"fold {f}: {e}", iteration=e.iteration, fold=f
            ) from e
        run = predict_bins(panel, params, test, model=kind)
        result = roc(run)
        logger.info(
            f"Fold {f}: AUC {result.auc:.3f}, max accuracy {result.max_accuracy:.3f} "
            f"({train.size} training bins, {test.size} test bins)"
        )
        return (
            FoldResult(
                fold=f,
                training_bins=int(train.size),
                test_bins=int(test.size),
                roc=result,
                converged=None if report is None else report.converged,
            ),
            run,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scored = list(pool.map(score_fold, range(plan.k)))
    else:
        scored = [score_fold(f) for f in range(plan.k)]

    fold_results = [s[0] for s in scored]
    runs = [s[1] for s in scored]
    grid = alpha_grid()
    mean_tpr = np.mean([tpr_on_grid(r.roc, grid) for r in fold_results], axis=0)
    mean_accuracy = np.mean([accuracy_curve(run, grid) for run in runs], axis=0)
    entity_first = np.mean(
        [
            np.mean([accuracy_curve(run.for_entity(i), grid) for i in range(panel.n)], axis=0)
            for run in runs
        ],
        axis=0,
    )
    pooled = PredictionRun.concat(runs)

    result = CvResult(
        kind=kind,
        lags=lags,
        folds=fold_results,
        run=pooled,
        fpr_grid=grid,
        mean_tpr=mean_tpr,
        alpha_grid=grid,
        mean_accuracy_curve=mean_accuracy,
        entity_first_accuracy_curve=entity_first,
        per_entity=_per_entity_scores(pooled, panel.n),
    )
    logger.info(
        f"{kind} (L={lags}) over {plan.k} folds: AUC {result.mean_auc:.3f} ± {result.auc_std:.3f}, "
        f"max mean accuracy {result.max_mean_accuracy:.3f}"
    )
    return result


@dataclass
class SubsetStudy:
    """Cross-validated accuracy when only k entities are visible."""

    summary: pd.DataFrame
    scores: pd.DataFrame
    seed: Optional[int] = None


def accuracy_vs_subset_size(
    panel: SignPanel,
    k_values: list[int],
    config: Optional[FitConfig] = None,
    n_folds: int = DEFAULT_FOLDS,
    max_subsets: Optional[int] = None,
    seed: int = 0,
    threads: int = 1,
) -> SubsetStudy:
    """Mean and standard deviation of the cross-validated accuracy over subsets of size k.

    Args:
        panel: ±1 orientations
        k_values: Subset sizes to study
        config: Fit configuration
        n_folds: Folds per cross-validation
        max_subsets: If set, score at most this many subsets per k, drawn with `seed`
        seed: Seed of the subset draw
        threads: Subsets scored in parallel

    Returns:
        SubsetStudy with one summary row per k and one score row per subset
    """
    if panel.n > SUBSET_ENUMERATION_CAP and max_subsets is None:
        raise CapacityError(
            f"N={panel.n} exceeds {SUBSET_ENUMERATION_CAP}; pass max_subsets to subsample"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    plan = FoldPlan.build(panel.t, 0, n_folds)

    jobs = []
    for k in k_values:
        if not 1 <= k <= panel.n:
            raise ShapeError(f"subset size {k} outside [1, {panel.n}]")
        if max_subsets is not None and comb(panel.n, k) > max_subsets:
            chosen = set()
            while len(chosen) < max_subsets:
                chosen.add(tuple(sorted(rng.choice(panel.n, size=k, replace=False).tolist())))
            subsets = sorted(chosen)
        else:
            subsets = list(combinations(range(panel.n), k))
        jobs.extend((k, subset) for subset in subsets)

    def score(job: tuple[int, tuple[int, ...]]) -> dict:
        k, subset = job
        result = cross_validate(panel.select(list(subset)), 0, config, plan)
        return {
            "k": k,
            "subset": " ".join(panel.entities[i] for i in subset),
            "accuracy": result.max_mean_accuracy,
            "auc": result.mean_auc,
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(score, jobs))
    else:
        rows = [score(job) for job in jobs]

    scores = pd.DataFrame(rows)
    summary = (
        scores.groupby("k")
        .agg(
            subsets=("accuracy", "size"),
            accuracy_mean=("accuracy", "mean"),
            accuracy_std=("accuracy", lambda a: float(np.std(a))),
            auc_mean=("auc", "mean"),
        )
        .reset_index()
    )
    return SubsetStudy(
        summary=summary, scores=scores, seed=seed if max_subsets is not None else None
    )


def _fit_learning_block(
    panel: SignPanel, learning_length: int, lags: int, config: Optional[FitConfig]
) -> CouplingSet:
    if learning_length <= lags or learning_length > panel.t:
        raise InsufficientDataError(
            f"learning block of {learning_length} bins is unusable for L={lags}, T={panel.t}"
        )
    report = fit_rpml(panel, lags, config, times=np.arange(lags, learning_length))
    return report.params


@dataclass
class LengthStudy:
    frame: pd.DataFrame
    alpha: float


def accuracy_vs_test_length(
    panel: SignPanel,
    learning_length: int,
    lengths: list[int],
    config: Optional[FitConfig] = None,
    lags: int = 0,
    alpha: float = DEFAULT_ALPHA,
    n_blocks: int = 1,
) -> LengthStudy:
    """Accuracy on testing blocks of increasing length after a single learning block.

    Testing starts right after the learning block. With n_blocks > 1 the test
    region is cut into disjoint blocks of the largest length, and each length
    is measured on the prefix of every block.

    Returns:
        LengthStudy with mean and standard deviation of accuracy per length
    """
    if not lengths or min(lengths) < 1:
        raise ShapeError("testing lengths must be positive")
    longest = max(lengths)
    if learning_length + n_blocks * longest > panel.t:
        raise InsufficientDataError(
            f"learning {learning_length} + {n_blocks} x {longest} test bins exceeds T={panel.t}"
        )
    params = _fit_learning_block(panel, learning_length, lags, config)

    rows = []
    for length in lengths:
        scores = []
        for b in range(n_blocks):
            start = learning_length + b * longest
            run = predict_panel(panel, params, start, start + length)
            scores.append(accuracy_at(run, alpha))
        rows.append(
            {
                "length": length,
                "accuracy_mean": float(np.mean(scores)),
                "accuracy_std": float(np.std(scores)),
                "blocks": n_blocks,
            }
        )
    return LengthStudy(frame=pd.DataFrame(rows), alpha=alpha)


@dataclass
class BlockStudy:
    frame: pd.DataFrame
    alpha: float
    statistical_error: float

    @property
    def spread(self) -> float:
        """Standard deviation of block accuracies, to compare with `statistical_error`."""
        return float(self.frame["accuracy"].std(ddof=0))


def accuracy_vs_block_distance(
    panel: SignPanel,
    learning_length: int,
    block_length: int,
    config: Optional[FitConfig] = None,
    lags: int = 0,
    alpha: float = DEFAULT_ALPHA,
) -> BlockStudy:
    """Accuracy on successive disjoint blocks farther and farther from the learning block.

    Returns:
        BlockStudy with one row per block and the 1/√(block length) yardstick
    """
    if block_length < 1:
        raise ShapeError("block length must be positive")
    n_blocks = (panel.t - learning_length) // block_length
    if n_blocks < 1:
        raise InsufficientDataError(
            f"no full block of {block_length} bins after a learning block of {learning_length}"
        )
    params = _fit_learning_block(panel, learning_length, lags, config)

    rows = []
    for b in range(n_blocks):
        start = learning_length + b * block_length
        run = predict_panel(panel, params, start, start + block_length)
        rows.append(
            {
                "block": b,
                "start": start,
                "stop": start + block_length,
                "accuracy": accuracy_at(run, alpha),
            }
        )
    return BlockStudy(
        frame=pd.DataFrame(rows), alpha=alpha, statistical_error=1.0 / np.sqrt(block_length)
    )
