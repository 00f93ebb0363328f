"""Command-line interface for Flip Scout using argparse."""

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from rich.console import Console
from rich.table import Table

from flipscout import __version__
from flipscout.config import DEFAULT_FOLDS, ENUMERATION_CAP, SCHEMA_VERSION, get_settings
from flipscout.evaluation.crossval import (
    MODEL_KINDS,
    FoldPlan,
    accuracy_vs_block_distance,
    accuracy_vs_subset_size,
    accuracy_vs_test_length,
    cross_validate,
    fit_model,
    predict_panel,
)
from flipscout.evaluation.metrics import daily_accuracy_distribution
from flipscout.evaluation.studies import (
    artificial_benchmark,
    fit_count_models,
    multi_information_fraction,
    noise_ratio_study,
    off_diagonal,
    reconstruction_study,
    reversal_group_study,
    sign_cross_correlation,
)
from flipscout.exceptions import FlipScoutError, InputError
from flipscout.infer.base import FitConfig, Penalty
from flipscout.infer.gaussian import fit_dichotomized_gaussian
from flipscout.infer.reversal import fit_reversal_pairwise
from flipscout.ingest import compute_reversals, compute_signs, load_price_csv, synchronize
from flipscout.model import CouplingSet
from flipscout.sample import GlauberConfig, exact_sample, glauber_sample
from flipscout.storage import (
    Provenance,
    StudyDocument,
    check_entities,
    coupling_document,
    dg_document,
    hash_array,
    hash_file,
    load_coupling_set,
    load_sign_panel,
    panel_document,
    report_document,
    reversal_document,
    write_document,
    write_frame,
)

console = Console()

STUDIES = (
    "cv",
    "subset",
    "length",
    "distance",
    "daily",
    "reversals",
    "kl",
    "noise",
    "reconstruction",
    "artificial",
    "xcorr",
    "multiinfo",
)

FIT_MODELS = (*MODEL_KINDS, "reversal", "dg")

# Source of the artificial study when no couplings or panel are given
ARTIFICIAL_DEFAULT_N = 8
ARTIFICIAL_DEFAULT_COUPLING = 0.2


class RunConfig(BaseModel):
    """Every option of a run; persisted in each output so the run can be replayed."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    command: str
    input: Optional[str] = None
    params: Optional[str] = None
    out: str = "."
    seed: int = 0
    threads: int = Field(default=1, gt=0)

    # Model
    model: str = "pairwise"
    lags: int = Field(default=0, ge=0)
    lam: Optional[float] = Field(default=None, ge=0, alias="lambda")
    penalty: Penalty = "l2"
    tol: float = Field(default=1e-6, gt=0)
    max_iter: int = Field(default=1000, gt=0)

    # Ingest
    zero_policy: str = "positive"
    columns: dict[str, str] = Field(default_factory=dict)

    # Evaluation
    study: str = "cv"
    folds: int = DEFAULT_FOLDS
    shuffle_folds: bool = False
    alpha: Optional[float] = None
    start: Optional[int] = None
    stop: Optional[int] = None
    learning: Optional[int] = None
    block_length: int = 40
    lengths: list[int] = Field(default_factory=list)
    test_blocks: int = 1
    k_values: list[int] = Field(default_factory=list)
    max_subsets: Optional[int] = None
    group_sizes: list[int] = Field(default_factory=list)
    groups: int = 10
    i: int = 0
    j: int = 1
    max_lag: int = 10
    dg_draws: int = 200_000

    # Synthetic data
    n: Optional[int] = None
    t: Optional[int] = None
    j_mean: Optional[float] = None
    sigma_j: Optional[float] = None
    coupling_file: Optional[str] = None
    homogeneous: Optional[float] = None
    burn_in: int = 1000
    sweep: str = "5N"
    exact: bool = False
    enumeration_cap: int = Field(default=ENUMERATION_CAP, gt=0)

    schema_version: int = SCHEMA_VERSION

    def fit_config(self) -> FitConfig:
        return FitConfig(
            lam=self.lam,
            penalty=self.penalty,
            max_iterations=self.max_iter,
            gradient_tolerance=self.tol,
            seed=self.seed,
            threads=self.threads,
        )

    def glauber_config(self) -> GlauberConfig:
        if self.sweep.upper() == "5N":
            attempts = None
        else:
            try:
                attempts = int(self.sweep)
            except ValueError as e:
                raise InputError(
                    f"--sweep must be 5N or a positive integer (got {self.sweep})"
                ) from e
        return GlauberConfig(
            attempts_per_sweep=attempts, burn_in_records=self.burn_in, seed=self.seed
        )


def _out(config: RunConfig, name: str) -> Path:
    return Path(config.out) / name


def _provenance(config: RunConfig, input_hash: Optional[str] = None) -> Provenance:
    return Provenance(
        run_config=config.model_dump(by_alias=True), input_hash=input_hash, seed=config.seed
    )


def _require(value, flag: str):
    if value is None:
        raise InputError(f"{flag} is required for this command")
    return value


def _load_panel(config: RunConfig):
    path = Path(_require(config.input, "--input"))
    return load_sign_panel(path), hash_file(path)


def _load_params(config: RunConfig, entities: Optional[list[str]] = None) -> CouplingSet:
    path = Path(_require(config.params, "--params"))
    params = load_coupling_set(path)
    if entities is not None:
        document = json.loads(path.read_text(encoding="utf-8"))
        check_entities(entities, document.get("entities", []), "parameter file")
    return params


def _show_table(title: str, frame: pd.DataFrame, limit: int = 20):
    table = Table(title=title, show_header=True, header_style="bold cyan")
    for column in frame.columns:
        table.add_column(str(column), justify="right")
    for row in frame.head(limit).itertuples(index=False):
        table.add_row(*[f"{v:.4f}" if isinstance(v, float) else str(v) for v in row])
    console.print(table)
    if len(frame) > limit:
        console.print(f"[dim]... {len(frame) - limit} more rows[/dim]")


def cmd_ingest(config: RunConfig):
    """Parse a price file into a synchronized sign panel."""
    path = Path(_require(config.input, "--input"))
    console.print(f"[bold blue]Ingesting[/bold blue] {path}")

    prices = synchronize(load_price_csv(path, config.columns or None))
    signs = compute_signs(prices, config.zero_policy)
    reversals = compute_reversals(signs)

    provenance = _provenance(config, hash_file(path))
    write_document(panel_document(signs, provenance, prices.dropped), _out(config, "signs.json"))
    write_frame(
        pd.DataFrame(reversals.flips.T, columns=reversals.entities).assign(
            timestamp=reversals.timestamps
        ),
        _out(config, "reversals.csv"),
    )
    console.print(
        f"[bold green]✓[/bold green] {signs.n} entities x {signs.t} bins "
        f"({len(prices.dropped)} bins dropped, {signs.zero_returns} zero returns)"
    )


def cmd_fit(config: RunConfig):
    """Fit a model to a sign panel and write its parameters and fit report."""
    panel, input_hash = _load_panel(config)
    provenance = _provenance(config, input_hash)
    fit_config = config.fit_config()
    console.print(
        f"[bold blue]Fitting[/bold blue] {config.model} model "
        f"(N={panel.n}, T={panel.t}, L={config.lags})"
    )

    if config.model == "reversal":
        report = fit_reversal_pairwise(compute_reversals(panel), fit_config)
        write_document(
            reversal_document(report.params, panel.entities, provenance),
            _out(config, "reversal_couplings.json"),
        )
    elif config.model == "dg":
        params = fit_dichotomized_gaussian(panel)
        write_document(dg_document(params, panel.entities, provenance), _out(config, "dg.json"))
        console.print("[bold green]✓[/bold green] Dichotomized Gaussian written")
        return
    else:
        params, report = fit_model(panel, config.model, config.lags, fit_config)
        write_document(
            coupling_document(params, panel.entities, provenance), _out(config, "couplings.json")
        )
        if report is None:
            console.print("[bold green]✓[/bold green] Independent model written")
            return

    write_document(
        report_document(report, config.model, provenance), _out(config, "fit_report.json")
    )
    if report.converged:
        console.print(
            f"[bold green]✓[/bold green] Converged in {report.iterations_used} iterations "
            f"({report.optimizer}, lambda={report.lam:.3g})"
        )
    else:
        console.print(
            f"[yellow]Stopped after {report.iterations_used} iterations; gradient norm "
            f"{report.gradient_norm:.2e} above tolerance[/yellow]"
        )


def cmd_predict(config: RunConfig):
    """Write per-event flip probabilities for a panel and fitted parameters."""
    panel, input_hash = _load_panel(config)
    params = _load_params(config, panel.entities)
    start = config.start if config.start is not None else max(params.l, 1)
    stop = config.stop if config.stop is not None else panel.t
    run = predict_panel(panel, params, start, stop, model=config.model)
    write_frame(run.to_frame(), _out(config, "predictions.csv"))
    console.print(f"[bold green]✓[/bold green] {len(run)} predictions for bins [{start}, {stop})")


def _write_study(config: RunConfig, results: dict, input_hash: Optional[str] = None):
    document = StudyDocument(
        study=config.study, results=results, provenance=_provenance(config, input_hash)
    )
    write_document(document, _out(config, f"study_{config.study}.json"))


def _study_cv(config: RunConfig):
    panel, input_hash = _load_panel(config)
    plan = FoldPlan.build(
        panel.t, config.lags, config.folds, shuffle=config.shuffle_folds, seed=config.seed
    )
    result = cross_validate(
        panel, config.lags, config.fit_config(), plan, kind=config.model, threads=config.threads
    )
    folds = result.fold_frame()
    write_frame(folds, _out(config, "study_cv_folds.csv"))
    for fold in result.folds:
        write_frame(fold.roc.to_frame(), _out(config, f"study_cv_roc_fold{fold.fold}.csv"))
    write_frame(
        pd.DataFrame(
            {
                "fpr": result.fpr_grid,
                "mean_tpr": result.mean_tpr,
                "alpha": result.alpha_grid,
                "mean_accuracy": result.mean_accuracy_curve,
                "entity_first_accuracy": result.entity_first_accuracy_curve,
            }
        ),
        _out(config, "study_cv_curves.csv"),
    )
    write_frame(result.per_entity, _out(config, "study_cv_entities.csv"))
    _show_table(f"{config.model} model, {plan.k} folds", folds)
    _write_study(
        config,
        {
            "model": result.kind,
            "lags": result.lags,
            "frozen_couplings": result.kind == "history_only",
            "shuffled_folds": plan.shuffle,
            "mean_auc": result.mean_auc,
            "auc_std": result.auc_std,
            "mean_max_accuracy": result.mean_max_accuracy,
            "max_mean_accuracy": result.max_mean_accuracy,
            "max_entity_first_accuracy": result.max_entity_first_accuracy,
            "entity_auc_min": float(result.per_entity["auc"].min()),
            "entity_auc_max": float(result.per_entity["auc"].max()),
            "fold_boundaries": plan.boundaries() if not plan.shuffle else None,
        },
        input_hash,
    )
    console.print(
        f"[bold green]AUC[/bold green] {result.mean_auc:.3f} ± {result.auc_std:.3f}, "
        f"[bold green]max mean accuracy[/bold green] {result.max_mean_accuracy:.3f}"
    )


def _study_subset(config: RunConfig):
    panel, input_hash = _load_panel(config)
    k_values = config.k_values or list(range(1, panel.n + 1))
    study = accuracy_vs_subset_size(
        panel,
        k_values,
        config.fit_config(),
        config.folds,
        max_subsets=config.max_subsets,
        seed=config.seed,
        threads=config.threads,
    )
    write_frame(study.summary, _out(config, "study_subset.csv"))
    write_frame(study.scores, _out(config, "study_subset_scores.csv"))
    _show_table("Accuracy by number of visible entities", study.summary)
    _write_study(
        config, {"summary": study.summary.to_dict("records"), "seed": study.seed}, input_hash
    )


def _study_length(config: RunConfig):
    panel, input_hash = _load_panel(config)
    lengths = config.lengths or [30, 60, 120, 250, 500]
    study = accuracy_vs_test_length(
        panel,
        config.learning or 500,
        lengths,
        config.fit_config(),
        config.lags,
        alpha=0.5 if config.alpha is None else config.alpha,
        n_blocks=config.test_blocks,
    )
    write_frame(study.frame, _out(config, "study_length.csv"))
    _show_table("Accuracy by testing length", study.frame)
    _write_study(config, {"alpha": study.alpha, "rows": study.frame.to_dict("records")}, input_hash)


def _study_distance(config: RunConfig):
    panel, input_hash = _load_panel(config)
    study = accuracy_vs_block_distance(
        panel,
        config.learning or 1000,
        config.block_length,
        config.fit_config(),
        config.lags,
        alpha=0.5 if config.alpha is None else config.alpha,
    )
    write_frame(study.frame, _out(config, "study_distance.csv"))
    _show_table("Accuracy by block distance", study.frame)
    _write_study(
        config,
        {
            "alpha": study.alpha,
            "statistical_error": study.statistical_error,
            "spread": study.spread,
            "rows": study.frame.to_dict("records"),
        },
        input_hash,
    )


def _study_daily(config: RunConfig):
    panel, input_hash = _load_panel(config)
    plan = FoldPlan.build(panel.t, config.lags, config.folds)
    result = cross_validate(
        panel, config.lags, config.fit_config(), plan, kind=config.model, threads=config.threads
    )
    daily = daily_accuracy_distribution(result.run, config.alpha)
    histogram = pd.DataFrame({"accuracy": daily.values, "bins": daily.counts})
    write_frame(histogram, _out(config, "study_daily.csv"))
    _show_table(f"Per-bin accuracy at alpha={daily.alpha:.3f}", histogram)
    _write_study(
        config,
        {
            "alpha": daily.alpha,
            "zero_bins": daily.zero_bins,
            "bins": int(daily.per_bin.size),
            "histogram": histogram.to_dict("records"),
        },
        input_hash,
    )


def _study_reversals(config: RunConfig):
    panel, input_hash = _load_panel(config)
    reversals = compute_reversals(panel)
    distributions = fit_count_models(reversals, config.fit_config(), config.dg_draws, config.seed)
    kl = distributions.kl_table()
    write_frame(distributions.to_frame(), _out(config, "study_reversals.csv"))
    _show_table("KL(empirical ‖ model)", kl)
    _write_study(
        config,
        {
            "pairwise_method": distributions.pairwise_method,
            "dg_draws": config.dg_draws,
            "kl": kl.to_dict("records"),
        },
        input_hash,
    )


def _study_kl(config: RunConfig):
    panel, input_hash = _load_panel(config)
    reversals = compute_reversals(panel)
    sizes = config.group_sizes or list(range(2, panel.n + 1))
    study = reversal_group_study(
        reversals, sizes, config.groups, config.fit_config(), config.dg_draws, config.seed
    )
    write_frame(study.summary, _out(config, "study_kl.csv"))
    write_frame(study.groups, _out(config, "study_kl_groups.csv"))
    _show_table("Mean KL over random groups", study.summary)
    _write_study(config, {"summary": study.summary.to_dict("records")}, input_hash)


def _study_noise(config: RunConfig):
    n, t, j_mean, sigma_j = config.n, config.t, config.j_mean, config.sigma_j
    input_hash = None
    if config.input:
        panel, input_hash = _load_panel(config)
        fitted = off_diagonal(fit_model(panel, "pairwise", 0, config.fit_config())[0].J)
        n = n or panel.n
        t = t or panel.t
        j_mean = float(fitted.mean()) if j_mean is None else j_mean
        sigma_j = float(fitted.std()) if sigma_j is None else sigma_j
    study = noise_ratio_study(
        _require(n, "--n"),
        _require(t, "--t"),
        float(_require(j_mean, "--j-mean")),
        sigma_j,
        config.fit_config(),
        glauber=config.glauber_config(),
    )
    results = {
        "sigma_noise": study.sigma_noise,
        "sigma_j": sigma_j,
        "ratio": study.ratio,
        "recovered_mean": study.recovered_mean,
        "n": study.n,
        "t": study.t,
        "j_mean": study.j_mean,
    }
    _write_study(config, results, input_hash)
    ratio = "" if study.ratio is None else f", ratio {study.ratio:.3f}"
    console.print(f"[bold green]sigma_noise[/bold green] {study.sigma_noise:.4f}{ratio}")


def _coupling_source(
    config: RunConfig, default: Optional[float] = None
) -> tuple[CouplingSet, Optional[str]]:
    if config.params:
        return load_coupling_set(config.params).memoryless(), hash_file(config.params)
    if config.coupling_file:
        return load_coupling_set(config.coupling_file).memoryless(), hash_file(config.coupling_file)
    if config.homogeneous is not None:
        return CouplingSet.homogeneous(_require(config.n, "--n"), config.homogeneous), None
    if config.input:
        panel, input_hash = _load_panel(config)
        return fit_model(panel, "pairwise", 0, config.fit_config())[0], input_hash
    if default is not None:
        n = config.n or ARTIFICIAL_DEFAULT_N
        console.print(f"[dim]No coupling source given: homogeneous J={default} for N={n}[/dim]")
        return CouplingSet.homogeneous(n, default), None
    raise InputError("give --params, --coupling-file, --homogeneous or --input")


def _study_reconstruction(config: RunConfig):
    params, input_hash = _coupling_source(config)
    study = reconstruction_study(
        params, _require(config.t, "--t"), config.fit_config(), glauber=config.glauber_config()
    )
    _write_study(config, {"delta": study.delta, "n": params.n, "t": study.t}, input_hash)
    console.print(f"[bold green]Reconstruction error[/bold green] {study.delta:.4f}")


def _study_artificial(config: RunConfig):
    params, input_hash = _coupling_source(config, default=ARTIFICIAL_DEFAULT_COUPLING)
    benchmark = artificial_benchmark(
        params,
        _require(config.t, "--t"),
        config.fit_config(),
        config.folds,
        glauber=config.glauber_config(),
        threads=config.threads,
        cap=config.enumeration_cap,
    )
    write_frame(benchmark.cv.fold_frame(), _out(config, "study_artificial_folds.csv"))
    _write_study(
        config,
        {
            "accuracy": benchmark.accuracy,
            "auc": benchmark.auc,
            "ideal_accuracy": benchmark.ideal_accuracy,
            "n": params.n,
            "t": config.t,
            "params_hash": hash_array(params.J, params.h),
            "j_mean": float(off_diagonal(params.J).mean()),
        },
        input_hash,
    )
    console.print(
        f"[bold green]Accuracy[/bold green] {benchmark.accuracy:.3f}, "
        f"[bold green]AUC[/bold green] {benchmark.auc:.3f}"
    )


def _study_xcorr(config: RunConfig):
    panel, input_hash = _load_panel(config)
    frame = sign_cross_correlation(panel, config.i, config.j, config.max_lag)
    write_frame(frame, _out(config, "study_xcorr.csv"))
    _show_table(f"Cross-correlogram {panel.entities[config.i]} / {panel.entities[config.j]}", frame)
    _write_study(config, {"rows": frame.to_dict("records")}, input_hash)


def _study_multiinfo(config: RunConfig):
    panel, input_hash = _load_panel(config)
    result = multi_information_fraction(panel)
    _write_study(
        config,
        {
            "independent_entropy": result.independent_entropy,
            "pairwise_entropy": result.pairwise_entropy,
            "empirical_entropy": result.empirical_entropy,
            "multi_information": result.multi_information,
            "fraction": result.fraction,
        },
        input_hash,
    )
    fraction = "undefined" if result.fraction is None else f"{result.fraction:.3f}"
    console.print(f"[bold green]Pairwise fraction of multi-information[/bold green] {fraction}")


STUDY_HANDLERS = {
    "cv": _study_cv,
    "subset": _study_subset,
    "length": _study_length,
    "distance": _study_distance,
    "daily": _study_daily,
    "reversals": _study_reversals,
    "kl": _study_kl,
    "noise": _study_noise,
    "reconstruction": _study_reconstruction,
    "artificial": _study_artificial,
    "xcorr": _study_xcorr,
    "multiinfo": _study_multiinfo,
}


def cmd_evaluate(config: RunConfig):
    """Run one evaluation study and write its JSON and CSV outputs."""
    if config.study not in STUDY_HANDLERS:
        raise InputError(f"unknown study '{config.study}'")
    console.print(f"[bold blue]Study:[/bold blue] {config.study}")
    STUDY_HANDLERS[config.study](config)


def cmd_simulate(config: RunConfig):
    """Generate a synthetic sign panel from known couplings."""
    if config.coupling_file:
        params = load_coupling_set(config.coupling_file)
        params_hash = hash_file(config.coupling_file)
    elif config.homogeneous is not None:
        params = CouplingSet.homogeneous(_require(config.n, "--n"), config.homogeneous)
        params_hash = hash_array(params.J, params.h)
    else:
        raise InputError("simulate needs --coupling-file or --homogeneous")
    t = _require(config.t, "--t")

    if config.exact:
        panel = exact_sample(params, t, config.seed, cap=config.enumeration_cap)
        generator = "exact"
    else:
        panel = glauber_sample(params, t, config.glauber_config())
        generator = "glauber"

    provenance = _provenance(config, params_hash)
    provenance.sampler = generator
    write_document(panel_document(panel, provenance), _out(config, "signs.json"))
    console.print(
        f"[bold green]✓[/bold green] Sampled {panel.t} records for {panel.n} entities ({generator})"
    )


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per pipeline stage."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Random seed (default from settings)")
    common.add_argument("--out", help="Output directory (default from settings)")
    common.add_argument("--threads", type=int, help="Worker threads")
    common.add_argument("--config", dest="config_file", help="JSON RunConfig overriding flags")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--lags", type=int, help="Number of lagged couplings L")
    model.add_argument("--lambda", dest="lam", type=float, help="Regularization (default 1/T')")
    model.add_argument("--penalty", choices=["l2", "l1"], help="Regularization type")
    model.add_argument("--tol", type=float, help="Gradient tolerance")
    model.add_argument("--max-iter", type=int, help="Iteration cap per entity")

    chain = argparse.ArgumentParser(add_help=False)
    chain.add_argument("--n", type=int, help="Number of entities")
    chain.add_argument("--t", type=int, help="Number of records")
    chain.add_argument("--coupling-file", help="CouplingSet JSON to sample from")
    chain.add_argument("--homogeneous", type=float, metavar="J_MEAN", help="Homogeneous couplings")
    chain.add_argument("--burn-in", type=int, help="Records discarded before recording")
    chain.add_argument("--sweep", help="Flip attempts per Monte Carlo step: 5N or an integer")

    parser = argparse.ArgumentParser(
        prog="flipscout", description="Flip Scout - pairwise models of collective trend reversals"
    )
    parser.add_argument("--version", action="version", version=f"flipscout {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # ingest command
    parser_ingest = subparsers.add_parser(
        "ingest", parents=[common], help="Parse a price CSV into a sign panel"
    )
    parser_ingest.add_argument("input", help="Long-format CSV: timestamp, entity, open, close")
    parser_ingest.add_argument(
        "--zero-policy", choices=["positive", "carry_forward"], help="Sign of a zero return"
    )
    for key in ("timestamp", "entity", "open", "close"):
        parser_ingest.add_argument(f"--{key}-col", dest=f"{key}_col", help=f"Header of {key}")
    parser_ingest.set_defaults(func=cmd_ingest)

    # fit command
    parser_fit = subparsers.add_parser("fit", parents=[common, model], help="Fit a model")
    parser_fit.add_argument("--input", required=True, help="Sign panel JSON")
    parser_fit.add_argument("--model", choices=FIT_MODELS, help="Model to fit")
    parser_fit.set_defaults(func=cmd_fit)

    # predict command
    parser_predict = subparsers.add_parser(
        "predict", parents=[common], help="Write per-event flip probabilities"
    )
    parser_predict.add_argument("--input", required=True, help="Sign panel JSON")
    parser_predict.add_argument("--params", required=True, help="CouplingSet JSON")
    parser_predict.add_argument("--start", type=int, help="First predicted bin")
    parser_predict.add_argument("--stop", type=int, help="One past the last predicted bin")
    parser_predict.add_argument("--model", help="Label stored with the predictions")
    parser_predict.set_defaults(func=cmd_predict)

    # evaluate command
    parser_eval = subparsers.add_parser(
        "evaluate", parents=[common, model, chain], help="Run an evaluation study"
    )
    parser_eval.add_argument("--study", choices=STUDIES, help="Study to run (default cv)")
    parser_eval.add_argument("--input", help="Sign panel JSON")
    parser_eval.add_argument("--params", help="CouplingSet JSON")
    parser_eval.add_argument("--model", choices=MODEL_KINDS, help="Model variant")
    parser_eval.add_argument("--folds", type=int, help="Number of folds")
    parser_eval.add_argument("--shuffle-folds", action="store_true", default=None)
    parser_eval.add_argument("--alpha", type=float, help="Detection level")
    parser_eval.add_argument("--learning", type=int, help="Learning block length")
    parser_eval.add_argument("--block-length", type=int, help="Testing block length")
    parser_eval.add_argument("--lengths", type=_int_list, help="Comma-separated test lengths")
    parser_eval.add_argument("--test-blocks", type=int, help="Disjoint test blocks per length")
    parser_eval.add_argument("--k", dest="k_values", type=_int_list, help="Subset sizes")
    parser_eval.add_argument("--max-subsets", type=int, help="Subsample subsets per size")
    parser_eval.add_argument("--group-sizes", type=_int_list, help="Random group sizes")
    parser_eval.add_argument("--groups", type=int, help="Random groups per size")
    parser_eval.add_argument("--i", type=int, help="First entity index")
    parser_eval.add_argument("--j", type=int, help="Second entity index")
    parser_eval.add_argument("--max-lag", type=int, help="Largest cross-correlation lag")
    parser_eval.add_argument("--j-mean", type=float, help="Homogeneous coupling of the noise study")
    parser_eval.add_argument("--sigma-j", type=float, help="Spread of real fitted couplings")
    parser_eval.add_argument("--dg-draws", type=int, help="Draws for sampled DG distributions")
    parser_eval.set_defaults(func=cmd_evaluate)

    # simulate command
    parser_sim = subparsers.add_parser(
        "simulate", parents=[common, chain], help="Generate a synthetic sign panel"
    )
    parser_sim.add_argument(
        "--exact", action="store_true", default=None, help="Enumeration sampler"
    )
    parser_sim.set_defaults(func=cmd_simulate)

    return parser


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge parsed flags, settings defaults and an optional JSON RunConfig."""
    settings = get_settings()
    values = {k: v for k, v in vars(args).items() if v is not None}
    values.pop("func", None)
    config_file = values.pop("config_file", None)

    columns = {
        key: values.pop(f"{key}_col")
        for key in ("timestamp", "entity", "open", "close")
        if f"{key}_col" in values
    }
    if columns:
        values["columns"] = columns
    values.setdefault("seed", settings.default_seed)
    values.setdefault("threads", settings.threads)
    values.setdefault("out", str(settings.output_dir))
    values.setdefault("burn_in", settings.burn_in_records)
    values.setdefault("dg_draws", settings.dg_draws)
    values.setdefault("enumeration_cap", settings.enumeration_cap)

    config = RunConfig.model_validate(values)
    if config_file:
        path = Path(config_file)
        try:
            overrides = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise InputError(f"{path.name} is not valid JSON: {e}") from e
        if "lam" in overrides:
            overrides["lambda"] = overrides.pop("lam")
        config = RunConfig.model_validate({**config.model_dump(by_alias=True), **overrides})
    return config


def main(argv: Optional[list[str]] = None):
    """Main entry point for Flip Scout CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not hasattr(args, "func"):
        parser.print_help()
        return

    settings = get_settings()
    settings.setup_logging()
    settings.setup_directories()

    try:
        config = build_run_config(args)
        args.func(config)
    except FlipScoutError as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        sys.exit(e.exit_code)
    except (FileNotFoundError, ValidationError) as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        sys.exit(InputError.exit_code)


if __name__ == "__main__":
    main()
