"""JSON documents and CSV tables written by the CLI."""

import hashlib
import logging
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, model_validator

from flipscout.config import RNG_IDENTITY, SCHEMA_VERSION
from flipscout.exceptions import DataValidationError, ParseError
from flipscout.infer.base import FitReport
from flipscout.infer.gaussian import DgParams
from flipscout.ingest import SignPanel
from flipscout.model import CouplingSet, ReversalCouplingSet

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class Provenance(BaseModel):
    run_config: dict[str, Any] = Field(default_factory=dict)
    input_hash: Optional[str] = None
    generator: str = RNG_IDENTITY
    sampler: Optional[str] = None
    seed: Optional[int] = None


class SignPanelDocument(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: str = "sign_panel"
    entities: list[str]
    timestamps: list[str]
    signs: list[list[int]]
    zero_returns: int = 0
    dropped: list[str] = Field(default_factory=list)
    provenance: Provenance = Field(default_factory=Provenance)


class CouplingDocument(BaseModel):
    """Parameters as `{n, l, j, h, k}`: J, the fields and the L lag matrices, row-major."""

    schema_version: int = SCHEMA_VERSION
    kind: str = "coupling_set"
    n: int = Field(ge=1)
    l: int = Field(default=0, ge=0)
    j: list[list[float]]
    h: list[float]
    k: list[list[list[float]]] = Field(default_factory=list)
    entities: list[str] = Field(default_factory=list)
    provenance: Provenance = Field(default_factory=Provenance)

    @model_validator(mode="after")
    def check_sizes(self) -> "CouplingDocument":
        if len(self.j) != self.n or len(self.h) != self.n:
            raise ValueError(f"j and h must have {self.n} rows")
        if len(self.k) != self.l:
            raise ValueError(f"l={self.l} but {len(self.k)} lag matrices were given")
        if self.entities and len(self.entities) != self.n:
            raise ValueError(f"{len(self.entities)} entity names for n={self.n}")
        return self


class ReversalCouplingDocument(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: str = "reversal_coupling_set"
    entities: list[str] = Field(default_factory=list)
    W: list[list[float]]
    provenance: Provenance = Field(default_factory=Provenance)


class DgDocument(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: str = "dichotomized_gaussian"
    entities: list[str] = Field(default_factory=list)
    mu: list[float]
    sigma: list[list[float]]
    projected: bool = False
    provenance: Provenance = Field(default_factory=Provenance)


class FitReportDocument(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: str = "fit_report"
    model: str = "pairwise"
    lags: int = 0
    optimizer: str
    penalty: str
    lam: float
    converged: bool
    iterations_used: int
    gradient_norm: float
    training_bins: int
    frozen_couplings: bool = False
    objective_trace: list[float]
    entity_iterations: list[int] = Field(default_factory=list)
    config: dict[str, Any] = Field(default_factory=dict)
    provenance: Provenance = Field(default_factory=Provenance)


class StudyDocument(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: str = "study"
    study: str
    results: dict[str, Any] = Field(default_factory=dict)
    provenance: Provenance = Field(default_factory=Provenance)


def hash_file(path: PathLike) -> str:
    """sha256 of a file's bytes, as hex."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def hash_array(*arrays: np.ndarray) -> str:
    """sha256 over the raw bytes of float64 copies of the arrays."""
    digest = hashlib.sha256()
    for a in arrays:
        digest.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return digest.hexdigest()


def panel_document(panel: SignPanel, provenance: Optional[Provenance] = None, dropped=()):
    return SignPanelDocument(
        entities=list(panel.entities),
        timestamps=list(panel.timestamps),
        signs=panel.signs.astype(int).tolist(),
        zero_returns=panel.zero_returns,
        dropped=list(dropped),
        provenance=provenance or Provenance(),
    )


def coupling_document(
    params: CouplingSet,
    entities: Optional[list[str]] = None,
    provenance: Optional[Provenance] = None,
) -> CouplingDocument:
    return CouplingDocument(
        n=params.n,
        l=params.l,
        j=params.J.tolist(),
        h=params.h.tolist(),
        k=[k.tolist() for k in params.lags],
        entities=list(entities or []),
        provenance=provenance or Provenance(),
    )


def reversal_document(
    params: ReversalCouplingSet,
    entities: Optional[list[str]] = None,
    provenance: Optional[Provenance] = None,
) -> ReversalCouplingDocument:
    return ReversalCouplingDocument(
        entities=list(entities or []), W=params.W.tolist(), provenance=provenance or Provenance()
    )


def dg_document(
    params: DgParams, entities: Optional[list[str]] = None, provenance: Optional[Provenance] = None
) -> DgDocument:
    return DgDocument(
        entities=list(entities or []),
        mu=params.mu.tolist(),
        sigma=params.sigma.tolist(),
        projected=params.projected,
        provenance=provenance or Provenance(),
    )


def report_document(
    report: FitReport, model: str = "pairwise", provenance: Optional[Provenance] = None
) -> FitReportDocument:
    lags = report.params.l if isinstance(report.params, CouplingSet) else 0
    return FitReportDocument(
        model=model,
        lags=lags,
        optimizer=report.optimizer,
        penalty=report.config.penalty,
        lam=report.lam,
        converged=report.converged,
        iterations_used=report.iterations_used,
        gradient_norm=report.gradient_norm,
        training_bins=report.training_bins,
        frozen_couplings=report.frozen_couplings,
        objective_trace=report.objective_trace,
        entity_iterations=report.entity_iterations,
        config=report.config.model_dump(by_alias=True),
        provenance=provenance or Provenance(),
    )


def write_document(document: BaseModel, path: PathLike) -> Path:
    """Write a document as indented JSON, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    """Write a flat table for external plotting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def _read(model: type[BaseModel], path: PathLike) -> BaseModel:
    path = Path(path)
    try:
        return model.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ParseError(f"{path.name} is not a valid {model.__name__}: {e}") from e


def load_sign_panel(path: PathLike) -> SignPanel:
    """Reload a SignPanel written by `write_document(panel_document(...))`."""
    document = _read(SignPanelDocument, path)
    n, t = len(document.entities), len(document.timestamps)
    if len(document.signs) != n or any(len(row) != t for row in document.signs):
        raise ParseError(f"{Path(path).name}: signs must be {n} rows of {t} values")
    return SignPanel(
        entities=document.entities,
        timestamps=document.timestamps,
        signs=np.array(document.signs, dtype=np.int8).reshape(n, t),
        zero_returns=document.zero_returns,
    )


def load_coupling_set(path: PathLike) -> CouplingSet:
    document = _read(CouplingDocument, path)
    return CouplingSet(J=document.j, h=document.h, lags=document.k)


def load_reversal_couplings(path: PathLike) -> ReversalCouplingSet:
    document = _read(ReversalCouplingDocument, path)
    return ReversalCouplingSet(W=document.W)


def check_entities(expected: list[str], found: list[str], what: str):
    """Raise when a parameter file names entities other than the panel's."""
    if found and list(found) != list(expected):
        raise DataValidationError(f"{what} entities {found} do not match the panel {expected}")
