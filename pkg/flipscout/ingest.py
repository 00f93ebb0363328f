"""Price ingestion: CSV loading, synchronization, orientations and reversals."""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import pandas as pd

from flipscout.exceptions import (
    DataValidationError,
    InsufficientDataError,
    ParseError,
)

logger = logging.getLogger(__name__)

ZeroPolicy = Literal["positive", "carry_forward"]

DEFAULT_COLUMNS = {
    "timestamp": "timestamp",
    "entity": "entity",
    "open": "open",
    "close": "close",
}


@dataclass
class PricePanel:
    """Opening and closing prices of N entities over T time bins.

    Missing cells are NaN until `synchronize` removes their bins.
    """

    entities: list[str]
    timestamps: list[str]
    open: np.ndarray
    close: np.ndarray
    dropped: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.entities)

    @property
    def t(self) -> int:
        return len(self.timestamps)

    @property
    def missing(self) -> np.ndarray:
        """Boolean N×T mask of cells absent from the source file."""
        return np.isnan(self.open) | np.isnan(self.close)


@dataclass
class SignPanel:
    """Synchronized N×T matrix of ±1 orientations."""

    entities: list[str]
    timestamps: list[str]
    signs: np.ndarray
    zero_returns: int = 0

    def __post_init__(self):
        self.signs = np.asarray(self.signs, dtype=np.int8)
        if self.signs.ndim != 2:
            raise DataValidationError(f"signs must be a 2-D matrix (got {self.signs.ndim}-D)")
        if not np.isin(self.signs, (-1, 1)).all():
            raise DataValidationError("every orientation must be exactly -1 or +1")
        if self.signs.shape != (len(self.entities), len(self.timestamps)):
            raise DataValidationError(
                f"signs shape {self.signs.shape} does not match "
                f"{len(self.entities)} entities x {len(self.timestamps)} timestamps"
            )

    @property
    def n(self) -> int:
        return self.signs.shape[0]

    @property
    def t(self) -> int:
        return self.signs.shape[1]

    def select(self, entities: list[int]) -> "SignPanel":
        """Panel restricted to the given entity indices, in that order."""
        return SignPanel(
            entities=[self.entities[i] for i in entities],
            timestamps=list(self.timestamps),
            signs=self.signs[list(entities)],
        )

    def window(self, start: int, stop: int) -> "SignPanel":
        """Panel restricted to the time bins [start, stop)."""
        return SignPanel(
            entities=list(self.entities),
            timestamps=self.timestamps[start:stop],
            signs=self.signs[:, start:stop],
        )


@dataclass
class ReversalPanel:
    """N×(T−1) binary matrix of trend reversals.

    Timestamps label the later bin of each consecutive pair.
    """

    entities: list[str]
    timestamps: list[str]
    flips: np.ndarray

    @property
    def n(self) -> int:
        return self.flips.shape[0]

    @property
    def t(self) -> int:
        return self.flips.shape[1]

    @property
    def counts(self) -> np.ndarray:
        """Number of simultaneous reversals in each bin."""
        return self.flips.sum(axis=0)

    def as_signs(self) -> SignPanel:
        """Reversal indicators recoded on the ±1 alphabet (1 → +1, 0 → −1)."""
        return SignPanel(
            entities=list(self.entities),
            timestamps=list(self.timestamps),
            signs=2 * self.flips.astype(np.int8) - 1,
        )


def load_price_csv(
    path: Union[str, Path], columns: Optional[dict[str, str]] = None
) -> PricePanel:
    """Load a long-format price file into a PricePanel.

    Args:
        path: CSV file with one row per (time bin, entity)
        columns: Mapping from the logical names timestamp/entity/open/close to the
            file's header names (defaults to identical names)

    Returns:
        PricePanel holding the union of all rows; cells absent from the file are NaN
    """
    mapping = {**DEFAULT_COLUMNS, **(columns or {})}
    path = Path(path)

    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.ParserError as e:
        found = re.search(r"line (\d+)", str(e))
        line = int(found.group(1)) if found else None
        raise ParseError(f"malformed CSV in {path.name}: {e}", line=line) from e
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"{path.name} is empty", line=1) from e

    missing_cols = [name for name in mapping.values() if name not in raw.columns]
    if missing_cols:
        raise ParseError(f"header lacks column(s): {', '.join(missing_cols)}", line=1)

    frame = pd.DataFrame({key: raw[name].str.strip() for key, name in mapping.items()})
    # Header is line 1, first data row is line 2
    frame["line"] = np.arange(len(frame)) + 2

    for key in ("open", "close"):
        values = pd.to_numeric(frame[key], errors="coerce")
        bad = ~np.isfinite(values)
        if bad.any():
            row = frame[bad].iloc[0]
            raise ParseError(
                f"cannot parse {key} price '{row[key]}' for entity {row['entity']} "
                f"at {row['timestamp']} as a finite number",
                line=int(row["line"]),
            )
        frame[key] = values

    empty = (frame["timestamp"] == "") | (frame["entity"] == "")
    if empty.any():
        raise ParseError("empty timestamp or entity", line=int(frame[empty].iloc[0]["line"]))

    duplicated = frame.duplicated(subset=["timestamp", "entity"])
    if duplicated.any():
        row = frame[duplicated].iloc[0]
        raise ParseError(
            f"duplicate row for entity {row['entity']} at {row['timestamp']}",
            line=int(row["line"]),
        )

    non_positive = (frame["open"] <= 0) | (frame["close"] <= 0)
    if non_positive.any():
        row = frame[non_positive].iloc[0]
        raise DataValidationError(
            f"non-positive price for entity {row['entity']} at {row['timestamp']}",
            entity=row["entity"],
            timestamp=row["timestamp"],
        )

    entities = list(pd.unique(frame["entity"]))
    timestamps = sorted(pd.unique(frame["timestamp"]))

    def _matrix(key: str) -> np.ndarray:
        table = frame.pivot(index="entity", columns="timestamp", values=key)
        return table.reindex(index=entities, columns=timestamps).to_numpy(dtype=float)

    panel = PricePanel(
        entities=entities,
        timestamps=timestamps,
        open=_matrix("open"),
        close=_matrix("close"),
    )
    logger.info(
        f"Parsed {len(frame)} rows from {path.name}: {panel.n} entities, {panel.t} bins, "
        f"{int(panel.missing.sum())} missing cells"
    )
    return panel


def synchronize(panel: PricePanel) -> PricePanel:
    """Delete every time bin that is missing for at least one entity.

    Args:
        panel: PricePanel, possibly with missing cells

    Returns:
        PricePanel without missing cells; dropped bins are listed in `dropped`
    """
    keep = ~panel.missing.any(axis=0)
    dropped = [ts for ts, k in zip(panel.timestamps, keep) if not k]

    if keep.sum() < 2:
        raise InsufficientDataError(
            f"only {int(keep.sum())} synchronous time bins remain (need at least 2)"
        )

    if dropped:
        logger.info(f"Dropped {len(dropped)} non-synchronous bins out of {panel.t}")

    return PricePanel(
        entities=list(panel.entities),
        timestamps=[ts for ts, k in zip(panel.timestamps, keep) if k],
        open=panel.open[:, keep],
        close=panel.close[:, keep],
        dropped=list(panel.dropped) + dropped,
    )


def compute_signs(panel: PricePanel, zero_policy: ZeroPolicy = "positive") -> SignPanel:
    """Binarize intra-bin returns (close − open) / open into ±1 orientations.

    Args:
        panel: Synchronized PricePanel
        zero_policy: How a zero return is resolved: "positive" maps it to +1,
            "carry_forward" repeats the entity's previous sign (+1 if none)

    Returns:
        SignPanel with the number of zero returns in `zero_returns`
    """
    if panel.missing.any():
        raise DataValidationError("panel has missing cells; synchronize it first")

    # open > 0, so the sign of the return is the sign of close − open
    raw = np.sign(panel.close - panel.open)
    zeros = int((raw == 0).sum())

    if zero_policy == "positive":
        signs = np.where(raw == 0, 1.0, raw)
    elif zero_policy == "carry_forward":
        frame = pd.DataFrame(np.where(raw == 0, np.nan, raw))
        signs = frame.ffill(axis=1).fillna(1.0).to_numpy()
    else:
        raise DataValidationError(f"unknown zero policy '{zero_policy}'")

    if zeros:
        logger.warning(f"{zeros} zero returns resolved with policy '{zero_policy}'")

    return SignPanel(
        entities=list(panel.entities),
        timestamps=list(panel.timestamps),
        signs=signs.astype(np.int8),
        zero_returns=zeros,
    )


def compute_reversals(signs: SignPanel) -> ReversalPanel:
    """Mark each orientation change s[t+1] = −s[t] with 1."""
    if signs.t < 2:
        raise InsufficientDataError(f"need at least 2 time bins for reversals (got {signs.t})")

    flips = (signs.signs[:, 1:] != signs.signs[:, :-1]).astype(np.int8)
    return ReversalPanel(
        entities=list(signs.entities),
        timestamps=list(signs.timestamps[1:]),
        flips=flips,
    )
