"""Tests for price ingestion, synchronization, signs and reversals."""

import numpy as np
import pytest

from flipscout.exceptions import (
    DataValidationError,
    InputError,
    InsufficientDataError,
    ParseError,
)
from flipscout.ingest import (
    SignPanel,
    compute_reversals,
    compute_signs,
    load_price_csv,
    synchronize,
)

PRICES = """timestamp,entity,open,close
2020-01-01,A,10,11
2020-01-01,B,20,19
2020-01-02,A,11,10
2020-01-02,B,19,19
2020-01-03,A,10,12
2020-01-04,A,12,13
2020-01-04,B,19,18
"""


class TestLoadPriceCsv:
    """Test CSV parsing into a PricePanel."""

    def test_parses_long_format(self, price_csv):
        """Test that rows are pivoted into an entity x time panel."""
        panel = load_price_csv(price_csv(PRICES))

        assert panel.entities == ["A", "B"]
        assert panel.timestamps == ["2020-01-01", "2020-01-02", "2020-01-03", "2020-01-04"]
        assert panel.open[0, 0] == 10
        assert panel.close[1, 3] == 18
        assert panel.missing[1, 2]
        assert panel.missing.sum() == 1

    def test_custom_column_names(self, price_csv):
        """Test that header names can be remapped."""
        path = price_csv("date,ticker,o,c\nd1,X,1,2\nd2,X,2,1\n")

        panel = load_price_csv(
            path, {"timestamp": "date", "entity": "ticker", "open": "o", "close": "c"}
        )

        assert panel.entities == ["X"]
        assert panel.close.tolist() == [[2.0, 1.0]]

    def test_unparseable_price_reports_line(self, price_csv):
        """Test that a bad number names its line."""
        path = price_csv("timestamp,entity,open,close\nd1,A,1,2\nd2,A,abc,2\n")

        with pytest.raises(ParseError) as exc_info:
            load_price_csv(path)

        assert exc_info.value.line == 3
        assert "line 3" in str(exc_info.value)

    @pytest.mark.parametrize("value", ["inf", "-inf", "nan"])
    def test_non_finite_price_reports_row(self, price_csv, value):
        """Test that infinite or NaN prices are rejected with their line and entity."""
        path = price_csv(f"timestamp,entity,open,close\nd1,A,1,2\nd2,B,2,{value}\n")

        with pytest.raises(ParseError) as exc_info:
            load_price_csv(path)

        assert exc_info.value.line == 3
        assert "entity B at d2" in str(exc_info.value)

    def test_extra_field_reports_line(self, price_csv):
        """Test that a row with too many fields is a parse error with its line."""
        path = price_csv("timestamp,entity,open,close\nd1,A,1,2\nd2,A,1,2,9\n")

        with pytest.raises(ParseError) as exc_info:
            load_price_csv(path)

        assert exc_info.value.line == 3

    def test_empty_field_is_parse_error(self, price_csv):
        """Test that an empty price field is rejected."""
        path = price_csv("timestamp,entity,open,close\nd1,A,,2\n")

        with pytest.raises(ParseError):
            load_price_csv(path)

    def test_missing_column(self, price_csv):
        """Test that a header without a required column fails on line 1."""
        path = price_csv("timestamp,entity,open\nd1,A,1\n")

        with pytest.raises(ParseError) as exc_info:
            load_price_csv(path)

        assert exc_info.value.line == 1

    def test_empty_file(self, price_csv):
        """Test that an empty file is a parse error."""
        with pytest.raises(ParseError):
            load_price_csv(price_csv(""))

    def test_duplicate_row(self, price_csv):
        """Test that two rows for the same entity and bin are rejected."""
        path = price_csv("timestamp,entity,open,close\nd1,A,1,2\nd1,A,1,3\n")

        with pytest.raises(ParseError) as exc_info:
            load_price_csv(path)

        assert exc_info.value.line == 3

    def test_non_positive_price(self, price_csv):
        """Test that a zero or negative price names entity and timestamp."""
        path = price_csv("timestamp,entity,open,close\nd1,A,1,2\nd2,B,0,2\n")

        with pytest.raises(DataValidationError) as exc_info:
            load_price_csv(path)

        assert exc_info.value.entity == "B"
        assert exc_info.value.timestamp == "d2"

    def test_input_errors_are_value_errors(self, price_csv):
        """Test that input errors can be caught as ValueError."""
        with pytest.raises(ValueError):
            load_price_csv(price_csv("timestamp,entity,open\n"))

    def test_missing_file(self, tmp_path):
        """Test that a missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_price_csv(tmp_path / "absent.csv")


class TestSynchronize:
    """Test removal of non-synchronous bins."""

    def test_drops_incomplete_bins(self, price_csv):
        """Test that a bin missing for one entity is dropped and recorded."""
        panel = synchronize(load_price_csv(price_csv(PRICES)))

        assert panel.timestamps == ["2020-01-01", "2020-01-02", "2020-01-04"]
        assert panel.dropped == ["2020-01-03"]
        assert not panel.missing.any()

    def test_complete_panel_unchanged(self, price_csv):
        """Test that a complete panel keeps every bin."""
        path = price_csv("timestamp,entity,open,close\nd1,A,1,2\nd2,A,2,1\n")

        panel = synchronize(load_price_csv(path))

        assert panel.t == 2
        assert panel.dropped == []

    def test_too_few_bins(self, price_csv):
        """Test that fewer than two synchronous bins is an error."""
        path = price_csv("timestamp,entity,open,close\nd1,A,1,2\nd1,B,1,2\nd2,A,1,2\n")

        with pytest.raises(InsufficientDataError):
            synchronize(load_price_csv(path))


class TestComputeSigns:
    """Test binarization of returns."""

    def test_signs_with_zero_as_positive(self, price_csv):
        """Test that a zero return maps to +1 by default and is counted."""
        signs = compute_signs(synchronize(load_price_csv(price_csv(PRICES))))

        assert signs.signs.tolist() == [[1, -1, 1], [-1, 1, -1]]
        assert signs.zero_returns == 1
        assert signs.signs.dtype == np.int8

    def test_carry_forward_policy(self, price_csv):
        """Test that carry_forward repeats the previous sign."""
        prices = synchronize(load_price_csv(price_csv(PRICES)))

        signs = compute_signs(prices, zero_policy="carry_forward")

        assert signs.signs[1].tolist() == [-1, -1, -1]

    def test_carry_forward_without_history(self, price_csv):
        """Test that a zero return in the first bin becomes +1."""
        path = price_csv("timestamp,entity,open,close\nd1,A,2,2\nd2,A,2,1\n")

        signs = compute_signs(synchronize(load_price_csv(path)), zero_policy="carry_forward")

        assert signs.signs.tolist() == [[1, -1]]

    def test_unsynchronized_panel_rejected(self, price_csv):
        """Test that missing cells must be removed first."""
        with pytest.raises(DataValidationError):
            compute_signs(load_price_csv(price_csv(PRICES)))

    def test_sign_panel_alphabet(self):
        """Test that a SignPanel only holds -1 and +1."""
        with pytest.raises(DataValidationError):
            SignPanel(entities=["a"], timestamps=["0", "1"], signs=[[1, 0]])

    def test_sign_panel_shape(self):
        """Test that labels must match the matrix shape."""
        with pytest.raises(InputError):
            SignPanel(entities=["a", "b"], timestamps=["0"], signs=[[1]])


class TestComputeReversals:
    """Test detection of trend reversals."""

    def test_marks_sign_changes(self, sign_panel):
        """Test that each change of sign is a reversal labeled by its later bin."""
        panel = sign_panel([[1, 1, -1, 1], [-1, -1, -1, -1]])

        reversals = compute_reversals(panel)

        assert reversals.flips.tolist() == [[0, 1, 1], [0, 0, 0]]
        assert reversals.timestamps == ["1", "2", "3"]
        assert reversals.counts.tolist() == [0, 1, 1]

    def test_as_signs(self, sign_panel):
        """Test that reversals recode to +1 for a flip and -1 otherwise."""
        reversals = compute_reversals(sign_panel([[1, -1, -1]]))

        assert reversals.as_signs().signs.tolist() == [[1, -1]]

    def test_single_bin(self, sign_panel):
        """Test that a one-bin panel has no reversals to compute."""
        with pytest.raises(InsufficientDataError):
            compute_reversals(sign_panel([[1], [-1]]))

    def test_reversal_definition(self, random_panel):
        """Test that flips equal 1[s_t+1 = -s_t] on random data."""
        panel = random_panel(4, 50)

        flips = compute_reversals(panel).flips

        expected = (panel.signs[:, 1:] * panel.signs[:, :-1] == -1).astype(int)
        np.testing.assert_array_equal(flips, expected)
