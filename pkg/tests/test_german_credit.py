import os

import pytest

from lib.errors import GermanParseError
from pipeline.ingestion.german_credit import (
    ATTRIBUTES,
    check_canonical,
    group_summary,
    load_german,
    parse_line,
    records_to_frame,
)

SAMPLE = "A11 6 A34 A43 1169 A65 A75 4 A93 A101 4 A121 67 A143 A152 2 A173 1 A192 A201 1"
RENTER = "A12 48 A32 A43 5951 A61 A73 2 A92 A101 2 A121 22 A143 A151 1 A173 1 A191 A201 2"

GERMAN_CREDIT_PATH = os.getenv("GERMAN_CREDIT_PATH")
needs_data = pytest.mark.skipif(not GERMAN_CREDIT_PATH, reason="GERMAN_CREDIT_PATH not set")


def test_parse_line():
    record = parse_line(SAMPLE, 1)
    assert record.numeric["duration_months"] == 6.0
    assert record.numeric["credit_amount"] == 1169.0
    assert record.categorical["housing"] == "A152"
    assert record.good
    assert record.owns_residence and not record.targeted
    renter = parse_line(RENTER, 2)
    assert renter.targeted and not renter.good


@pytest.mark.parametrize("line, fragment", [
    (SAMPLE.replace("A152", "A159"), "housing"),
    (SAMPLE.replace(" 1169 ", " lots "), "credit_amount"),
    (SAMPLE[:-1] + "3", "label"),
    (SAMPLE + " extra", "columns"),
])
def test_parse_errors_name_the_line(line, fragment):
    with pytest.raises(GermanParseError) as info:
        parse_line(line, 17)
    assert info.value.line_number == 17
    assert "line 17" in str(info.value)
    assert fragment in str(info.value)


def test_load_german(tmp_path):
    path = tmp_path / "german.data"
    path.write_text(f"{SAMPLE}\n{RENTER}\n\n", encoding="ascii")
    records = load_german(path)
    assert [r.line_number for r in records] == [1, 2]
    assert check_canonical(records) == ["expected 1000 rows, found 2", "expected 700 good labels, found 1"]


def test_load_german_reports_bad_row(tmp_path):
    path = tmp_path / "german.data"
    path.write_text(f"{SAMPLE}\n{SAMPLE.replace('A201', 'A209')}\n", encoding="ascii")
    with pytest.raises(GermanParseError) as info:
        load_german(path)
    assert info.value.line_number == 2


def test_records_to_frame():
    frame = records_to_frame([parse_line(SAMPLE, 1), parse_line(RENTER, 2)])
    assert list(frame.columns) == [name for name, _ in ATTRIBUTES] + ["good", "targeted"]
    assert list(frame["housing"].cat.categories) == ["A151", "A152", "A153"]
    assert frame["targeted"].tolist() == [False, True]


@needs_data
def test_canonical_dataset():
    """Group sizes and good rates of the canonical file"""
    records = load_german(GERMAN_CREDIT_PATH)
    assert check_canonical(records) == []
    summary = group_summary(records)
    assert summary["targeted_fraction"] == pytest.approx(0.28, abs=0.01)
    assert summary["targeted_good_rate"] == pytest.approx(0.60, abs=0.01)
    assert summary["other_good_rate"] == pytest.approx(0.74, abs=0.01)
