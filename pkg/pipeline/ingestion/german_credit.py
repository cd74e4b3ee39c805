import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import pandas as pd

from lib.errors import GermanParseError

logger = logging.getLogger(__name__)

CANONICAL_ROWS = 1000
CANONICAL_GOOD = 700

HOUSING_OWN = "A152"

# Attribute order of the space-separated file: (name, code set or None for numeric)
ATTRIBUTES: List[Tuple[str, Union[Tuple[str, ...], None]]] = [
    ("checking_status", ("A11", "A12", "A13", "A14")),
    ("duration_months", None),
    ("credit_history", ("A30", "A31", "A32", "A33", "A34")),
    ("purpose", ("A40", "A41", "A42", "A43", "A44", "A45", "A46", "A47", "A48", "A49", "A410")),
    ("credit_amount", None),
    ("savings", ("A61", "A62", "A63", "A64", "A65")),
    ("employment_since", ("A71", "A72", "A73", "A74", "A75")),
    ("installment_rate", None),
    ("personal_status", ("A91", "A92", "A93", "A94", "A95")),
    ("other_debtors", ("A101", "A102", "A103")),
    ("residence_since", None),
    ("property", ("A121", "A122", "A123", "A124")),
    ("age_years", None),
    ("other_installment_plans", ("A141", "A142", "A143")),
    ("housing", ("A151", "A152", "A153")),
    ("existing_credits", None),
    ("job", ("A171", "A172", "A173", "A174")),
    ("people_liable", None),
    ("telephone", ("A191", "A192")),
    ("foreign_worker", ("A201", "A202")),
]

NUMERIC_ATTRIBUTES = [name for name, codes in ATTRIBUTES if codes is None]
CATEGORICAL_ATTRIBUTES = {name: codes for name, codes in ATTRIBUTES if codes is not None}
LABELS = {"1": "good", "2": "bad"}


@dataclass(frozen=True)
class GermanRecord:
    """One applicant of the German Credit data."""
    line_number: int
    numeric: Dict[str, float]
    categorical: Dict[str, str]
    label: str

    @property
    def good(self) -> bool:
        return self.label == "good"

    @property
    def owns_residence(self) -> bool:
        return self.categorical["housing"] == HOUSING_OWN

    @property
    def targeted(self) -> bool:
        """Applicants renting or housed for free form the targeted group."""
        return not self.owns_residence


def parse_line(line: str, line_number: int) -> GermanRecord:
    fields = line.split()
    if len(fields) != len(ATTRIBUTES) + 1:
        raise GermanParseError(line_number, f"expected {len(ATTRIBUTES) + 1} columns, found {len(fields)}")
    numeric, categorical = {}, {}
    for (name, codes), raw in zip(ATTRIBUTES, fields):
        if codes is None:
            try:
                numeric[name] = float(raw)
            except ValueError:
                raise GermanParseError(line_number, f"{name} is not numeric: {raw!r}")
        elif raw not in codes:
            raise GermanParseError(line_number, f"unknown {name} code {raw!r}")
        else:
            categorical[name] = raw
    label = LABELS.get(fields[-1])
    if label is None:
        raise GermanParseError(line_number, f"label must be 1 or 2, found {fields[-1]!r}")
    return GermanRecord(line_number, numeric, categorical, label)


def load_german(path: Union[str, Path]) -> List[GermanRecord]:
    """Parse the space-separated German Credit file.

    Args:
        path: Location of ``german.data``

    Returns:
        List[GermanRecord]: One record per non-blank line

    Raises:
        GermanParseError: On a malformed row, naming its line number
    """
    path = Path(path)
    records = []
    try:
        with path.open("r", encoding="ascii") as f:
            for line_number, line in enumerate(f, start=1):
                if line.strip():
                    records.append(parse_line(line, line_number))
    except (OSError, GermanParseError) as e:
        logger.error(f"Failed to load German Credit data from {path}: {e}")
        raise
    logger.info(f"Loaded {len(records)} German Credit records from {path}")
    return records


def check_canonical(records: List[GermanRecord]) -> List[str]:
    """Problems that show the records are not the canonical 1000-row file."""
    problems = []
    if len(records) != CANONICAL_ROWS:
        problems.append(f"expected {CANONICAL_ROWS} rows, found {len(records)}")
    good = sum(r.good for r in records)
    if good != CANONICAL_GOOD:
        problems.append(f"expected {CANONICAL_GOOD} good labels, found {good}")
    return problems


def records_to_frame(records: List[GermanRecord]) -> pd.DataFrame:
    """Records as a DataFrame with categorical columns over the full code sets."""
    frame = pd.DataFrame(
        [{**r.numeric, **r.categorical, "good": r.good, "targeted": r.targeted} for r in records],
        columns=[name for name, _ in ATTRIBUTES] + ["good", "targeted"],
    )
    for name, codes in CATEGORICAL_ATTRIBUTES.items():
        frame[name] = pd.Categorical(frame[name], categories=list(codes))
    return frame


def group_summary(records: List[GermanRecord]) -> Dict[str, float]:
    frame = records_to_frame(records)
    return {
        "rows": float(len(frame)),
        "good_rate": float(frame["good"].mean()),
        "targeted_fraction": float(frame["targeted"].mean()),
        "targeted_good_rate": float(frame.loc[frame["targeted"], "good"].mean()),
        "other_good_rate": float(frame.loc[~frame["targeted"], "good"].mean()),
    }
