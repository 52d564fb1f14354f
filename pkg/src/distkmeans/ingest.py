"""Loaders for the UCI iris/wine files and schema-checked CSV tables.

Bundled copies of ``iris.data`` and ``wine.data`` live in the package's
``data`` directory together with a SHA-256 manifest; the bundled files
are verified against it whenever they are loaded. Nothing is ever
downloaded.
"""
from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .core import DataError, DataMatrix

# integer or plain decimal; exponents are rejected on purpose
_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")

IRIS_CLASSES = ("Iris-setosa", "Iris-versicolor", "Iris-virginica")


@dataclass(frozen=True)
class DatasetSchema:
    name: str
    expected_rows: int
    expected_numeric_cols: int
    label_column: str = "none"  # "first", "last" or "none"
    delimiter: str = ","

    def __post_init__(self):
        if self.expected_rows <= 0 or self.expected_numeric_cols <= 0:
            raise ValueError("schema row and column counts must be positive")
        if self.label_column not in ("first", "last", "none"):
            raise ValueError(f"label_column must be first, last or none, got {self.label_column!r}")
        if len(self.delimiter) != 1:
            raise ValueError("delimiter must be a single character")


IRIS_SCHEMA = DatasetSchema("iris", 150, 4, "last", ",")
WINE_SCHEMA = DatasetSchema("wine", 178, 13, "first", ",")


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture file (``iris.data`` or ``wine.data``)."""
    return Path(str(resources.files("distkmeans") / "data" / name))


def fixture_hashes() -> dict[str, str]:
    manifest = fixture_path("SHA256SUMS").read_text()
    out = {}
    for line in manifest.splitlines():
        if line.strip():
            digest, name = line.split()
            out[name] = digest
    return out


def verify_fixture(path: Path) -> None:
    path = Path(path)
    expected = fixture_hashes().get(path.name)
    if expected is None:
        raise DataError(f"{path.name} is not listed in the fixture manifest")
    actual = hashlib.sha256(path.read_bytes()).hexdigest()
    if actual != expected:
        raise DataError(f"{path} content hash {actual[:12]}... does not match manifest {expected[:12]}...")


def parse_number(text: str, line: int, column: int) -> float:
    field = text.strip()
    if not _NUMBER.match(field):
        raise DataError(f"not a decimal number: {field!r}", line=line, column=column)
    return float(field)


def _read_table(path, schema: DatasetSchema):
    width = schema.expected_numeric_cols + (schema.label_column != "none")
    values, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(schema.delimiter)
            if len(fields) != width:
                raise DataError(
                    f"expected {width} fields separated by {schema.delimiter!r}, found {len(fields)}",
                    line=lineno,
                )
            if schema.label_column == "first":
                label, numeric, offset = fields[0].strip(), fields[1:], 2
            elif schema.label_column == "last":
                label, numeric, offset = fields[-1].strip(), fields[:-1], 1
            else:
                label, numeric, offset = None, fields, 1
            values.append([parse_number(f, lineno, j + offset) for j, f in enumerate(numeric)])
            labels.append(label)
    if len(values) != schema.expected_rows:
        raise DataError(f"{schema.name}: expected {schema.expected_rows} data rows, found {len(values)}")
    arr = np.array(values, dtype=np.float64)
    return arr, (tuple(labels) if schema.label_column != "none" else None)


def load_csv(path, schema: DatasetSchema) -> DataMatrix:
    values, labels = _read_table(path, schema)
    return DataMatrix(values, labels)


def _check_classes(name: str, labels, expected: dict[str, int]) -> None:
    counts = Counter(labels)
    if dict(counts) != expected:
        raise DataError(f"{name}: class counts {dict(sorted(counts.items()))} differ from {expected}")


def load_iris(path=None) -> DataMatrix:
    """150 x 4 iris measurements with species labels.

    Without a path the bundled, hash-verified copy is used.
    """
    if path is None:
        path = fixture_path("iris.data")
        verify_fixture(path)
    data = load_csv(path, IRIS_SCHEMA)
    _check_classes("iris", data.labels, {c: 50 for c in IRIS_CLASSES})
    return data


def load_wine(path=None) -> DataMatrix:
    """178 x 13 wine constituents, cultivar label (1-3) first on each line."""
    if path is None:
        path = fixture_path("wine.data")
        verify_fixture(path)
    data = load_csv(path, WINE_SCHEMA)
    bad = [lab for lab in set(data.labels) if lab not in ("1", "2", "3")]
    if bad:
        raise DataError(f"wine: unexpected class labels {sorted(bad)}")
    if len(set(data.labels)) != 3:
        raise DataError("wine: expected 3 classes")
    return data


def infer_schema(path, label_column: str = "none", delimiter: str = ",") -> DatasetSchema:
    """Schema matching the first data line of ``path`` and its row count."""
    rows = 0
    width: Optional[int] = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            if raw.strip():
                rows += 1
                if width is None:
                    width = len(raw.strip().split(delimiter))
    if not rows:
        raise DataError(f"{path}: no data rows")
    numeric = width - (label_column != "none")
    if numeric < 1:
        raise DataError(f"{path}: no numeric columns")
    return DatasetSchema(Path(path).stem, rows, numeric, label_column, delimiter)


def format_number(value: float) -> str:
    """Shortest plain-decimal text that parses back to exactly ``value``."""
    return np.format_float_positional(value, unique=True, trim="-")


def write_csv(data: DataMatrix, path, label_column: str = "none", delimiter: str = ",") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, row in enumerate(data.values):
            fields = [format_number(v) for v in row]
            if label_column == "first":
                fields.insert(0, data.labels[i])
            elif label_column == "last":
                fields.append(data.labels[i])
            fh.write(delimiter.join(fields) + "\n")


def scale(data: DataMatrix, factor: float) -> DataMatrix:
    if not factor > 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    return DataMatrix(data.values * factor, data.labels)
