"""Field-year yield dataset: schema bookkeeping, CSV loading, validation.

A dataset is a rectangular table of field-year rows. Each row has a free-text
unique identifier, one finite numeric value per schema variable, and a yield
target (t/ha). Categorical practices arrive already integer-coded upstream,
so every cell is parsed as a float and missing values are a hard error
rather than something to impute.

CSV wire format::

    row_id,<feature names in schema order>,yield

Schema description files are CSV with one variable per line::

    name,category,encoding

where category is one of Soil, Management, Meteorological and encoding is a
free-text note for coded variables (may be empty).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyFile, MissingColumn, MissingValue, NonNumericCell

ROW_ID_COLUMN = "row_id"
TARGET_COLUMN = "yield"


class Category(Enum):
    SOIL = "Soil"
    MANAGEMENT = "Management"
    METEOROLOGICAL = "Meteorological"


@dataclass(frozen=True)
class SchemaEntry:
    name: str
    category: Category
    encoding: str = ""

    def __post_init__(self):
        if not self.name or not self.name.strip():
            raise ValueError("variable name must be non-empty")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered, immutable catalog of explanatory variables."""

    entries: tuple[SchemaEntry, ...]

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate variable names in schema: {dupes}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def index(self, name: str) -> int:
        for i, e in enumerate(self.entries):
            if e.name == name:
                return i
        raise KeyError(name)


def catalog_summary(schema: FeatureSchema) -> dict[Category, int]:
    """Count variables per category; every category is present in the result."""
    counts = {c: 0 for c in Category}
    for e in schema.entries:
        counts[e.category] += 1
    return counts


def _soil(name):
    return SchemaEntry(name, Category.SOIL)


def _management(name, encoding=""):
    return SchemaEntry(name, Category.MANAGEMENT, encoding)


def _met(name, encoding=""):
    return SchemaEntry(name, Category.METEOROLOGICAL, encoding)


_BINARY = "No application (0) or application (1)"

_STAGES = ("early vegetative", "late vegetative", "reproductive", "ripening")


def default_schema() -> FeatureSchema:
    """The 37-variable field survey catalog: 7 soil, 10 management, 20 weather."""
    entries = [
        _soil("Organic matter content"),
        _soil("Total carbon"),
        _soil("Total nitrogen"),
        _soil("Electrical conductivity"),
        _soil("Sand"),
        _soil("Carbon-nitrogen ratio"),
        _soil("Available phosphorus"),
        _management("Variety",
                    "Gohyakugawa (0), Tennotsubu (1), Fukunoka (2), Sakurafukuhime (3)"),
        _management("Days to heading", "Days from transplanting to heading"),
        _management("Planting system", "Direct seeding (0) or transplanting (1)"),
        _management("Organic", "Non-organic farming (0) or organic farming (1)"),
        _management("Green manure", _BINARY),
        _management("Manure", _BINARY),
        _management("Soil amendments", _BINARY),
        _management("Chemical herbicide", _BINARY),
        _management("Chemical pesticide and fungicide", _BINARY),
        _management("Years of production", "Cumulative years of rice production"),
    ]
    for family, what in [
        ("Average temperature", "Mean temperature"),
        ("Max temperature", "Maximum temperature"),
        ("Min temperature", "Minimum temperature"),
        ("Precipitation", "Precipitation"),
        ("Radiation", "Mean solar radiation"),
    ]:
        for k, stage in enumerate(_STAGES, start=1):
            entries.append(_met(f"{family}{k}", f"{what}, {stage} stage"))
    return FeatureSchema(tuple(entries))


@dataclass(frozen=True)
class Dataset:
    """Validated numeric table ready for model fitting.

    features is (n_rows, n_variables) float64 in schema order; targets is
    (n_rows,) float64. Arrays are frozen after construction.
    """

    schema: FeatureSchema
    row_ids: tuple[str, ...]
    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        n = len(self.row_ids)
        if self.features.shape != (n, len(self.schema)):
            raise ValueError(
                f"features shape {self.features.shape} does not match "
                f"{n} rows x {len(self.schema)} variables"
            )
        if self.targets.shape != (n,):
            raise ValueError("targets length does not match row count")
        if len(set(self.row_ids)) != n:
            raise ValueError("row identifiers must be unique")
        if n and not (np.isfinite(self.features).all()
                      and np.isfinite(self.targets).all()):
            raise ValueError("dataset contains non-finite values")
        self.features.setflags(write=False)
        self.targets.setflags(write=False)

    def __len__(self) -> int:
        return len(self.row_ids)

    def drop_row(self, i: int) -> "Dataset":
        """Copy of the dataset without row i (leave-one-out helper)."""
        keep = [j for j in range(len(self)) if j != i]
        return Dataset(
            self.schema,
            tuple(self.row_ids[j] for j in keep),
            self.features[keep].copy(),
            self.targets[keep].copy(),
        )


def _parse_cell(raw: str, row_label: str, column: str) -> float:
    text = raw.strip()
    if text == "":
        raise MissingValue(row_label, column)
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCell(row_label, column, raw) from None
    if not np.isfinite(value):
        raise NonNumericCell(row_label, column, raw)
    return value


def _as_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def load_dataset(source, schema: FeatureSchema) -> Dataset:
    """Parse and validate a dataset CSV (text, bytes, or file-like source).

    The header must contain row_id, every schema variable, and yield; columns
    may appear in any order and unknown columns are ignored. Every data cell
    must parse as a finite real. Raises MissingColumn, NonNumericCell,
    MissingValue, or EmptyFile.
    """
    text = _as_text(source)
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyFile("dataset CSV has no header row")
    header = [h.strip() for h in rows[0]]
    position = {name: i for i, name in enumerate(header)}
    for required in (ROW_ID_COLUMN, *schema.names, TARGET_COLUMN):
        if required not in position:
            raise MissingColumn(required)
    data_rows = rows[1:]
    if not data_rows:
        raise EmptyFile("dataset CSV has a header but no data rows")

    row_ids: list[str] = []
    features = np.empty((len(data_rows), len(schema)), dtype=np.float64)
    targets = np.empty(len(data_rows), dtype=np.float64)
    for r, record in enumerate(data_rows):
        def cell(column: str, record=record, r=r) -> str:
            i = position[column]
            if i >= len(record):
                raise MissingValue(f"data row {r + 1}", column)
            return record[i]

        row_id = cell(ROW_ID_COLUMN).strip()
        if row_id == "":
            raise MissingValue(f"data row {r + 1}", ROW_ID_COLUMN)
        if row_id in row_ids:
            raise ValueError(f"duplicate row_id: {row_id!r}")
        row_ids.append(row_id)
        for j, name in enumerate(schema.names):
            features[r, j] = _parse_cell(cell(name), row_id, name)
        targets[r] = _parse_cell(cell(TARGET_COLUMN), row_id, TARGET_COLUMN)

    return Dataset(schema, tuple(row_ids), features, targets)


def dataset_to_csv(data: Dataset) -> str:
    """Serialize back to the wire format; load_dataset round-trips it."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([ROW_ID_COLUMN, *data.schema.names, TARGET_COLUMN])
    for i, row_id in enumerate(data.row_ids):
        writer.writerow([
            row_id,
            *(repr(v) for v in data.features[i].tolist()),
            repr(float(data.targets[i])),
        ])
    return out.getvalue()


def load_schema(source) -> FeatureSchema:
    """Parse a schema description file: one `name,category,encoding` per line."""
    text = _as_text(source)
    reader = csv.reader(io.StringIO(text))
    entries = []
    by_value = {c.value: c for c in Category}
    for lineno, record in enumerate(reader, start=1):
        if not record or not any(cell.strip() for cell in record):
            continue
        if len(record) < 2:
            raise ValueError(f"schema line {lineno}: expected name,category[,encoding]")
        name = record[0].strip()
        category = record[1].strip()
        if category not in by_value:
            raise ValueError(
                f"schema line {lineno}: unknown category {category!r} "
                f"(expected one of {sorted(by_value)})"
            )
        encoding = record[2].strip() if len(record) > 2 else ""
        entries.append(SchemaEntry(name, by_value[category], encoding))
    if not entries:
        raise EmptyFile("schema file has no entries")
    return FeatureSchema(tuple(entries))


def schema_to_csv(schema: FeatureSchema) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    for e in schema.entries:
        writer.writerow([e.name, e.category.value, e.encoding])
    return out.getvalue()


def synthetic_dataset(seed: int = 42, n_rows: int = 66,
                      schema: FeatureSchema | None = None) -> Dataset:
    """Generate a plausible stand-in table for demos and tests.

    The real field survey is not redistributable, so this draws each
    variable from a range loosely matching its meaning (binary codes for
    practices, degrees Celsius for temperatures, and so on) and builds the
    yield target from a handful of smooth effects plus noise. Deterministic
    in (seed, n_rows).
    """
    if schema is None:
        schema = default_schema()
    rng = np.random.default_rng(seed)
    n_vars = len(schema)
    features = np.empty((n_rows, n_vars))
    for j, entry in enumerate(schema.entries):
        name = entry.name
        if entry.category is Category.SOIL:
            features[:, j] = np.round(rng.uniform(0.5, 60.0, n_rows), 2)
        elif name == "Variety":
            features[:, j] = rng.integers(0, 4, n_rows)
        elif name == "Days to heading":
            features[:, j] = rng.integers(55, 95, n_rows)
        elif name == "Years of production":
            features[:, j] = rng.integers(1, 40, n_rows)
        elif entry.category is Category.MANAGEMENT:
            features[:, j] = rng.integers(0, 2, n_rows)
        elif "temperature" in name:
            features[:, j] = np.round(rng.uniform(8.0, 33.0, n_rows), 1)
        elif name.startswith("Precipitation"):
            features[:, j] = np.round(rng.uniform(40.0, 420.0, n_rows), 1)
        else:  # radiation
            features[:, j] = np.round(rng.uniform(9.0, 24.0, n_rows), 1)

    names = list(schema.names)

    def col(name):
        return features[:, names.index(name)] if name in names else 0.0

    yield_t_ha = (
        4.2
        + 0.035 * col("Total nitrogen")
        + 0.6 * col("Planting system")
        - 0.004 * np.square(col("Average temperature3") - 24.0)
        + 0.02 * col("Radiation3")
        - 0.001 * col("Precipitation4")
        + rng.normal(0.0, 0.35, n_rows)
    )
    targets = np.round(np.maximum(np.asarray(yield_t_ha, dtype=float), 0.8), 3)
    row_ids = tuple(f"field_{i + 1:03d}" for i in range(n_rows))
    return Dataset(schema, row_ids, features, targets)
