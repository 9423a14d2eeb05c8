"""CSV loading, Max-Min normalization and the binary table cache.

Cache layout (``<stem>.bin`` + ``<stem>.schema``):

* ``.bin``: ``d * n`` little-endian float64 values, column-major: all ``n``
  values of column 0, then column 1, and so on. No header.
* ``.schema``: UTF-8 text. First line ``tierblocks-table v1``, second line
  ``rows=<n>``, then one ``name,kind`` line per column in order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ColumnKind, Schema, Table

CACHE_MAGIC = "tierblocks-table v1"


class IngestError(ValueError):
    pass


@dataclass
class RawTable:
    schema: Schema
    columns: list[list]


@dataclass
class CategoricalDictionary:
    """Per categorical column: sorted unique raw values and their normalized codes."""

    values: dict[str, list[str]] = field(default_factory=dict)

    def code(self, column: str, raw: str) -> int:
        return self.values[column].index(raw)

    def normalized(self, column: str, raw: str) -> float:
        vals = self.values[column]
        return 0.0 if len(vals) == 1 else vals.index(raw) / (len(vals) - 1)


def read_schema_hint(path: str | Path) -> Schema:
    names, kinds = [], []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            name, kind = (part.strip() for part in line.split(","))
            kinds.append(ColumnKind(kind))
        except ValueError:
            raise IngestError(f"{path}:{lineno}: expected 'name,kind' with kind numeric|categorical") from None
        names.append(name)
    return Schema(tuple(names), tuple(kinds))


def load_table(path: str | Path, schema: Schema) -> RawTable:
    """Parse a headed CSV; numeric columns become floats, categorical stay text."""
    columns: list[list] = [[] for _ in range(schema.d)]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if len(header) != schema.d:
            raise IngestError(f"{path}:1: header has {len(header)} columns, schema expects {schema.d}")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != schema.d:
                raise IngestError(f"{path}:{lineno}: expected {schema.d} fields, got {len(row)}")
            for c, (tok, kind) in enumerate(zip(row, schema.kinds)):
                tok = tok.strip()
                if tok == "":
                    raise IngestError(f"{path}:{lineno}: missing value in column {schema.names[c]!r}")
                if kind is ColumnKind.NUMERIC:
                    try:
                        v = float(tok)
                    except ValueError:
                        raise IngestError(f"{path}:{lineno}: non-numeric token {tok!r} in column "
                                          f"{schema.names[c]!r}") from None
                    if not np.isfinite(v):
                        raise IngestError(f"{path}:{lineno}: non-finite value in column {schema.names[c]!r}")
                    columns[c].append(v)
                else:
                    columns[c].append(tok)
    return RawTable(schema, columns)


def _minmax(col: np.ndarray) -> np.ndarray:
    lo, hi = col.min(), col.max()
    if hi == lo:
        return np.zeros_like(col)
    return (col - lo) / (hi - lo)


def normalize(raw: RawTable) -> tuple[Table, CategoricalDictionary]:
    """Max-Min scale numeric columns; categoricals are sorted, coded, then scaled.

    Constant columns map to 0.0.
    """
    n = len(raw.columns[0]) if raw.columns else 0
    out = np.empty((n, raw.schema.d))
    cats = CategoricalDictionary()
    for c, (name, kind) in enumerate(zip(raw.schema.names, raw.schema.kinds)):
        if kind is ColumnKind.CATEGORICAL:
            uniq, codes = np.unique(np.asarray(raw.columns[c], dtype=str), return_inverse=True)
            cats.values[name] = uniq.tolist()
            col = codes.astype(np.float64)
        else:
            col = np.asarray(raw.columns[c], dtype=np.float64)
        out[:, c] = _minmax(col) if n else col
    return Table(raw.schema, out), cats


def save_cache(table: Table, stem: str | Path) -> tuple[Path, Path]:
    stem = Path(stem)
    bin_path, schema_path = stem.with_suffix(".bin"), stem.with_suffix(".schema")
    table.values.T.astype("<f8").tofile(bin_path)
    lines = [CACHE_MAGIC, f"rows={table.n}"]
    lines += [f"{n},{k.value}" for n, k in zip(table.schema.names, table.schema.kinds)]
    schema_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return bin_path, schema_path


def load_cache(stem: str | Path) -> Table:
    stem = Path(stem)
    lines = stem.with_suffix(".schema").read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CACHE_MAGIC:
        raise IngestError(f"{stem}.schema: not a table cache")
    n = int(lines[1].split("=", 1)[1])
    names, kinds = [], []
    for line in lines[2:]:
        if line:
            name, kind = line.rsplit(",", 1)
            names.append(name)
            kinds.append(ColumnKind(kind))
    schema = Schema(tuple(names), tuple(kinds))
    flat = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
    if flat.size != n * schema.d:
        raise IngestError(f"{stem}.bin: expected {n * schema.d} values, found {flat.size}")
    return Table(schema, flat.reshape(schema.d, n).T.copy())


def ingest_csv(path: str | Path, schema: Schema) -> tuple[Table, CategoricalDictionary]:
    return normalize(load_table(path, schema))
