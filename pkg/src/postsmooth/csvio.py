"""CSV conventions shared by the command line tools.

Column naming: index variables t0..t{k}, predictions yhat0..yhat{k}, labels
y0..y{k}, features x0..x{k}, and an optional group column named "group".
A column manifest may remap any of these names.  Floats are written with
repr, which round-trips every finite double exactly.
"""

from __future__ import annotations

import csv
import os
import re
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ColumnSpec",
    "ResolvedColumns",
    "read_table",
    "parse_float_columns",
    "format_float",
    "atomic_writer",
    "write_table",
]

_PATTERNS = {
    "index": re.compile(r"t\d+"),
    "prediction": re.compile(r"yhat\d+"),
    "label": re.compile(r"y\d+"),
    "feature": re.compile(r"x\d+"),
}


def _conventional(header: list[str], role: str) -> list[str]:
    pattern = _PATTERNS[role]
    found = [name for name in header if pattern.fullmatch(name)]
    return sorted(found, key=lambda name: int(re.sub(r"\D", "", name)))


@dataclass(frozen=True)
class ColumnSpec:
    """Optional overrides for which columns play which role."""

    index: tuple | None = None
    prediction: tuple | None = None
    label: tuple | None = None
    feature: tuple | None = None
    group: str | None = None

    @staticmethod
    def from_mapping(mapping: dict) -> "ColumnSpec":
        def tup(key):
            value = mapping.get(key)
            if value is None:
                return None
            if isinstance(value, str):
                value = [value]
            return tuple(value)

        return ColumnSpec(
            index=tup("index"),
            prediction=tup("prediction"),
            label=tup("label"),
            feature=tup("feature"),
            group=mapping.get("group"),
        )

    def resolve(self, header: list[str], path: str) -> "ResolvedColumns":
        roles = {}
        for role in ("index", "prediction", "label", "feature"):
            override = getattr(self, role)
            if override is not None:
                missing = [name for name in override if name not in header]
                if missing:
                    raise ValueError(
                        f"{path}: {role} columns {missing} not found in header"
                    )
                roles[role] = list(override)
            else:
                roles[role] = _conventional(header, role)
        if self.group is not None:
            if self.group not in header:
                raise ValueError(
                    f"{path}: group column {self.group!r} not found in header"
                )
            group = self.group
        else:
            group = "group" if "group" in header else None
        return ResolvedColumns(
            index=tuple(roles["index"]),
            prediction=tuple(roles["prediction"]),
            label=tuple(roles["label"]),
            feature=tuple(roles["feature"]),
            group=group,
        )


@dataclass(frozen=True)
class ResolvedColumns:
    index: tuple
    prediction: tuple
    label: tuple
    feature: tuple
    group: str | None


def read_table(path: str) -> tuple[list[str], list[list[str]]]:
    """Read a CSV into a header plus string rows, checking row widths."""
    try:
        handle = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty, expected a header row") from None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: line {line_no} has {len(row)} fields, "
                    f"header has {len(header)}"
                )
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: no data rows found")
    return header, rows


def parse_float_columns(
    header: list[str], rows: list[list[str]], columns, path: str
) -> np.ndarray:
    """Parse named columns to an (n, k) float array with line diagnostics."""
    positions = []
    for name in columns:
        try:
            positions.append(header.index(name))
        except ValueError:
            raise ValueError(f"{path}: column {name!r} not found in header") from None
    out = np.empty((len(rows), len(positions)))
    for i, row in enumerate(rows):
        for j, pos in enumerate(positions):
            text = row[pos]
            try:
                value = float(text)
            except ValueError:
                raise ValueError(
                    f"{path}: line {i + 2}, column {header[pos]!r}: "
                    f"cannot parse {text!r} as a number"
                ) from None
            if not np.isfinite(value):
                raise ValueError(
                    f"{path}: line {i + 2}, column {header[pos]!r}: "
                    f"non-finite value {text!r}"
                )
            out[i, j] = value
    return out


def format_float(value: float) -> str:
    """Shortest decimal string that parses back to the identical double."""
    return repr(float(value))


@contextmanager
def atomic_writer(path: str):
    """Write to a temp file and rename into place; failures leave no output."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise ValueError(f"output directory does not exist: {directory}")
    fd, tmp_path = tempfile.mkstemp(
        prefix=os.path.basename(path) + ".", suffix=".tmp", dir=directory
    )
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as handle:
            yield handle
        os.replace(tmp_path, path)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise


def write_table(path: str, header: list[str], rows) -> None:
    with atomic_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
