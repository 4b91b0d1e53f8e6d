"""Loading, typing and preparing tabular data.

CSV dialect: comma-delimited, '.' as decimal point, UTF-8, at most one
header row. Column hints are strings:

``binary``, ``finite-set``, ``integer-range``, ``interval``,
``positive-real``, ``full-real``
    force the domain kind;
``angle`` or ``angle:<period>``
    an angle column (radians by default) mapped to the unit circle;
``circle:<other column>``
    this column and ``<other column>`` are the coordinates of a point on the
    unit circle and are merged into one variable.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np

from .domains import (
    FINITE_KINDS,
    KINDS,
    DomainHints,
    ValueDomain,
    angles_to_circle,
    bin_column,
    infer_domain,
)


class DataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Columns of equal length with their value domains.

    Circle variables are stored as ``(m, 2)`` arrays of unit vectors, all
    others as ``(m,)`` arrays. ``metadata`` records transformations applied
    by :func:`prepare`.
    """

    column_names: tuple
    columns: tuple
    domains: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.column_names) == len(self.columns) == len(self.domains)):
            raise DataError("names, columns and domains must have equal length")
        if not self.columns:
            raise DataError("dataset has no columns")
        cols = []
        for name, c in zip(self.column_names, self.columns):
            a = np.array(c, dtype=float)
            if not np.all(np.isfinite(a)):
                raise DataError(f"column {name!r} has non-finite values")
            a.setflags(write=False)
            cols.append(a)
        lengths = {len(c) for c in cols}
        if len(lengths) != 1 or 0 in lengths:
            raise DataError("columns must be nonempty and of equal length")
        object.__setattr__(self, "columns", tuple(cols))
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "domains", tuple(self.domains))

    @property
    def row_count(self) -> int:
        return len(self.columns[0])

    def index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise DataError(f"no column named {name!r}; have {list(self.column_names)}") from None

    def select(self, names: Sequence[Union[str, int]]) -> "Dataset":
        idx = [n if isinstance(n, int) else self.index(n) for n in names]
        return Dataset(tuple(self.column_names[i] for i in idx), tuple(self.columns[i] for i in idx),
                       tuple(self.domains[i] for i in idx), dict(self.metadata))

    def summary(self) -> dict:
        """Per-column domain, range and distinct-value count."""
        cols = []
        for name, c, d in zip(self.column_names, self.columns, self.domains):
            flat = c.reshape(len(c), -1)
            cols.append({
                "name": name,
                "domain": d.to_dict(),
                "min": flat.min(axis=0).tolist(),
                "max": flat.max(axis=0).tolist(),
                "distinct": int(len(np.unique(flat, axis=0))),
            })
        return {"rows": self.row_count, "columns": cols, "metadata": self.metadata}

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _parse_hint(hint):
    if hint is None or isinstance(hint, DomainHints):
        return hint, None
    kind, _, arg = str(hint).partition(":")
    kind = kind.strip()
    if kind in KINDS and kind != "circle":
        return DomainHints(kind=kind), None
    if kind == "angle":
        return None, ("angle", float(arg) if arg else 2.0 * math.pi)
    if kind == "circle" and arg:
        return None, ("pair", arg.strip())
    raise DataError(f"unknown domain hint {hint!r}")


def _parse_float(cell: str, line: int, col_name: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"non-numeric cell {cell!r} at row {line}, column {col_name!r}") from None
    if not math.isfinite(v):
        raise DataError(f"non-finite cell {cell!r} at row {line}, column {col_name!r}")
    return v


def _looks_like_header(row) -> bool:
    for cell in row:
        try:
            float(cell)
        except ValueError:
            return True
    return False


def read_table(path, delimiter: str = ",", header: Optional[bool] = None):
    """Parse a numeric CSV into ``(names, (m, n) array)``.

    ``header=None`` detects a header row: any non-numeric cell on the first
    line makes it one. Row numbers in errors are 1-based file lines.
    """
    text = Path(path).read_text(encoding="utf-8")
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(text.splitlines(), delimiter=delimiter)) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    first = rows[0][1]
    if header is None:
        header = _looks_like_header(first)
    if header:
        names = [c.strip() for c in first]
        if len(set(names)) != len(names):
            raise DataError(f"{path}: duplicate column names in header")
        rows = rows[1:]
    else:
        names = [f"x{j}" for j in range(len(first))]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(names)
    body = np.empty((len(rows), width))
    for r, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise DataError(f"{path}: row {line} has {len(cells)} cells, expected {width}")
        for j, cell in enumerate(cells):
            body[r, j] = _parse_float(cell.strip(), line, names[j])
    return names, body


def load_csv(path, delimiter: str = ",", header: Optional[bool] = None,
             hints: Optional[Mapping[str, object]] = None, max_discrete: int = 20) -> Dataset:
    """Load a CSV and type every column with :func:`~socausal.domains.infer_domain` unless hinted.

    ``hints`` maps column names to hint strings (see module docstring) or
    :class:`~socausal.domains.DomainHints`.
    """
    names, body = read_table(path, delimiter, header)
    hints = dict(hints or {})
    unknown = set(hints) - set(names)
    if unknown:
        raise DataError(f"hints for unknown columns {sorted(unknown)}")
    consumed = set()
    for name, h in hints.items():
        _, special = _parse_hint(h)
        if special and special[0] == "pair":
            if special[1] not in names:
                raise DataError(f"circle hint on {name!r} names unknown column {special[1]!r}")
            consumed.add(special[1])
    out_names, cols, doms = [], [], []
    for j, name in enumerate(names):
        if name in consumed:
            continue
        dh, special = _parse_hint(hints.get(name))
        col = body[:, j]
        if special is None:
            base = dh or DomainHints(max_discrete=max_discrete)
            try:
                dom, vals = infer_domain(col, base, label=name)
            except ValueError as exc:
                raise DataError(f"column {name!r}: {exc}") from None
        elif special[0] == "angle":
            dom, vals = ValueDomain.circle(label=name), angles_to_circle(col, special[1])
        else:
            vals = np.column_stack([col, body[:, names.index(special[1])]])
            r = np.linalg.norm(vals, axis=1)
            if np.any(np.abs(r - 1.0) > 1e-6):
                bad = int(np.flatnonzero(np.abs(r - 1.0) > 1e-6)[0])
                raise DataError(f"columns {name!r}/{special[1]!r} are not a unit vector at data row {bad + 1}")
            dom = ValueDomain.circle(label=name)
        out_names.append(name)
        cols.append(vals)
        doms.append(dom)
    return Dataset(tuple(out_names), tuple(cols), tuple(doms), {"source": str(path)})


def from_columns(columns: Mapping[str, Sequence[float]], hints: Optional[Mapping[str, str]] = None) -> Dataset:
    """Build a dataset from in-memory 1-D columns, inferring domains as :func:`load_csv` does."""
    names, cols, doms = [], [], []
    hints = dict(hints or {})
    for name, col in columns.items():
        dh, special = _parse_hint(hints.get(name))
        if special is not None:
            raise DataError("circle hints are only supported by load_csv")
        dom, vals = infer_domain(col, dh, label=name)
        names.append(name)
        cols.append(vals)
        doms.append(dom)
    return Dataset(tuple(names), tuple(cols), tuple(doms))


def save_csv(dataset: Dataset, path) -> None:
    """Write the columns with shortest round-trip float formatting.

    Circle variables become two columns ``<name>.x`` and ``<name>.y``.
    """
    header, blocks = [], []
    for name, c in zip(dataset.column_names, dataset.columns):
        if c.ndim == 2:
            header += [f"{name}.x", f"{name}.y"]
            blocks += [c[:, 0], c[:, 1]]
        else:
            header.append(name)
            blocks.append(c)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*blocks):
            w.writerow([repr(float(v)) for v in row])


def prepare(dataset: Dataset, bins: Union[None, int, Mapping[str, int]] = None) -> Dataset:
    """Bin continuous columns into equal-width intervals.

    ``bins`` is one count for every continuous column or a per-column
    mapping. Finite and circle columns are left unchanged, so applying
    ``prepare`` twice with the same options gives the same dataset.
    """
    if bins is None:
        return dataset
    per = bins if isinstance(bins, Mapping) else {n: bins for n in dataset.column_names}
    cols, doms = list(dataset.columns), list(dataset.domains)
    log = dict(dataset.metadata.get("binned", {}))
    for j, name in enumerate(dataset.column_names):
        nb = per.get(name)
        if nb is None or doms[j].kind in FINITE_KINDS or doms[j].kind == "circle":
            continue
        vals, dom = bin_column(cols[j], nb)
        cols[j] = vals
        doms[j] = replace(dom, label=name)
        log[name] = int(nb)
    meta = dict(dataset.metadata)
    if log:
        meta["binned"] = log
    return Dataset(dataset.column_names, tuple(cols), tuple(doms), meta)


def hints_from_strings(items: Sequence[str]) -> Dict[str, str]:
    """Parse ``name=hint`` command-line items."""
    out = {}
    for it in items:
        name, sep, hint = it.partition("=")
        if not sep or not name or not hint:
            raise DataError(f"domain hint {it!r} is not of the form name=hint")
        _parse_hint(hint)
        out[name.strip()] = hint.strip()
    return out
