"""Result tables: ingestion of published "mean±std" grids, bold/star annotation
and delimiter-separated output.

Text format (comma separated, UTF-8)::

    task,quality,algo_a@n=5,algo_b@n=10
    2c_vs_64zg,good,19.13±0.27,**19.52±0.26**
    corridor,poor,5.61±0.35*,Not available

Every algorithm column must declare its seed count with an ``@n=`` suffix.
Cells may carry published annotations (``**bold**`` and a trailing ``*``);
these are kept apart from the numbers so a re-annotation can be compared with
them. Empty cells, ``-`` and ``Not available`` mean "no result".
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..errors import ConfigurationError, ParseError
from .stats import SummaryStat, WelchResult, welch_test

MISSING_TOKENS = {"", "-", "not available", "n/a", "na"}
_HEADER_RE = re.compile(r"^(?P<algo>[^@]+)@n=(?P<n>\d+)$")
_NUMBER = r"[-+−]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_CELL_RE = re.compile(rf"^(?P<mean>{_NUMBER})\s*(?:±|\+/-|\+-)\s*(?P<std>{_NUMBER})$")


@dataclass(frozen=True)
class Column:
    algo: str
    n: int
    source: str = "literature"


@dataclass
class ResultTable:
    """Grid of summary statistics keyed by (task, quality) rows and algorithm columns."""

    columns: list[Column]
    rows: list[tuple[str, str]]
    cells: list[list[SummaryStat | None]]
    printed_bold: list[list[bool]] = field(default_factory=list)
    printed_star: list[list[bool]] = field(default_factory=list)

    def row_index(self, task: str, quality: str) -> int:
        try:
            return self.rows.index((task, quality))
        except ValueError:
            raise ConfigurationError(f"no row {task}/{quality}") from None


def parse_cell(text: str, n: int, label: str, source: str = "literature",
               row: int | None = None, column: int | None = None) -> tuple[SummaryStat | None, bool, bool]:
    """Returns (stat or None, printed bold, printed star)."""
    s = text.strip()
    if s.lower() in MISSING_TOKENS:
        return None, False, False
    bold = False
    if s.startswith("**") and s.endswith("**") and len(s) > 4:
        bold, s = True, s[2:-2].strip()
    star = False
    if s.endswith("*"):
        star, s = True, s[:-1].strip()
    m = _CELL_RE.match(s)
    if not m:
        raise ParseError(f"cannot parse cell {text!r} as mean±std", row=row, column=column)
    mean = float(m.group("mean").replace("−", "-"))
    std = float(m.group("std").replace("−", "-"))
    if std < 0:
        raise ParseError(f"negative std in cell {text!r}", row=row, column=column)
    return SummaryStat(mean, std, n, label, source), bold, star


def parse_header(fields: Sequence[str], ours: Sequence[str] = ()) -> list[Column]:
    if len(fields) < 4 or [f.strip().lower() for f in fields[:2]] != ["task", "quality"]:
        raise ParseError("header must start with 'task,quality' and list at least two algorithms", row=1)
    cols = []
    for j, f in enumerate(fields[2:], start=3):
        m = _HEADER_RE.match(f.strip())
        if not m:
            raise ParseError(f"column {f!r} must declare its seed count as <algo>@n=<seeds>", row=1, column=j)
        n = int(m.group("n"))
        if n < 1:
            raise ParseError(f"column {f!r} has a non-positive seed count", row=1, column=j)
        algo = m.group("algo").strip()
        cols.append(Column(algo, n, "ours" if algo in ours else "literature"))
    return cols


def ingest_result_table(source: str | Path | io.TextIOBase, ours: Sequence[str] = ()) -> ResultTable:
    """Parse a result table from a path or an open text stream.

    Row and column numbers in errors are 1-based and count the header line.
    ``ours`` names columns produced by this library (tagged source "ours").
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            lines = list(csv.reader(fh))
    else:
        lines = list(csv.reader(source))
    lines = [ln for ln in lines if any(c.strip() for c in ln)]
    if not lines:
        raise ParseError("empty result table", row=1)
    columns = parse_header(lines[0], ours)
    table = ResultTable(columns, [], [], [], [])
    for i, rec in enumerate(lines[1:], start=2):
        if len(rec) != len(columns) + 2:
            raise ParseError(f"expected {len(columns) + 2} fields, found {len(rec)}", row=i)
        stats, bolds, stars = [], [], []
        for j, (col, text) in enumerate(zip(columns, rec[2:]), start=3):
            st, b, s = parse_cell(text, col.n, col.algo, col.source, row=i, column=j)
            stats.append(st)
            bolds.append(b)
            stars.append(s)
        table.rows.append((rec[0].strip(), rec[1].strip()))
        table.cells.append(stats)
        table.printed_bold.append(bolds)
        table.printed_star.append(stars)
    return table


# -- annotation -------------------------------------------------------------------------

@dataclass
class AnnotatedRow:
    key: tuple[str, str]
    cells: list[SummaryStat | None]
    bold: int
    starred: list[bool]
    tests: list[WelchResult | None]


@dataclass
class AnnotatedTable:
    columns: list[Column]
    rows: list[AnnotatedRow]

    def row(self, task: str, quality: str) -> AnnotatedRow:
        for r in self.rows:
            if r.key == (task, quality):
                return r
        raise ConfigurationError(f"no row {task}/{quality}")


def annotate_row(key: tuple[str, str], cells: Sequence[SummaryStat | None]) -> AnnotatedRow:
    """Bold the highest mean (first in column order on ties) and star every entry
    whose Welch p-value against the bold entry is at least 0.05."""
    present = [j for j, c in enumerate(cells) if c is not None]
    if len(present) < 2:
        raise ConfigurationError(f"row {key} needs at least two results, has {len(present)}")
    best = max(c.mean for c in cells if c is not None)
    bold = next(j for j in present if cells[j].mean == best)
    starred = [False] * len(cells)
    tests: list[WelchResult | None] = [None] * len(cells)
    for j in present:
        if j == bold:
            continue
        res = welch_test(cells[j], cells[bold])
        tests[j] = res
        starred[j] = cells[j].mean == best or not res.significant
    return AnnotatedRow(key, list(cells), bold, starred, tests)


def annotate_table(table: ResultTable) -> AnnotatedTable:
    return AnnotatedTable(list(table.columns),
                          [annotate_row(k, c) for k, c in zip(table.rows, table.cells)])


def matches_printed(table: ResultTable, annotated: AnnotatedTable, task: str, quality: str) -> bool:
    """Whether our bold/star flags equal the published ones on a row (missing cells ignored)."""
    i = table.row_index(task, quality)
    row = annotated.rows[i]
    for j, cell in enumerate(table.cells[i]):
        if cell is None:
            continue
        if (j == row.bold) != table.printed_bold[i][j] or row.starred[j] != table.printed_star[i][j]:
            return False
    return True


def format_cell(stat: SummaryStat | None, bold: bool = False, star: bool = False, digits: int = 2) -> str:
    if stat is None:
        return "Not available"
    s = f"{stat.mean:.{digits}f}±{stat.std:.{digits}f}"
    if star:
        s += "*"
    return f"**{s}**" if bold else s


def render_table(annotated: AnnotatedTable, digits: int = 2, delimiter: str = ",") -> str:
    """The annotated grid in the ingestible text format."""
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(["task", "quality"] + [f"{c.algo}@n={c.n}" for c in annotated.columns])
    for r in annotated.rows:
        w.writerow(list(r.key) + [format_cell(c, j == r.bold, r.starred[j], digits) for j, c in enumerate(r.cells)])
    return buf.getvalue()


def read_references(path: str | Path) -> dict[tuple[str, str], float]:
    """Reference (best published) scores: lines ``task,quality,score``; ``#`` comments allowed."""
    refs: dict[tuple[str, str], float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for i, rec in enumerate(csv.reader(fh), start=1):
            if not rec or not "".join(rec).strip() or rec[0].lstrip().startswith("#"):
                continue
            if len(rec) != 3:
                raise ParseError(f"expected task,quality,score; found {len(rec)} fields", row=i)
            try:
                refs[(rec[0].strip(), rec[1].strip())] = float(rec[2])
            except ValueError:
                raise ParseError(f"score {rec[2]!r} is not a number", row=i, column=3) from None
    return refs
