"""Parsers for temperature-anomaly and ONI tables, rebaselining, alignment.

Supported layouts
-----------------
``hadcrut-ensemble``
    Comma-delimited with a header row; first column ``YYYY-MM``, one
    column per realization (HadCRUT5 ensemble series, native baseline
    1961-1990).
``gistemp``
    Either the NASA wide table (``Year,Jan,...,Dec[,J-D,...]`` after an
    optional title line, ``***`` for months not yet published) or a long
    ``YYYY-MM,value`` table. Native baseline 1951-1980. Parsed as a
    one-member ensemble.

ONI is read from ``year month value`` rows (comma or whitespace) or from the
CPC ``SEAS YR TOTAL ANOM`` layout, where the season code maps to its centre
month and the last column is the anomaly.

Every parser skips blank lines and ``#`` comments. A comment of the form
``# baseline=YYYY-MM..YYYY-MM; description`` overrides the native baseline,
which is how :func:`serialize_ensemble_csv` keeps round trips exact.
"""
from __future__ import annotations

import math
import re
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError, StructuralError
from .series import (
    GISTEMP_BASELINE,
    HADCRUT5_BASELINE,
    NATIVE,
    BaselineSpec,
    EnsembleDataset,
    MonthDate,
    MonthlySeries,
)

DATASET_KINDS = ("hadcrut-ensemble", "gistemp")

EL_NINO_THRESHOLD = 0.5
LA_NINA_THRESHOLD = -0.5

MIN_BASELINE_MONTHS = 120

SEASON_CENTRE = {
    "DJF": 1, "JFM": 2, "FMA": 3, "MAM": 4, "AMJ": 5, "MJJ": 6,
    "JJA": 7, "JAS": 8, "ASO": 9, "SON": 10, "OND": 11, "NDJ": 12,
}

_MONTH_NAMES = ("jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec")
_BASELINE_RE = re.compile(r"^#\s*baseline\s*=\s*(\S+)\s*\.\.\s*([^;\s]+)\s*(?:;\s*(.*))?$")
_MISSING = {"***", "****", "nan", "na", "-99.9", "-99.90", "-999", "-9999"}


def _lines(content: str):
    """Yield ``(lineno, stripped_line)`` for data lines; collect directives."""
    directives = {}
    rows = []
    for lineno, raw in enumerate(content.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _BASELINE_RE.match(line)
            if m:
                try:
                    directives["baseline"] = BaselineSpec(
                        MonthDate.parse(m.group(1)), MonthDate.parse(m.group(2)), (m.group(3) or "").strip()
                    )
                except DomainError as exc:
                    raise ParseError(f"bad baseline directive: {exc}", lineno) from None
            continue
        rows.append((lineno, line))
    return rows, directives


@contextmanager
def located(source: str):
    """Prefix parse and structural errors raised inside with ``source``."""
    try:
        yield
    except ParseError as exc:
        if exc.source is None and source:
            raise ParseError(exc.message, exc.line, source) from None
        raise
    except StructuralError as exc:
        if source:
            raise StructuralError(f"{source}: {exc}") from None
        raise


def _float(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"non-numeric value {token!r}", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {token!r}", lineno)
    return value


def _month(token: str, lineno: int) -> MonthDate:
    try:
        return MonthDate.parse(token)
    except DomainError:
        raise ParseError(f"bad date {token!r}, expected YYYY-MM", lineno) from None


def _check_contiguous(dates, linenos):
    for prev, cur, lineno in zip(dates, dates[1:], linenos[1:]):
        step = cur - prev
        if step == 1:
            continue
        if step <= 0:
            raise ParseError(f"month {cur} does not follow {prev}", lineno)
        raise StructuralError(f"gap at {prev.shift(1)} (line {lineno})")


def _parse_long_table(rows, source):
    """``YYYY-MM, v1[, v2, ...]`` rows with a header. Returns dates, matrix, names."""
    if not rows:
        raise ParseError("no data rows", None, source)
    header_lineno, header = rows[0]
    names = [h.strip() for h in header.split(",")]
    if len(names) < 2:
        raise ParseError("header needs a date column and at least one value column", header_lineno, source)
    width = len(names)
    dates, linenos, data = [], [], []
    for lineno, line in rows[1:]:
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != width:
            raise ParseError(f"expected {width} columns, found {len(cells)}", lineno, source)
        dates.append(_month(cells[0], lineno))
        data.append([_float(c, lineno) for c in cells[1:]])
        linenos.append(lineno)
    if not data:
        raise ParseError("header present but no data rows", header_lineno, source)
    _check_contiguous(dates, linenos)
    return dates[0], np.asarray(data, dtype=np.float64), names[1:]


def _parse_gistemp_wide(rows, source):
    """NASA ``Year,Jan..Dec,...`` layout; trailing ``***`` months are dropped."""
    header_idx = next(i for i, (_, line) in enumerate(rows) if line.lower().startswith("year"))
    header_lineno, header = rows[header_idx]
    cols = [c.strip().lower() for c in header.split(",")]
    try:
        month_cols = [cols.index(name) for name in _MONTH_NAMES]
    except ValueError:
        raise ParseError("GISTEMP header lacks Jan..Dec columns", header_lineno, source) from None
    values, first, years_seen, missing_at = [], None, [], None
    for lineno, line in rows[header_idx + 1:]:
        cells = [c.strip() for c in line.split(",")]
        if cells[0].lower() == "year":
            continue  # repeated header blocks
        if len(cells) < len(cols):
            raise ParseError(f"expected {len(cols)} columns, found {len(cells)}", lineno, source)
        try:
            year = int(cells[0])
        except ValueError:
            raise ParseError(f"bad year {cells[0]!r}", lineno, source) from None
        if years_seen and year != years_seen[-1] + 1:
            if year <= years_seen[-1]:
                raise ParseError(f"year {year} does not follow {years_seen[-1]}", lineno, source)
            raise StructuralError(f"gap at {MonthDate(years_seen[-1] + 1, 1)} (line {lineno})")
        years_seen.append(year)
        if first is None:
            first = MonthDate(year, 1)
        for m, ci in enumerate(month_cols, start=1):
            token = cells[ci]
            if token.lower() in _MISSING:
                if missing_at is None:
                    missing_at = (MonthDate(year, m), lineno)
                continue
            if missing_at is not None:
                raise StructuralError(f"gap at {missing_at[0]} (line {missing_at[1]})")
            values.append(_float(token, lineno))
    if not values:
        raise ParseError("no monthly values found", header_lineno, source)
    return first, np.asarray(values, dtype=np.float64)[:, None], ["GISTEMP"]


def parse_ensemble_csv(content: str, format: str = "hadcrut-ensemble", source: str = "") -> EnsembleDataset:
    """Parse a temperature-anomaly table into an :class:`EnsembleDataset`.

    Parameters
    ----------
    content : str
        File contents.
    format : {"hadcrut-ensemble", "gistemp"}
        Column layout, see the module docstring.
    source : str
        Name used in error messages and stored on the result.

    Raises
    ------
    ParseError
        Malformed row or non-numeric value; the message carries the line.
    StructuralError
        Calendar gap; the message names the first missing month.
    """
    if format not in DATASET_KINDS:
        raise DomainError(f"unknown dataset kind {format!r}; expected one of {DATASET_KINDS}")
    with located(source):
        return _parse_ensemble(content, format, source)


def _parse_ensemble(content, format, source):
    rows, directives = _lines(content)
    if format == "gistemp" and any(line.lower().startswith("year") for _, line in rows):
        start, data, names = _parse_gistemp_wide(rows, source)
    else:
        if format == "gistemp":
            # tolerate a title line above a long table
            while len(rows) > 1 and not rows[1][1][:1].isdigit():
                rows = rows[1:]
        start, data, names = _parse_long_table(rows, source)
    native = HADCRUT5_BASELINE if format == "hadcrut-ensemble" else GISTEMP_BASELINE
    baseline = directives.get("baseline", native)
    realizations = tuple(
        MonthlySeries(start, data[:, j], baseline, names[j]) for j in range(data.shape[1])
    )
    return EnsembleDataset(realizations, source or format, {"kind": format})


def serialize_ensemble_csv(dataset: EnsembleDataset, header_comments=()) -> str:
    """Write the wide ``Time,<label>...`` layout; floats use shortest repr."""
    out = [f"# {c}" for c in header_comments]
    b = dataset[0].baseline
    out.append(f"# baseline={b.start}..{b.end}; {b.description}")
    out.append(",".join(["Time"] + [r.label.replace(",", ";") for r in dataset]))
    mat = dataset.matrix()
    start = dataset.start
    for i in range(mat.shape[1]):
        out.append(",".join([str(start.shift(i))] + [repr(float(v)) for v in mat[:, i]]))
    return "\n".join(out) + "\n"


def parse_oni(content: str, source: str = "") -> MonthlySeries:
    """Parse an ONI table into a contiguous monthly series (index units)."""
    with located(source):
        return _parse_oni(content, source)


def _parse_oni(content, source):
    rows, _ = _lines(content)
    dates, linenos, values = [], [], []
    for pos, (lineno, line) in enumerate(rows):
        tokens = [t for t in re.split(r"[,\s]+", line) if t]
        head = tokens[0].upper()
        if head in SEASON_CENTRE:
            if len(tokens) < 3:
                raise ParseError("season row needs season, year and value", lineno, source)
            try:
                year = int(tokens[1])
            except ValueError:
                raise ParseError(f"bad year {tokens[1]!r}", lineno, source) from None
            date = MonthDate(year, SEASON_CENTRE[head])
        else:
            try:
                year = int(tokens[0])
            except ValueError:
                if pos == 0:
                    continue  # header line
                raise ParseError(f"unrecognised row {line!r}", lineno, source) from None
            if len(tokens) < 3:
                raise ParseError("row needs year, month and value", lineno, source)
            try:
                date = MonthDate(year, int(tokens[1]))
            except (ValueError, DomainError):
                raise ParseError(f"bad month {tokens[1]!r}", lineno, source) from None
        dates.append(date)
        linenos.append(lineno)
        values.append(_float(tokens[-1], lineno))
    if not values:
        raise ParseError("no ONI rows found", None, source)
    _check_contiguous(dates, linenos)
    return MonthlySeries(dates[0], values, NATIVE, "ONI")


def serialize_series_csv(series: MonthlySeries, header_comments=()) -> str:
    out = [f"# {c}" for c in header_comments]
    out.append("year,month,value")
    for d, v in zip(series.dates(), series.values):
        out.append(f"{d.year},{d.month},{float(v)!r}")
    return "\n".join(out) + "\n"


def classify_enso(value: float) -> str:
    """``"el_nino"`` at +0.5 or above, ``"la_nina"`` at -0.5 or below."""
    if value >= EL_NINO_THRESHOLD:
        return "el_nino"
    if value <= LA_NINA_THRESHOLD:
        return "la_nina"
    return "neutral"


def rebaseline(series: MonthlySeries, target: BaselineSpec) -> MonthlySeries:
    """Subtract the mean over ``target`` so that window averages to zero.

    The part of the window covered by the series must hold at least
    120 months.
    """
    lo = max(target.start, series.start)
    hi = min(target.end, series.end)
    if hi < lo:
        raise DomainError(
            f"baseline window {target.start}..{target.end} lies outside {series.start}..{series.end}"
        )
    n = hi - lo + 1
    if n < MIN_BASELINE_MONTHS:
        raise DomainError(f"baseline window covers {n} months of data, need >= {MIN_BASELINE_MONTHS}")
    i0 = lo - series.start
    shift = float(np.mean(series.values[i0:i0 + n]))
    return series.with_values(series.values - shift, baseline=target)


def rebaseline_ensemble(dataset: EnsembleDataset, target: BaselineSpec) -> EnsembleDataset:
    return dataset.map(lambda r: rebaseline(r, target))


ALIGN_POLICIES = ("neutral-zero", "truncate-to-overlap")


@dataclass(frozen=True, eq=False)
class AlignedPanel:
    """Temperature and ONI on one monthly index.

    ``filled`` flags months whose ONI value was imputed as neutral (0.0).
    """

    temp: MonthlySeries
    oni: MonthlySeries
    filled: np.ndarray

    @property
    def start(self) -> MonthDate:
        return self.temp.start

    @property
    def end(self) -> MonthDate:
        return self.temp.end

    def __len__(self):
        return len(self.temp)

    @property
    def y(self) -> np.ndarray:
        return self.temp.values

    @property
    def x_oni(self) -> np.ndarray:
        return self.oni.values


def align(temp: MonthlySeries, oni: MonthlySeries, policy: str = "neutral-zero") -> AlignedPanel:
    """Put ``temp`` and ``oni`` on a common calendar.

    ``neutral-zero`` keeps the whole temperature span and sets ONI to 0.0
    wherever it is not observed; ``truncate-to-overlap`` clips both series
    to their intersection.
    """
    if policy == "truncate-to-overlap":
        lo, hi = max(temp.start, oni.start), min(temp.end, oni.end)
        if hi < lo:
            raise DomainError(
                f"no overlap between temperature {temp.start}..{temp.end} and ONI {oni.start}..{oni.end}"
            )
        t, o = temp.slice(lo, hi), oni.slice(lo, hi)
        filled = np.zeros(len(t), dtype=bool)
        filled.setflags(write=False)
        return AlignedPanel(t, o, filled)
    if policy != "neutral-zero":
        raise DomainError(f"unknown alignment policy {policy!r}; expected one of {ALIGN_POLICIES}")
    n = len(temp)
    x = np.zeros(n)
    filled = np.ones(n, dtype=bool)
    lo, hi = max(temp.start, oni.start), min(temp.end, oni.end)
    if lo <= hi:
        i0, j0, m = lo - temp.start, lo - oni.start, hi - lo + 1
        x[i0:i0 + m] = oni.values[j0:j0 + m]
        filled[i0:i0 + m] = False
    filled.setflags(write=False)
    return AlignedPanel(temp, MonthlySeries(temp.start, x, oni.baseline, oni.label or "ONI"), filled)
