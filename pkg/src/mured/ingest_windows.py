"""Event-log ingestion and windowed time-series of the entropy measures.

An EventLog is an ordered set of categorical records. Tabulation turns a log
(or a window of it) into a JointTable by plug-in counting; the window
functions then sweep the measures over positions, producing one SeriesPoint
per window. With a global alphabet scope the capacity term is comparable
across windows; per-window scope lets the observed support grow instead.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core_entropy import (
    Base,
    JointTable,
    SupportMode,
    VariableSpec,
    entropy,
    max_entropy,
    shannon_redundancy,
)
from .errors import InvalidTableError, ParseError, UnknownVariableError
from .multivariate import decompose

_EPOCH_NAIVE = datetime(1970, 1, 1)
_EPOCH_UTC = datetime(1970, 1, 1, tzinfo=timezone.utc)


class MissingPolicy(str, enum.Enum):
    """How to treat empty fields when loading events."""

    STRICT = "strict"  # any empty field is a parse error
    DROP = "drop"      # drop the row, count it
    KEEP = "keep"      # empty string is a legal category


class AlphabetScope(str, enum.Enum):
    GLOBAL = "global"
    PER_WINDOW = "per-window"


class TimeTier(str, enum.Enum):
    """How time keys are ordered: ISO datetimes, numbers, or plain strings."""

    ISO = "iso"
    NUMERIC = "numeric"
    LEXICOGRAPHIC = "lexicographic"


def _classify_time_keys(values: Sequence[str]) -> tuple[TimeTier, list]:
    """Sortable keys for the time column.

    All-ISO values sort as datetimes; if some but not all parse as ISO the
    file is ambiguous and rejected. All-numeric values sort as floats;
    anything else falls back to lexicographic order.
    """
    parsed: list[datetime] = []
    n_iso = 0
    for v in values:
        try:
            parsed.append(datetime.fromisoformat(v))
            n_iso += 1
        except (ValueError, TypeError):
            parsed.append(None)  # type: ignore[arg-type]
    if n_iso == len(values) and values:
        aware = [dt.tzinfo is not None for dt in parsed]
        if any(aware) and not all(aware):
            raise ParseError("time column mixes offset-aware and naive timestamps")
        return TimeTier.ISO, parsed
    if 0 < n_iso < len(values):
        raise ParseError(
            f"time column mixes ISO and non-ISO values ({n_iso} of {len(values)} parse)"
        )
    try:
        return TimeTier.NUMERIC, [float(v) for v in values]
    except (ValueError, TypeError):
        return TimeTier.LEXICOGRAPHIC, list(values)


def _time_positions(tier: TimeTier, keys: list) -> np.ndarray:
    if tier is TimeTier.ISO:
        epoch = _EPOCH_UTC if keys and keys[0].tzinfo is not None else _EPOCH_NAIVE
        return np.asarray([(dt - epoch).total_seconds() for dt in keys], dtype=np.float64)
    if tier is TimeTier.NUMERIC:
        return np.asarray(keys, dtype=np.float64)
    raise ParseError(
        "time-based windows need ISO or numeric time keys; this column only "
        "sorts lexicographically"
    )


def _position_to_key(tier: TimeTier, pos: float):
    if tier is TimeTier.ISO:
        return (_EPOCH_NAIVE + timedelta(seconds=pos)).isoformat()
    return pos


@dataclass(frozen=True, eq=False)
class EventLog:
    """Immutable ordered records of categorical values.

    When ``time_column`` is set the rows are sorted by that column on
    construction (ISO datetimes, then all-numeric, then lexicographic order).
    """

    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    time_column: str | None = None
    dropped_rows: int = 0

    def __post_init__(self):
        columns = tuple(self.columns)
        object.__setattr__(self, "columns", columns)
        if len(set(columns)) != len(columns) or not columns:
            raise ParseError(f"column names must be nonempty and unique: {list(columns)}")
        rows = tuple(tuple(r) for r in self.rows)
        width = len(columns)
        for i, r in enumerate(rows):
            if len(r) != width:
                raise ParseError(f"row {i} has {len(r)} values, expected {width}")
        if self.time_column is not None:
            if self.time_column not in columns:
                raise UnknownVariableError(
                    f"unknown time column {self.time_column!r}; have {list(columns)}"
                )
            t = columns.index(self.time_column)
            _, keys = _classify_time_keys([r[t] for r in rows])
            order = sorted(range(len(rows)), key=lambda i: (keys[i], i))
            rows = tuple(rows[i] for i in order)
        object.__setattr__(self, "rows", rows)

    def __len__(self) -> int:
        return len(self.rows)

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise UnknownVariableError(
                f"unknown column {name!r}; have {list(self.columns)}"
            ) from None

    def column_values(self, name: str) -> list[str]:
        j = self.column_index(name)
        return [r[j] for r in self.rows]

    def slice(self, lo: int, hi: int) -> "EventLog":
        # Rows are already in time order; the slice keeps it without re-sorting.
        return EventLog(self.columns, self.rows[lo:hi], time_column=None)


def load_events(
    source,
    format: str = "csv",
    missing_policy: MissingPolicy = MissingPolicy.KEEP,
    time_column: str | None = None,
) -> EventLog:
    """Parse a delimited event file with a header row into an EventLog.

    Ragged rows are always a parse error (with the offending line number);
    ``missing_policy`` only governs empty fields.
    """
    missing_policy = MissingPolicy(missing_policy)
    if format not in ("csv", "tsv"):
        raise ParseError(f"format must be csv or tsv, got {format!r}")
    delimiter = "," if format == "csv" else "\t"

    def _parse(fh) -> EventLog:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty event file") from None
        columns = tuple(h.strip() for h in header)
        rows: list[tuple[str, ...]] = []
        dropped = 0
        for record in reader:
            if not record:
                continue
            line = reader.line_num
            if len(record) != len(columns):
                raise ParseError(
                    f"expected {len(columns)} fields, got {len(record)}", line=line
                )
            if any(v == "" for v in record):
                if missing_policy is MissingPolicy.STRICT:
                    raise ParseError("missing value", line=line)
                if missing_policy is MissingPolicy.DROP:
                    dropped += 1
                    continue
            rows.append(tuple(record))
        return EventLog(columns, tuple(rows), time_column=time_column, dropped_rows=dropped)

    if hasattr(source, "read"):
        return _parse(source)
    with open(Path(source), "r", newline="", encoding="utf-8") as fh:
        return _parse(fh)


def observed_alphabets(
    log: EventLog, variables: Sequence[str]
) -> dict[str, tuple[str, ...]]:
    """Sorted distinct values per variable over the whole log."""
    out = {}
    for name in variables:
        out[name] = tuple(sorted(set(log.column_values(name))))
    return out


def _encode(
    log: EventLog,
    variables: tuple[str, ...],
    alphabets: Mapping[str, tuple[str, ...]],
) -> list[np.ndarray]:
    codes = []
    for name in variables:
        mapping = {v: i for i, v in enumerate(alphabets[name])}
        j = log.column_index(name)
        try:
            codes.append(
                np.fromiter(
                    (mapping[r[j]] for r in log.rows), dtype=np.int64, count=len(log.rows)
                )
            )
        except KeyError as exc:
            raise InvalidTableError(
                f"value {exc.args[0]!r} of {name!r} is not in the supplied alphabet"
            ) from None
    return codes


def _counts_from_flat(flat: np.ndarray, dims: tuple[int, ...], alpha: float) -> np.ndarray:
    n_cells = int(np.prod(dims))
    counts = np.bincount(flat, minlength=n_cells).astype(np.float64).reshape(dims)
    if alpha:
        counts = counts + alpha
    return counts


def tabulate(
    log: EventLog,
    variables: Sequence[str],
    alphabets: Mapping[str, Sequence[str]] | None = None,
    alpha: float = 0.0,
) -> JointTable:
    """Count co-occurrences of the selected variables into a JointTable.

    ``alphabets`` fixes the category order per variable (the global scope of
    a windowed run); when omitted, the sorted distinct values observed in
    this log are used. ``alpha`` adds uniform additive smoothing to every
    cell; the default 0 keeps zero cells exactly zero.
    """
    names = tuple(variables)
    if not names:
        raise UnknownVariableError("select at least one variable to tabulate")
    if len(set(names)) != len(names):
        raise UnknownVariableError(f"duplicate variables: {list(names)}")
    if len(log) == 0:
        raise InvalidTableError("cannot tabulate an empty event log")
    if alpha < 0:
        raise InvalidTableError(f"smoothing alpha must be >= 0, got {alpha}")
    if alphabets is None:
        alphabets = observed_alphabets(log, names)
    else:
        alphabets = {k: tuple(v) for k, v in alphabets.items()}
    codes = _encode(log, names, alphabets)
    dims = tuple(len(alphabets[n]) for n in names)
    flat = np.ravel_multi_index(tuple(codes), dims)
    counts = _counts_from_flat(flat, dims, alpha)
    specs = tuple(VariableSpec(n, tuple(alphabets[n])) for n in names)
    return JointTable(specs, counts)


@dataclass(frozen=True)
class WindowSpec:
    """Window geometry: count-based (size/step in events) or time-based (span/step).

    Steps larger than the window leave gaps between windows; that is allowed
    but every emitted point is flagged, so a gap can never pass silently.
    """

    mode: str  # "count" or "time"
    size: float
    step: float
    alphabet_scope: AlphabetScope = AlphabetScope.GLOBAL

    def __post_init__(self):
        if self.mode not in ("count", "time"):
            raise InvalidTableError(f"window mode must be count or time, got {self.mode!r}")
        object.__setattr__(self, "alphabet_scope", AlphabetScope(self.alphabet_scope))
        if not (self.size > 0 and self.step > 0):
            raise InvalidTableError("window size/span and step must be positive")
        if self.mode == "count" and (
            int(self.size) != self.size or int(self.step) != self.step
        ):
            raise InvalidTableError("count windows need integer size and step")

    @classmethod
    def count(cls, size: int, step: int | None = None,
              alphabet_scope: AlphabetScope = AlphabetScope.GLOBAL) -> "WindowSpec":
        return cls("count", size, step if step is not None else size, alphabet_scope)

    @classmethod
    def time(cls, span: float, step: float | None = None,
             alphabet_scope: AlphabetScope = AlphabetScope.GLOBAL) -> "WindowSpec":
        return cls("time", span, step if step is not None else span, alphabet_scope)

    @property
    def has_gaps(self) -> bool:
        return self.step > self.size


MEASURES = ("h_obs", "h_max", "redundancy", "transmissions", "r_n")


@dataclass(frozen=True, eq=False)
class SeriesPoint:
    """Measures of one analysis window."""

    window_index: int
    start: object
    end: object
    event_count: int
    base: Base
    h_obs: float | None = None
    h_max: float | None = None
    redundancy: float | None = None
    transmissions: dict[str, float] | None = None
    r_n: float | None = None
    regime: str | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "window": self.window_index,
            "start": self.start,
            "end": self.end,
            "count": self.event_count,
            "base": self.base.value,
            "h_obs": self.h_obs,
            "h_max": self.h_max,
            "redundancy": self.redundancy,
            "transmissions": self.transmissions,
            "r_n": self.r_n,
            "regime": self.regime,
            "flags": list(self.flags),
        }


@dataclass(frozen=True, eq=False)
class CapacityPoint:
    """One cumulative-prefix point of the capacity curves."""

    window_index: int
    end: object
    event_count: int
    base: Base
    h_obs: float | None = None
    h_max: float | None = None
    redundancy: float | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "window": self.window_index,
            "end": self.end,
            "count": self.event_count,
            "base": self.base.value,
            "h_obs": self.h_obs,
            "h_max": self.h_max,
            "redundancy": self.redundancy,
            "flags": list(self.flags),
        }


def pair_names(variables: Sequence[str]) -> list[tuple[str, str]]:
    return list(itertools.combinations(tuple(variables), 2))


def series_csv_header(variables: Sequence[str]) -> list[str]:
    pairs = [f"T({a};{b})" for a, b in pair_names(variables)]
    return ["window", "start", "end", "count", "h_obs", "h_max", "redundancy",
            *pairs, "r_n", "regime"]


def series_csv_values(point: SeriesPoint, variables: Sequence[str]) -> list:
    pair_vals = []
    for a, b in pair_names(variables):
        key = f"{a},{b}"
        pair_vals.append(None if point.transmissions is None else point.transmissions.get(key))
    return [point.window_index, point.start, point.end, point.event_count,
            point.h_obs, point.h_max, point.redundancy, *pair_vals,
            point.r_n, point.regime]


def capacity_csv_header() -> list[str]:
    return ["window", "end", "count", "h_obs", "h_max", "redundancy"]


def capacity_csv_values(point: CapacityPoint) -> list:
    return [point.window_index, point.end, point.event_count,
            point.h_obs, point.h_max, point.redundancy]


def _count_windows(n: int, spec: WindowSpec) -> tuple[list[tuple[int, int, int]], tuple[str, ...]]:
    size, step = int(spec.size), int(spec.step)
    base_flags: tuple[str, ...] = ("gaps",) if spec.has_gaps else ()
    if size > n:
        return [(0, 0, n)], base_flags + ("window_exceeds_log",)
    windows = []
    i = 0
    start = 0
    while start < n:
        windows.append((i, start, min(start + size, n)))
        i += 1
        start = i * step
    return windows, base_flags


def _time_windows(
    positions: np.ndarray, spec: WindowSpec
) -> tuple[list[tuple[int, float, float, int, int]], tuple[str, ...]]:
    span, step = float(spec.size), float(spec.step)
    base_flags: tuple[str, ...] = ("gaps",) if spec.has_gaps else ()
    t0 = float(positions[0])
    t_last = float(positions[-1])
    windows = []
    i = 0
    while True:
        w_start = t0 + i * step
        if i > 0 and w_start > t_last:
            break
        w_end = w_start + span
        lo = int(np.searchsorted(positions, w_start, side="left"))
        hi = int(np.searchsorted(positions, w_end, side="left"))
        windows.append((i, w_start, w_end, lo, hi))
        i += 1
    return windows, base_flags


def _measure_point(
    table: JointTable,
    variables: tuple[str, ...],
    requested: frozenset,
    base: Base,
    support_mode: SupportMode,
) -> dict:
    out: dict = {}
    if "h_obs" in requested:
        out["h_obs"] = entropy(table, base).value
    if "h_max" in requested:
        out["h_max"] = max_entropy(table, support_mode, base).value
    if "redundancy" in requested:
        h_max = max_entropy(table, support_mode, Base.BITS).value
        out["redundancy"] = (
            shannon_redundancy(table, support_mode) if h_max > 0 else None
        )
    if ("transmissions" in requested or "r_n" in requested) and len(variables) >= 2:
        d = decompose(table, variables, base)
        if "transmissions" in requested:
            out["transmissions"] = {
                ",".join(k): v for k, v in d.subset_transmissions.items() if len(k) == 2
            }
        if "r_n" in requested:
            out["r_n"] = d.redundancy
            out["regime"] = d.regime
    return out


def _resolve_measures(measures: Iterable[str] | None) -> frozenset:
    if measures is None:
        return frozenset(MEASURES)
    requested = frozenset(measures)
    unknown = requested - frozenset(MEASURES)
    if unknown:
        raise UnknownVariableError(
            f"unknown measures {sorted(unknown)}; valid: {list(MEASURES)}"
        )
    return requested


def window_series(
    log: EventLog,
    variables: Sequence[str],
    spec: WindowSpec,
    measures: Iterable[str] | None = None,
    base: Base = Base.BITS,
    support_mode: SupportMode = SupportMode.ALPHABET,
    alpha: float = 0.0,
) -> list[SeriesPoint]:
    """Sweep the measures over windows of the log, one SeriesPoint per position.

    Windows with no events are emitted as flagged empty points so the series
    stays aligned with the window grid. With the global alphabet scope every
    window shares one category space and h_max is comparable across windows.
    """
    names = tuple(variables)
    if len(log) == 0:
        raise InvalidTableError("cannot window an empty event log")
    requested = _resolve_measures(measures)
    base = Base(base)
    support_mode = SupportMode(support_mode)

    global_scope = spec.alphabet_scope is AlphabetScope.GLOBAL
    alphabets = observed_alphabets(log, names) if global_scope else None
    flat = None
    dims: tuple[int, ...] = ()
    if global_scope:
        codes = _encode(log, names, alphabets)
        dims = tuple(len(alphabets[n]) for n in names)
        flat = np.ravel_multi_index(tuple(codes), dims)
        specs = tuple(VariableSpec(n, alphabets[n]) for n in names)

    if spec.mode == "count":
        windows, base_flags = _count_windows(len(log), spec)
        bounds = [(i, lo, hi, lo, hi) for i, lo, hi in windows]
        size = int(spec.size)
    else:
        if log.time_column is None:
            raise InvalidTableError("time-based windows need a log with a time column")
        tier, keys = _classify_time_keys(log.column_values(log.time_column))
        positions = _time_positions(tier, keys)
        windows, base_flags = _time_windows(positions, spec)
        bounds = [
            (i, _position_to_key(tier, s), _position_to_key(tier, e), lo, hi)
            for i, s, e, lo, hi in windows
        ]
        size = None

    points: list[SeriesPoint] = []
    for i, start_key, end_key, lo, hi in bounds:
        count = hi - lo
        flags = base_flags
        if count == 0:
            points.append(
                SeriesPoint(i, start_key, end_key, 0, base, flags=flags + ("empty",))
            )
            continue
        if spec.mode == "count" and size is not None and count < size and "window_exceeds_log" not in flags:
            flags = flags + ("partial",)
        if global_scope:
            counts = _counts_from_flat(flat[lo:hi], dims, alpha)
            table = JointTable(specs, counts)
        else:
            table = tabulate(log.slice(lo, hi), names, alphabets=None, alpha=alpha)
        measured = _measure_point(table, names, requested, base, support_mode)
        points.append(
            SeriesPoint(i, start_key, end_key, count, base, flags=flags, **measured)
        )
    return points


def capacity_series(
    log: EventLog,
    variables: Sequence[str],
    spec: WindowSpec,
    base: Base = Base.BITS,
    alpha: float = 0.0,
) -> list[CapacityPoint]:
    """Cumulative-prefix capacity curves: h_obs, h_max, and the unused fraction.

    Prefix i covers the first i*step events (or everything up to t0 + i*step
    in time mode). h_max uses the observed cumulative support, so the
    capacity grows as new category combinations appear. Redundancy is null
    while h_max is zero (a single observed outcome has no spare capacity).
    """
    names = tuple(variables)
    if len(log) == 0:
        raise InvalidTableError("cannot window an empty event log")
    base = Base(base)
    n = len(log)

    alphabets = observed_alphabets(log, names)
    codes = _encode(log, names, alphabets)
    dims = tuple(len(alphabets[nm]) for nm in names)
    flat = np.ravel_multi_index(tuple(codes), dims)
    specs = tuple(VariableSpec(nm, alphabets[nm]) for nm in names)

    prefixes: list[tuple[int, object, int]] = []
    if spec.mode == "count":
        step = int(spec.step)
        i = 1
        while True:
            hi = min(i * step, n)
            prefixes.append((i, hi, hi))
            if hi >= n:
                break
            i += 1
    else:
        if log.time_column is None:
            raise InvalidTableError("time-based windows need a log with a time column")
        tier, keys = _classify_time_keys(log.column_values(log.time_column))
        positions = _time_positions(tier, keys)
        t0 = float(positions[0])
        step = float(spec.step)
        i = 1
        while True:
            boundary = t0 + i * step
            hi = int(np.searchsorted(positions, boundary, side="left"))
            prefixes.append((i, _position_to_key(tier, boundary), hi))
            if hi >= n:
                break
            i += 1

    points: list[CapacityPoint] = []
    for i, end_key, hi in prefixes:
        if hi == 0:
            points.append(CapacityPoint(i, end_key, 0, base, flags=("empty",)))
            continue
        counts = _counts_from_flat(flat[:hi], dims, alpha)
        table = JointTable(specs, counts)
        h_obs = entropy(table, base).value
        h_max = max_entropy(table, SupportMode.OBSERVED, base).value
        red = (
            shannon_redundancy(table, SupportMode.OBSERVED) if h_max > 0 else None
        )
        points.append(CapacityPoint(i, end_key, hi, base, h_obs, h_max, red))
    return points
