"""Recurrent-event data: single-system histories, multi-system datasets,
CSV ingestion/emission and the superposed (pooled) process.

Times are abstract operating times. A history holds the ordered event times
``T_1 < ... < T_n`` of one system observed on ``(0, tau]``, an optional mark
per event and an optional fixed covariate vector.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .errors import DataError

DEFAULT_MARK = "event"


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SystemHistory:
    """Event history of one repairable system.

    Parameters
    ----------
    system_id : str
        Identifier, unique within a dataset.
    times : sequence of float
        Event times, strictly increasing, in ``(0, censor_time]``.
    censor_time : float
        End of the observation window ``tau``.
    marks : sequence of str, optional
        Event-type label per event. Defaults to ``"event"`` everywhere.
    covariates : sequence of float, optional
        Fixed covariate vector ``Z``.
    """

    system_id: str
    times: np.ndarray
    censor_time: float
    marks: tuple = None
    covariates: np.ndarray | None = None

    def __post_init__(self):
        times = _readonly(self.times)
        if times.ndim != 1:
            raise DataError(f"system {self.system_id}: times must be one-dimensional")
        tau = float(self.censor_time)
        if not np.isfinite(tau) or tau <= 0:
            raise DataError(f"system {self.system_id}: censor time must be finite and positive, got {tau!r}")
        if times.size:
            if not np.all(np.isfinite(times)):
                raise DataError(f"system {self.system_id}: non-finite event time")
            if times[0] <= 0:
                raise DataError(f"system {self.system_id}: event time {times[0]!r} <= 0")
            if np.any(np.diff(times) <= 0):
                raise DataError(f"system {self.system_id}: non-strictly-increasing times")
            if times[-1] > tau:
                raise DataError(
                    f"system {self.system_id}: event time {times[-1]!r} exceeds censor time {tau!r}"
                )
        marks = self.marks
        if marks is None:
            marks = (DEFAULT_MARK,) * times.size
        marks = tuple(str(m) for m in marks)
        if len(marks) != times.size:
            raise DataError(f"system {self.system_id}: {len(marks)} marks for {times.size} events")
        cov = None if self.covariates is None else _readonly(self.covariates)
        object.__setattr__(self, "system_id", str(self.system_id))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "censor_time", tau)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "covariates", cov)

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    def interevent_times(self) -> np.ndarray:
        """Gaps ``X_i = T_i - T_{i-1}`` with ``T_0 = 0``."""
        return np.diff(self.times, prepend=0.0)

    def tail(self) -> float:
        """Time from the last event (or 0) to the end of the window."""
        last = self.times[-1] if self.times.size else 0.0
        return self.censor_time - last

    def with_times(self, times, marks=None) -> "SystemHistory":
        return SystemHistory(self.system_id, times, self.censor_time, marks, self.covariates)

    def __repr__(self):
        return (
            f"SystemHistory({self.system_id!r}, n={self.n_events}, "
            f"tau={self.censor_time!r})"
        )


def truncate(history: SystemHistory, k: int, t: float) -> SystemHistory:
    """The first ``k`` events of ``history`` observed on ``(0, t]``."""
    return SystemHistory(history.system_id, history.times[:k], float(t), history.marks[:k], history.covariates)


def interevent_times(history: SystemHistory) -> np.ndarray:
    return history.interevent_times()


@dataclass(frozen=True, eq=False)
class EventDataset:
    """A collection of independent system histories sharing one mark set."""

    systems: tuple
    mark_set: frozenset = None

    def __post_init__(self):
        systems = tuple(self.systems)
        ids = [h.system_id for h in systems]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise DataError(f"duplicate system ids: {', '.join(dup)}")
        seen = {m for h in systems for m in h.marks}
        declared = frozenset(self.mark_set) if self.mark_set is not None else frozenset()
        if not seen and not declared:
            declared = frozenset({DEFAULT_MARK})
        dims = {None if h.covariates is None else h.covariates.size for h in systems}
        if len(dims) > 1:
            raise DataError("covariate vectors have inconsistent lengths across systems")
        object.__setattr__(self, "systems", systems)
        object.__setattr__(self, "mark_set", frozenset(seen | declared))

    def __len__(self):
        return len(self.systems)

    def __iter__(self):
        return iter(self.systems)

    def __getitem__(self, key):
        if isinstance(key, str):
            for h in self.systems:
                if h.system_id == key:
                    return h
            raise KeyError(key)
        return self.systems[key]

    @property
    def n_events(self) -> int:
        return sum(h.n_events for h in self.systems)

    @property
    def is_marked(self) -> bool:
        return self.mark_set != frozenset({DEFAULT_MARK})

    @property
    def covariate_dim(self) -> int:
        first = self.systems[0].covariates if self.systems else None
        return 0 if first is None else int(first.size)

    @property
    def censor_times(self) -> np.ndarray:
        return np.array([h.censor_time for h in self.systems])

    def rescaled(self, k: float) -> "EventDataset":
        """Multiply every time and window by ``k``."""
        return EventDataset(
            [SystemHistory(h.system_id, h.times * k, h.censor_time * k, h.marks, h.covariates)
             for h in self.systems],
            self.mark_set,
        )

    @classmethod
    def single(cls, times, censor_time, system_id="s1", marks=None, covariates=None):
        return cls([SystemHistory(system_id, times, censor_time, marks, covariates)])


def as_dataset(data) -> EventDataset:
    if isinstance(data, EventDataset):
        return data
    if isinstance(data, SystemHistory):
        return EventDataset([data])
    return EventDataset(list(data))


# --------------------------------------------------------------------------
# superposition


@dataclass(frozen=True, eq=False)
class SuperposedProcess:
    """Pooled event times of several systems with the at-risk count ``y(t)``
    and the total time on test ``r(t) = int_0^t y(u) du``."""

    times: np.ndarray
    system_index: np.ndarray
    censor_times: np.ndarray  # sorted ascending

    @property
    def n_systems(self) -> int:
        return int(self.censor_times.size)

    @property
    def horizon(self) -> float:
        return float(self.censor_times[-1]) if self.censor_times.size else 0.0

    def at_risk(self, t):
        """Number of systems with ``tau_i >= t``."""
        t = np.asarray(t, dtype=float)
        below = np.searchsorted(self.censor_times, t, side="left")
        return self.n_systems - below

    def ttt(self, t):
        """Total time on test ``r(t) = sum_i min(t, tau_i)``."""
        t = np.asarray(t, dtype=float)
        tau = self.censor_times
        csum = np.concatenate([[0.0], np.cumsum(tau)])
        k = np.searchsorted(tau, t, side="left")  # systems with tau_i < t
        return csum[k] + (self.n_systems - k) * t


def superpose(data) -> SuperposedProcess:
    """Pool all systems' events; cross-system ties are ordered by system id."""
    d = as_dataset(data)
    keyed = []
    for idx, h in enumerate(d.systems):
        keyed.extend((t, h.system_id, idx) for t in h.times)
    keyed.sort()
    times = _readonly([k[0] for k in keyed])
    index = _readonly([k[2] for k in keyed], dtype=np.int64)
    taus = _readonly(np.sort(d.censor_times))
    return SuperposedProcess(times, index, taus)


# --------------------------------------------------------------------------
# CSV ingestion


def _open_text(source) -> tuple[TextIO, bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), True
    return source, False


def _rows(source, required: Sequence[str], what: str):
    fh, close = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise DataError(f"{what}: empty file") from None
        if header and header[0].startswith("﻿"):
            header[0] = header[0][1:]
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{what}: missing column(s) {', '.join(missing)} in header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{what} line {lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, dict(zip(header, (c.strip() for c in row)))
    finally:
        if close:
            fh.close()


def _parse_float(text: str, what: str, lineno: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{what} line {lineno}: unparseable {column} {text!r}") from None
    if not np.isfinite(value):
        raise DataError(f"{what} line {lineno}: non-finite {column} {text!r}")
    return value


def read_windows(source) -> dict[str, float]:
    """Read ``system_id,censor_time`` rows."""
    out: dict[str, float] = {}
    for lineno, row in _rows(source, ("system_id", "censor_time"), "windows"):
        sid = row["system_id"]
        if sid in out:
            raise DataError(f"windows line {lineno}: duplicate system {sid!r}")
        out[sid] = _parse_float(row["censor_time"], "windows", lineno, "censor_time")
    return out


def read_covariates(source) -> dict[str, np.ndarray]:
    """Read ``system_id,z1,z2,...`` rows."""
    fh, close = _open_text(source)
    try:
        text = fh.read()
    finally:
        if close:
            fh.close()
    header = next(csv.reader(io.StringIO(text)), [])
    zcols = [c.strip() for c in header if c.strip() != "system_id"]
    out: dict[str, np.ndarray] = {}
    for lineno, row in _rows(io.StringIO(text), ("system_id",), "covariates"):
        sid = row["system_id"]
        if sid in out:
            raise DataError(f"covariates line {lineno}: duplicate system {sid!r}")
        out[sid] = np.array([_parse_float(row[c], "covariates", lineno, c) for c in zcols])
    return out


def parse_dataset(
    events,
    windows=None,
    *,
    tau: float | None = None,
    covariates=None,
    mark_set: Iterable[str] | None = None,
) -> EventDataset:
    """Build a validated dataset from CSV sources.

    Parameters
    ----------
    events : path or text stream
        ``system_id,time[,mark]`` rows.
    windows : path, stream or mapping, optional
        ``system_id,censor_time`` rows; systems listed here without events
        become censored-only histories.
    tau : float, optional
        One window end for every system (used when ``windows`` is absent).
    covariates : path, stream or mapping, optional
        ``system_id,z1,...`` rows.
    mark_set : iterable of str, optional
        Declared marks in addition to the observed ones.
    """
    per_system: dict[str, list[tuple[float, str, int]]] = {}
    order: list[str] = []
    for lineno, row in _rows(events, ("system_id", "time"), "events"):
        sid = row["system_id"]
        if not sid:
            raise DataError(f"events line {lineno}: empty system_id")
        t = _parse_float(row["time"], "events", lineno, "time")
        if t <= 0:
            raise DataError(f"events line {lineno}: time {t!r} <= 0 for system {sid!r}")
        mark = row.get("mark") or DEFAULT_MARK
        if sid not in per_system:
            per_system[sid] = []
            order.append(sid)
        per_system[sid].append((t, mark, lineno))

    if windows is None and tau is None:
        raise DataError("no observation windows: supply a windows file or a single tau")
    if isinstance(windows, Mapping):
        win = {str(k): float(v) for k, v in windows.items()}
    elif windows is not None:
        win = read_windows(windows)
    else:
        win = {}
    for sid in win:
        if sid not in per_system:
            per_system[sid] = []
            order.append(sid)

    if isinstance(covariates, Mapping):
        cov = {str(k): np.asarray(v, dtype=float) for k, v in covariates.items()}
    elif covariates is not None:
        cov = read_covariates(covariates)
    else:
        cov = None

    systems = []
    for sid in order:
        rows = sorted(per_system[sid])
        if sid in win:
            end = win[sid]
        elif tau is not None:
            end = float(tau)
        else:
            raise DataError(f"system {sid!r}: missing censor time")
        for (t0, _, l0), (t1, _, l1) in zip(rows, rows[1:]):
            if t1 == t0:
                raise DataError(
                    f"events lines {l0} and {l1}: duplicate time {t1!r} for system {sid!r} "
                    "(non-strictly-increasing times)"
                )
        for t, _, lineno in rows:
            if t > end:
                raise DataError(
                    f"events line {lineno}: time {t!r} exceeds censor time {end!r} of system {sid!r}"
                )
        z = None
        if cov is not None:
            if sid not in cov:
                raise DataError(f"system {sid!r}: missing covariates")
            z = cov[sid]
        systems.append(SystemHistory(sid, [r[0] for r in rows], end, [r[1] for r in rows], z))
    return EventDataset(systems, frozenset(mark_set) if mark_set is not None else None)


# --------------------------------------------------------------------------
# CSV emission


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(dataset: EventDataset, events_path, windows_path, covariates_path=None) -> None:
    """Write the events/windows (and optional covariates) CSV files.

    Floats are written with ``repr`` so that a read-back is bit-identical.
    """
    with open(events_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["system_id", "time", "mark"])
        for h in dataset:
            for t, m in zip(h.times, h.marks):
                w.writerow([h.system_id, _fmt(t), m])
    with open(windows_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["system_id", "censor_time"])
        for h in dataset:
            w.writerow([h.system_id, _fmt(h.censor_time)])
    if covariates_path is not None and dataset.covariate_dim:
        with open(covariates_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["system_id"] + [f"z{k + 1}" for k in range(dataset.covariate_dim)])
            for h in dataset:
                w.writerow([h.system_id] + [_fmt(z) for z in h.covariates])


def load_dataset_files(directory, stem: str) -> EventDataset:
    directory = Path(directory)
    cov = directory / f"{stem}_covariates.csv"
    return parse_dataset(
        directory / f"{stem}_events.csv",
        directory / f"{stem}_windows.csv",
        covariates=cov if cov.exists() else None,
    )
