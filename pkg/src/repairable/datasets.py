"""Bundled example datasets.

``valve_seat()`` is the 41-engine valve-seat replacement data (ages in
days, one window per engine).  ``plane7913()`` is the single-plane
air-conditioner failure history with window end 1297 hours.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .events import EventDataset, load_dataset_files

BUNDLED = ("valve_seat", "plane7913")


def load(name: str, directory=None) -> EventDataset:
    """Load ``<name>_events.csv`` and ``<name>_windows.csv``.

    With ``directory`` the files are read from there instead of the
    package data, which is how external datasets are plugged in.
    """
    if directory is not None:
        return load_dataset_files(Path(directory), name)
    if name not in BUNDLED:
        raise KeyError(f"no bundled dataset {name!r}; bundled: {', '.join(BUNDLED)}")
    with resources.as_file(resources.files("repairable") / "data") as root:
        return load_dataset_files(root, name)


def valve_seat() -> EventDataset:
    return load("valve_seat")


def plane7913() -> EventDataset:
    return load("plane7913")
