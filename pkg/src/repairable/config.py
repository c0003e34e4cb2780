"""Flat ``section.key = value`` configuration files.

Blank lines and lines starting with ``#`` are ignored.  Keys may use
dashes or underscores; they are normalized to underscores.
"""

from __future__ import annotations

from pathlib import Path

from .errors import DataError


def parse_config(text: str, source="<config>") -> dict:
    """``{section: {key: value}}`` with string values."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{source} line {lineno}: expected 'section.key = value', got {raw!r}")
        lhs, value = line.split("=", 1)
        lhs = lhs.strip()
        if "." not in lhs:
            raise DataError(f"{source} line {lineno}: key {lhs!r} has no section")
        section, key = lhs.split(".", 1)
        section, key = section.strip(), key.strip().replace("-", "_")
        if not section or not key:
            raise DataError(f"{source} line {lineno}: empty section or key")
        out.setdefault(section, {})[key] = value.strip()
    return out


def read_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p))


def format_config(section: str, values: dict) -> str:
    """Inverse of :func:`parse_config` for one section; ``None`` values are skipped."""
    lines = []
    for key in sorted(values):
        v = values[key]
        if v is None:
            continue
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{section}.{key} = {v}")
    return "\n".join(lines) + "\n"


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise DataError(f"not a boolean: {text!r}")
