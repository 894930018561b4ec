"""Tiny key-value config files: `key = value` lines, `#` comments.

Values parse as int, float, true/false, or string; a comma turns the value
into a list of such scalars. Quotes around a string are optional.
"""

from __future__ import annotations

from pathlib import Path

from .errors import PanelParseError


def _scalar(text: str):
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_kv_text(text: str, source: str = "<config>") -> dict[str, object]:
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PanelParseError(f"{source} line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise PanelParseError(f"{source} line {lineno}: empty key")
        if key in out:
            raise PanelParseError(f"{source} line {lineno}: duplicate key {key!r}")
        value = value.strip()
        if "," in value:
            out[key] = [_scalar(v) for v in value.split(",") if v.strip()]
        else:
            out[key] = _scalar(value)
    return out


def parse_kv_file(path: str | Path) -> dict[str, object]:
    path = Path(path)
    return parse_kv_text(path.read_text(encoding="utf-8"), source=str(path))
