"""Small helpers for versioned CSV output written atomically."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

SCHEMA_VERSION = 1


def schema_comment(schema: str) -> str:
    return f"# sparse_rp {schema} v{SCHEMA_VERSION}"


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to ``path`` via a temp file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def render_csv(schema: str, header, rows) -> str:
    buf = io.StringIO()
    buf.write(schema_comment(schema) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_csv(path, schema: str, header, rows) -> Path:
    return atomic_write_text(path, render_csv(schema, header, rows))


def read_csv(path) -> tuple[str | None, list[dict[str, str]]]:
    """Return ``(schema comment, rows as dicts)``; other comment lines are skipped."""
    schema = None
    lines = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            if schema is None and line.startswith("# sparse_rp "):
                schema = line
            continue
        if line.strip():
            lines.append(line)
    return schema, list(csv.DictReader(lines))
