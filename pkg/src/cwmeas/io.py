"""CSV emission shared by the scenario runners."""

from __future__ import annotations

import math
import numbers
from pathlib import Path
from typing import Iterable, Sequence


def format_value(v) -> str:
    if isinstance(v, (bool, str)) or v is None:
        return "" if v is None else str(v)
    if isinstance(v, numbers.Integral):
        return str(int(v))
    if isinstance(v, numbers.Real):
        x = float(v)
        if not math.isfinite(x):
            raise ValueError(f"refusing to write non-finite value {x!r}")
        return format(x, ".17g")
    raise TypeError(f"cannot format {type(v).__name__} for CSV")


def emit_csv(rows: Iterable[Sequence], path, header: Sequence[str], comments: Sequence[str] = ()) -> Path:
    """Write ``rows`` under ``header`` as UTF-8 CSV with '\\n' line endings.

    Floats are written with 17 significant digits so they round-trip exactly.
    ``comments`` become leading ``# ...`` lines.
    """
    path = Path(path)
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    width = len(header)
    for row in rows:
        if len(row) != width:
            raise ValueError(f"row has {len(row)} fields, header has {width}")
        lines.append(",".join(format_value(v) for v in row))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> tuple[list[str], list[list[str]], list[str]]:
    """Return (header, rows, comments); values are left as strings."""
    comments, data = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh.read().splitlines():
            if line.startswith("#"):
                comments.append(line[1:].strip())
            else:
                data.append(line.split(","))
    return data[0], data[1:], comments
