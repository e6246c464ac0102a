import hashlib
import math
from typing import Any, Iterable, List, Sequence

import orjson
from typing_extensions import TypeGuard


JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def serialize(data: Any) -> bytes:
    return orjson.dumps(data, option=JSON_OPTIONS)


def deserialize(data: bytes) -> Any:
    return orjson.loads(data)


def digest(*parts: Any, size: int = 16) -> str:
    h = hashlib.blake2b(digest_size=size)
    for part in parts:
        h.update(part if isinstance(part, bytes) else str(part).encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()


def derive_seed(root: int, *labels: Any) -> int:
    """
    Derive an independent 31-bit seed for one stage (and optionally one table) from the
    root seed, so every random stream is reproducible and paired across runs.
    """
    return int(digest(root, *labels, size=8), 16) & 0x7FFFFFFF


def stable_bucket(token: str, buckets: int) -> int:
    return int(digest(token, size=8), 16) % buckets


def is_finite_number(value: Any) -> TypeGuard[float]:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def format_float(value: float, digits: int = 6) -> str:
    return f"{value:.{digits}f}"


def render_table(headers: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    cells: List[List[str]] = [[str(h) for h in headers]]
    for row in rows:
        cells.append([format_float(v) if isinstance(v, float) else str(v) for v in row])

    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if n == 0:
            lines.append("  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"
