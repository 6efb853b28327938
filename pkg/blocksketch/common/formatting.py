from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime
from typing import Iterable, Optional, Sequence

import pytz

from .config import Config


def _tz():
    return pytz.timezone(Config.timezone)


def now_local() -> datetime:
    return datetime.now(_tz())


def format_datetime(dt: Optional[datetime] = None, fmt: str = "%Y-%m-%dT%H:%M:%S%z") -> str:
    if dt is None:
        dt = now_local()
    elif dt.tzinfo is None:
        dt = _tz().localize(dt)
    return dt.strftime(fmt)


def format_value(value) -> str:
    """CSV cell text; floats use repr so reruns are byte-identical."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ";".join(format_value(v) for v in value)
    return str(value)


def format_csv(rows: Iterable[dict], columns: Sequence[str], comment: Optional[str] = None) -> str:
    out = io.StringIO()
    if comment:
        out.write(f"# {comment}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return out.getvalue()


def _json_default(obj):
    # numpy scalars and arrays
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def format_json(payload) -> str:
    """Sorted-key JSON; non-finite floats become null."""
    plain = json.loads(json.dumps(payload, default=_json_default))
    return json.dumps(_finite(plain), indent=2, sort_keys=True) + "\n"


def format_section_header(title: str) -> str:
    return f"**{title}**"


def format_number(value: Optional[float], decimals: int = 4) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "N/A"
    return f"{value:.{decimals}f}"


def format_pct(value: Optional[float], decimals: int = 1) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "N/A"
    return f"{100.0 * value:.{decimals}f}%"
