from .config import Config
from .cache import FileCache, run_key
from .errors import BlockSketchError, ConfigError, NumericalError, LeastSquaresError
from .formatting import (
    format_csv,
    format_json,
    format_value,
    format_number,
    format_pct,
    format_section_header,
    format_datetime,
    now_local,
)
