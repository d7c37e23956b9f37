# wmv-stability/wmv_stability/utils/output.py

import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from wmv_stability import config

logger = logging.getLogger(__name__)


def validate_out_path(out_path: Union[str, Path]) -> bool:
    """
    Validate an output file path and permissions.

    Args:
        out_path: Path of the file to be written

    Returns:
        bool: True if the directory exists and is writable
    """
    out_path = Path(out_path)

    if not out_path.parent.exists():
        raise FileNotFoundError(f"Output directory does not exist: {out_path.parent}")

    if not os.access(out_path.parent, os.W_OK):
        raise PermissionError(f"No write permission for directory: {out_path.parent}")

    if out_path.exists() and out_path.is_dir():
        raise IsADirectoryError(f"Output path is a directory: {out_path}")

    return True


def _native(value: Any) -> Any:
    """Plain Python scalar for JSON; NaN becomes null."""
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) else value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, dict):
        return {k: _native(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_native(v) for v in value]
    return value


def frame_to_records(df: pd.DataFrame) -> List[Dict[str, Any]]:
    """Rows of a DataFrame as JSON-ready dicts, columns in order."""
    return [{col: _native(record[col]) for col in df.columns}
            for record in df.to_dict(orient='records')]


def safe_write_frame(df: pd.DataFrame, out_path: Union[str, Path],
                     fmt: str = 'csv') -> Path:
    """
    Write a result table as CSV or JSON with error handling.

    CSV floats use 17 significant digits so values round-trip exactly.

    Args:
        df: Table to write
        out_path: Destination file
        fmt: 'csv' or 'json'

    Returns:
        Path: The written file
    """
    if fmt not in config.OUTPUT_FORMATS:
        raise ValueError(f"format must be one of {config.OUTPUT_FORMATS}, got {fmt!r}")
    out_path = Path(out_path)
    try:
        validate_out_path(out_path)
        if fmt == 'csv':
            df.to_csv(out_path, index=False, float_format=config.CSV_FLOAT_FORMAT,
                      lineterminator='\n')
        else:
            with open(out_path, 'w', encoding='utf-8', newline='\n') as f:
                json.dump(frame_to_records(df), f, indent=2)
                f.write('\n')
        logger.info(f"Wrote {len(df):,} rows to {out_path}")
        return out_path
    except OSError as e:
        logger.error(f"Error writing output: {str(e)}")
        raise


def write_metadata(meta: Dict[str, Any], out_path: Union[str, Path]) -> Path:
    """Write a JSON sidecar with sorted keys so reruns are byte-identical."""
    out_path = Path(out_path)
    try:
        validate_out_path(out_path)
        with open(out_path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(_native(meta), f, indent=2, sort_keys=True)
            f.write('\n')
        logger.debug(f"Wrote metadata to {out_path}")
        return out_path
    except OSError as e:
        logger.error(f"Error writing metadata: {str(e)}")
        raise
