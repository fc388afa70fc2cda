"""Utilities for reading and writing JSON documents."""

import json
import logging
import os
from typing import Any, Dict, List, Optional, Union

logger = logging.getLogger(__name__)


def complex_pair(value: complex) -> List[float]:
    """JSON form [re, im] of a complex number."""
    value = complex(value)
    return [value.real, value.imag]


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars, arrays and complex numbers to plain JSON values.

    Non-finite floats become strings so the output stays strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "tolist") and not isinstance(obj, (str, bytes)):
        return to_jsonable(obj.tolist())
    if isinstance(obj, complex):
        return to_jsonable(complex_pair(obj))
    if isinstance(obj, float) and obj != obj:
        return "nan"
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return "inf" if obj > 0 else "-inf"
    return obj


def save_json(data: Union[Dict, List], filepath: str) -> None:
    """Save data to a JSON file with sorted keys and a trailing newline.

    Args:
        data: Data to save
        filepath: Path to save the file

    Raises:
        Exception: If saving fails
    """
    try:
        directory = os.path.dirname(filepath)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(filepath, "w", encoding="utf-8", newline="\n") as f:
            json.dump(to_jsonable(data), f, indent=2, sort_keys=True, allow_nan=False)
            f.write("\n")
    except Exception as e:
        logger.error(f"Failed to save JSON to {filepath}: {str(e)}")
        raise


def load_json(filepath: str) -> Optional[Union[Dict, List]]:
    """Load data from a JSON file.

    Args:
        filepath: Path to the JSON file

    Returns:
        Loaded data or None if loading fails
    """
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        logger.error(f"JSON file not found: {filepath}")
        return None
    except json.JSONDecodeError as e:
        logger.error(f"Failed to parse JSON from {filepath}: {str(e)}")
        return None
