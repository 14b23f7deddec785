import hashlib
import math
from typing import Dict, Union

import numpy as np
import sympy as sp


def parse_expression(expression_str: str) -> Union[int, float]:
    """
    Evaluates a mathematical expression given as a string and returns the numerical result.
    Lets configuration values be written the way the derivations write them,
    e.g. "0.1**1.5/2" or "sqrt(0.1/4)".

    Parameters:
    - expression_str: A string representation of the mathematical expression to evaluate.

    Returns:
    The numerical result of the expression.

    Raises:
    ValueError: if the string is not an expression, has free symbols, or is not a finite real.
    """
    try:
        expr = sp.sympify(expression_str)
        if expr.is_Integer:
            return int(expr)
        value = float(expr.evalf())
    except (sp.SympifyError, TypeError, ValueError, AttributeError) as e:
        raise ValueError(f"'{expression_str}' does not evaluate to a real number.") from e
    if not math.isfinite(value):
        raise ValueError(f"'{expression_str}' is not finite.")
    return value


def commitment(vector: np.ndarray) -> str:
    """SHA-256 of a vector's little-endian float64 bytes; identifies a hidden vector without revealing it."""
    data = np.ascontiguousarray(vector, dtype="<f8").tobytes()
    return hashlib.sha256(data).hexdigest()


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def jsonable(value) -> Union[float, int, str, list, Dict, None, bool]:
    """Convert numpy scalars/arrays (and nested containers of them) into JSON-friendly values."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value
