"""JSON conventions shared by the CLI.

Integers travel as decimal strings (values routinely exceed 2^53).
Matrices are ``{"rows": r, "cols": c, "data": [[...], ...]}``; vectors are
``D x 1`` matrices, although flat lists are accepted on input.  Reals are
fixed-point strings with six fractional digits, and real matrices carry a
``"precision"`` field.
"""

from __future__ import annotations

import math
import numbers
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction

from .intalg import IntMatrix

PRECISION = 6


class SchemaError(ValueError):
    """Input does not follow the documented JSON layout."""


def _parse_int(x) -> int:
    if isinstance(x, bool):
        raise SchemaError("booleans are not integers")
    if isinstance(x, numbers.Integral):
        return int(x)
    if isinstance(x, str):
        try:
            return int(x.strip())
        except ValueError:
            raise SchemaError(f"not an integer string: {x!r}") from None
    raise SchemaError(f"expected an integer or integer string, got {x!r}")


def parse_real(x):
    """Exact rational from an int, a decimal string or a fraction string; floats pass through."""
    if isinstance(x, bool):
        raise SchemaError("booleans are not numbers")
    if isinstance(x, numbers.Integral):
        return int(x)
    if isinstance(x, float):
        return x
    if isinstance(x, str):
        try:
            v = Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise SchemaError(f"not a number string: {x!r}") from None
        return v.numerator if v.denominator == 1 else v
    raise SchemaError(f"expected a number, got {x!r}")


def _data(obj):
    if isinstance(obj, dict):
        try:
            data = obj["data"]
        except KeyError:
            raise SchemaError("matrix object needs a 'data' field") from None
        rows, cols = obj.get("rows"), obj.get("cols")
        if not isinstance(data, list) or not all(isinstance(r, list) for r in data):
            raise SchemaError("'data' must be a list of rows")
        if rows is not None and _parse_int(rows) != len(data):
            raise SchemaError("'rows' does not match 'data'")
        if cols is not None and any(len(r) != _parse_int(cols) for r in data):
            raise SchemaError("'cols' does not match 'data'")
        return data
    if isinstance(obj, list) and obj and all(isinstance(r, list) for r in obj):
        return obj
    raise SchemaError("expected a matrix object or a list of rows")


def parse_matrix(obj) -> IntMatrix:
    data = _data(obj)
    if not data or len({len(r) for r in data}) != 1 or not data[0]:
        raise SchemaError("matrix rows must be nonempty and of equal length")
    return IntMatrix([[_parse_int(x) for x in row] for row in data])


def parse_real_matrix(obj) -> list[list]:
    data = _data(obj)
    if not data or len({len(r) for r in data}) != 1:
        raise SchemaError("matrix rows must be of equal length")
    return [[parse_real(x) for x in row] for row in data]


def _vector_entries(obj) -> list:
    if isinstance(obj, dict):
        data = _data(obj)
        if any(len(r) != 1 for r in data):
            raise SchemaError("vectors must be D x 1")
        return [r[0] for r in data]
    if isinstance(obj, list) and obj:
        if all(isinstance(x, list) for x in obj):
            if any(len(x) != 1 for x in obj):
                raise SchemaError("vectors must be D x 1")
            return [x[0] for x in obj]
        return obj
    raise SchemaError("expected a vector")


def parse_vector(obj) -> tuple[int, ...]:
    return tuple(_parse_int(x) for x in _vector_entries(obj))


def parse_real_vector(obj) -> tuple:
    return tuple(parse_real(x) for x in _vector_entries(obj))


def format_real(x, precision: int = PRECISION) -> str:
    """Fixed-point string; exact rounding (half-even) for rationals."""
    q = Decimal(1).scaleb(-precision)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, Fraction):
        d = Decimal(round(x * 10**precision)).scaleb(-precision).quantize(q)
    elif isinstance(x, numbers.Integral):
        d = Decimal(int(x)).quantize(q)
    else:
        d = Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_EVEN)
    return str(abs(d) if d == 0 else d)


def matrix_to_json(M: IntMatrix) -> dict:
    return {"rows": M.nrows, "cols": M.ncols, "data": [[str(x) for x in row] for row in M.rows]}


def vector_to_json(v) -> dict:
    return {"rows": len(v), "cols": 1, "data": [[str(int(x))] for x in v]}


def real_vector_to_json(v, precision: int = PRECISION) -> dict:
    return {"rows": len(v), "cols": 1, "precision": precision,
            "data": [[format_real(x, precision)] for x in v]}


def real_matrix_to_json(A, precision: int = PRECISION) -> dict:
    rows = [list(r) for r in A]
    return {"rows": len(rows), "cols": len(rows[0]), "precision": precision,
            "data": [[format_real(x, precision) for x in r] for r in rows]}
