"""General purpose helpers that are not specific to one module."""
import re

import numpy as np

from segretool.errors import ConfigurationError

_NUMBER = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_IMAGINARY_RE = re.compile(rf"^(?P<sign>[+-]?)(?P<im>{_NUMBER})?[ij]$")
_COMPLEX_RE = re.compile(rf"^(?P<re>[+-]?{_NUMBER})(?:(?P<sign>[+-])(?P<im>{_NUMBER})?[ij])?$")


def parse_complex(text: str) -> complex:
    """Parse a literal such as ``0.1``, ``-2i``, ``1+0.5i`` or ``i``.

    :raise ConfigurationError: the text is not a complex literal.
    """
    token = text.strip().replace(" ", "")
    match = _IMAGINARY_RE.match(token)
    if match:
        imag = float(match.group("im")) if match.group("im") else 1.0
        return complex(0.0, -imag if match.group("sign") == "-" else imag)
    match = _COMPLEX_RE.match(token)
    if not match:
        raise ConfigurationError(f"Not a complex number: {text!r}")
    imag = 0.0
    if match.group("sign"):
        imag = float(match.group("im")) if match.group("im") else 1.0
        if match.group("sign") == "-":
            imag = -imag
    return complex(float(match.group("re")), imag)


def parse_point(text: str, n: int | None = None) -> np.ndarray:
    """Parse comma separated complex literals into a point.

    :raise ConfigurationError: a literal is malformed or the count does not match n.
    """
    point = np.array([parse_complex(token) for token in text.split(",")], dtype=complex)
    if n is not None and len(point) != n:
        raise ConfigurationError(f"Expected {n} coordinates, got {len(point)} in {text!r}")
    return point
