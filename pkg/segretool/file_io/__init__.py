"""This package provides reading and writing of segretool's JSON and CSV formats."""
from . import csvio, jsonio, paths  # noqa: F401
