"""This module provides CSV dumps of point clouds and chains for external plotting."""
# <pep8 compliant>
import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from segretool.file_io import paths


def _coordinate_header(n: int) -> list[str]:
    names = [f"z{j + 1}" for j in range(n - 1)] + ["w"]
    return [f"{name}_{part}" for name in names for part in ("re", "im")]


def _coordinates(P: np.ndarray) -> list[str]:
    return [format(float(x), ".17g") for value in P for x in (value.real, value.imag)]


def cloud_rows(cloud) -> tuple[list[str], list[list[str]]]:
    """Header and rows (depth, index, parent, coordinates) of a Segre set cloud."""
    n = len(cloud.base)
    header = ["depth", "index", "parent"] + _coordinate_header(n)
    rows = []
    for depth, (points, parents) in enumerate(zip(cloud.levels, cloud.parents)):
        for index, (P, parent) in enumerate(zip(points, parents)):
            rows.append([str(depth), str(index), "" if depth == 0 else str(int(parent))] + _coordinates(P))
    return header, rows


def chain_rows(chain) -> tuple[list[str], list[list[str]]]:
    """Header and rows (step, coordinates) of a Segre chain."""
    header = ["step"] + _coordinate_header(len(chain.start))
    return header, [[str(step)] + _coordinates(P) for step, P in enumerate(chain.waypoints)]


def dumps(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def export_csv(filepath: Path | str, header: Sequence[str], rows: Iterable[Sequence[str]]) -> tuple[bool, str]:
    """Write rows to a CSV file.

    :param filepath: Path to CSV file destination.
    :param header: Column names.
    :param rows: Rows of already formatted values.
    :return: A tuple with it's first element indicating whether export was successful, a message as the second element.
    """
    filepath = Path(filepath)
    if filepath.suffix.lower() != ".csv":
        return (False, f"Destination file is not a CSV file: {filepath}")
    try:
        paths.ensure_parent(filepath)
        with filepath.open("w", newline="", encoding="utf-8") as file:
            writer = csv.writer(file, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except IOError as error:
        return (False, f"Failed to write file: {filepath}\n{str(error)}")
    return (True, f"Saved file: {filepath}")
