"""Convenience functions for working with file-system paths."""
# <pep8 compliant>
from pathlib import Path


def path_exists(path: Path) -> bool:
    """Check if a path exists and is a file.

    :param path: Path to check.
    :return: True if path exists and is a file.
    """
    return path.exists() and path.is_file()


def get_abs_path(path: str | Path) -> Path:
    """Get absolute path. Expands the user's home directory '~'.

    :param path: Relative or absolute path.
    :return: Absolute path.
    """
    return Path(path).expanduser().resolve()


def with_format_suffix(filepath: str | Path, fmt: str) -> Path:
    """Get the path with the file extension of an output format.

    :param filepath: Path to file with old extension.
    :param fmt: Output format, e.g. json or csv.
    :return: Path with the new extension.
    """
    return Path(filepath).with_suffix(f'.{fmt.strip(".").lower()}')


def ensure_parent(filepath: Path) -> Path:
    """Create the parent directories of a destination file.

    :param filepath: Destination file.
    :return: The same path.
    """
    filepath.parent.mkdir(parents=True, exist_ok=True)
    return filepath
