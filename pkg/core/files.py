"""
File helpers: atomic text writes, dataset CSV files and JSON documents
"""

import json
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ParseError


def atomic_write_text(path, text):
    """Write via a temp file in the target directory, then rename over the target."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def write_dataset_csv(path, inputs, targets):
    """Columns x1..xd, y; one sample per row."""
    inputs = np.asarray(inputs, dtype=np.float64)
    frame = pd.DataFrame(inputs, columns=[f"x{k + 1}" for k in range(inputs.shape[1])])
    frame["y"] = np.asarray(targets, dtype=np.float64)
    atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g"))


def read_dataset_csv(path):
    """Return (inputs, targets) from a CSV with columns x1..xd, y."""
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"{path}: no such data file")
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParseError(f"{path}: {e}") from e
    if "y" not in frame.columns:
        raise ParseError(f"{path}: missing target column 'y'")
    x_cols = [c for c in frame.columns if c != "y"]
    expected = [f"x{k + 1}" for k in range(len(x_cols))]
    if not x_cols or x_cols != expected:
        raise ParseError(f"{path}: input columns must be {expected or ['x1', '...']}, got {x_cols}")
    try:
        inputs = frame[x_cols].to_numpy(dtype=np.float64)
        targets = frame["y"].to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ParseError(f"{path}: non-numeric entries ({e})") from e
    bad = ~np.isfinite(inputs).all(axis=1) | ~np.isfinite(targets)
    if bad.any():
        # header is line 1
        raise ParseError(f"{path}: line {int(np.argmax(bad)) + 2}: non-finite value")
    return inputs, targets


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"{path}: cannot read file ({e.strerror})") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
