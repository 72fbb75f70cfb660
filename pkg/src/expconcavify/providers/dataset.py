"""Outcome CSVs with header t,y[,e1,...,eN]; y in {0, 1} maps to classes 1 and 2."""
import os

import numpy as np
import pandas as pd
from loguru import logger

from expconcavify.errors import DataFormatError


def _expert_columns(header):
    experts = header[2:]
    expected = [f"e{i}" for i in range(1, len(experts) + 1)]
    if experts != expected:
        raise DataFormatError(f"expert columns must be named {','.join(expected)}, got {','.join(experts)}", line=1)
    return experts


def _probability(raw, line, column):
    try:
        value = float(raw)
    except ValueError:
        raise DataFormatError(f"{column} is not a number: '{raw}'", line=line) from None
    if not 0.0 <= value <= 1.0:
        raise DataFormatError(f"{column} must lie in [0, 1], got {value}", line=line)
    return value


def ingest_outcome_csv(path):
    """Returns (outcome classes, expert predictions or None) from an outcome CSV."""
    if not os.path.exists(path):
        raise DataFormatError(f"outcome file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataFormatError(f"{path} is empty", line=1) from None
    except pd.errors.ParserError as e:
        raise DataFormatError(f"{path}: {e}") from None

    header = [str(column).strip() for column in frame.columns]
    if header[:2] != ["t", "y"]:
        raise DataFormatError(f"header must start with t,y, got {','.join(header)}", line=1)
    experts = _expert_columns(header)

    outcomes = []
    predictions = []
    for offset, row in enumerate(frame.itertuples(index=False)):
        line = offset + 2
        values = [str(value).strip() for value in row]
        if values[1] not in ("0", "1"):
            raise DataFormatError(f"y must be 0 or 1, got '{values[1]}'", line=line)
        outcomes.append(int(values[1]) + 1)
        if experts:
            if any(value in ("", "nan") for value in values[2:]):
                raise DataFormatError("missing expert prediction", line=line)
            predictions.append([_probability(value, line, column) for value, column in zip(values[2:], experts)])

    logger.debug(f"Ingested {len(outcomes)} rounds and {len(experts)} expert columns from {path}")
    return outcomes, (np.asarray(predictions, dtype=float).reshape(len(outcomes), len(experts)) if experts else None)


def emit_outcome_csv(path, outcomes, predictions=None):
    frame = pd.DataFrame({"t": np.arange(1, len(outcomes) + 1), "y": np.asarray(outcomes, dtype=int) - 1})
    if predictions is not None:
        predictions = np.asarray(predictions, dtype=float)
        for i in range(predictions.shape[1]):
            frame[f"e{i + 1}"] = predictions[:, i]
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False)
    return path
