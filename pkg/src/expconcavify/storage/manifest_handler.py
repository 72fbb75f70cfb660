import os
import threading

import pandas as pd
from loguru import logger

from expconcavify.processors.schemas import ManifestRow


class ManifestHandler:
    """One accumulator per manifest path, shared by every worker thread of a sweep."""

    _instances = {}
    _lock = threading.Lock()

    def __new__(cls, path):
        key = os.path.abspath(path)
        with cls._lock:
            if key not in cls._instances:
                instance = super(ManifestHandler, cls).__new__(cls)
                instance.path = path
                instance._rows = {}
                instance._rows_lock = threading.Lock()
                cls._instances[key] = instance
                logger.debug(f"Manifest opened at {path}")
        return cls._instances[key]

    def __init__(self, path):
        pass

    def reset(self):
        with self._rows_lock:
            self._rows.clear()

    def add_row(self, payload):
        row = ManifestRow(**payload)
        with self._rows_lock:
            self._rows[row.order] = row
        return row

    @property
    def rows(self):
        with self._rows_lock:
            return [self._rows[order] for order in sorted(self._rows)]

    def to_frame(self):
        return pd.DataFrame([row.model_dump() for row in self.rows], columns=list(ManifestRow.model_fields))

    def write(self):
        directory = os.path.dirname(self.path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        frame = self.to_frame()
        frame.to_csv(self.path, index=False)
        logger.info(f"Manifest with {len(frame)} rows written to {self.path}")
        return self.path

    @classmethod
    def close(cls, path):
        with cls._lock:
            cls._instances.pop(os.path.abspath(path), None)
