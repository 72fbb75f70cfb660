import os

from loguru import logger

from expconcavify import settings


class CsvHandler:
    def __init__(self, out_dir=None):
        self.out_dir = out_dir or settings.output_dir()

    def folder(self, name):
        path = os.path.join(self.out_dir, name) if name else self.out_dir
        os.makedirs(path, exist_ok=True)
        return path

    def write_frame(self, frame, name, folder=""):
        """Writes frame to <out_dir>/<folder>/<name>.csv and returns the path relative to out_dir."""
        file_name = name if name.endswith(".csv") else f"{name}.csv"
        path = os.path.join(self.folder(folder), file_name)
        try:
            frame.to_csv(path, index=False)
        except OSError as e:
            logger.error(f"CSV write failed for {path}: {e}")
            raise
        logger.debug(f"Wrote {len(frame)} rows to {path}")
        return os.path.relpath(path, self.out_dir)

    def write_trace(self, trace, slug, folder="traces"):
        return self.write_frame(trace.to_frame(), slug, folder)
