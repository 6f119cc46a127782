"""JSON-lines streaming of difference records and bound estimates."""

from __future__ import annotations

import json
import threading
from pathlib import Path


class RecordWriter:
    """Appends one JSON object per line; safe to share between worker threads."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w")
        self._lock = threading.Lock()
        self.count = 0

    def write(self, record):
        data = record.to_dict() if hasattr(record, "to_dict") else dict(record)
        line = json.dumps(data, sort_keys=True)
        with self._lock:
            self._file.write(line + "\n")
            self.count += 1

    def close(self):
        with self._lock:
            if not self._file.closed:
                self._file.close()

    def __enter__(self) -> RecordWriter:
        return self

    def __exit__(self, *exc):
        self.close()


def read_records(path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]
