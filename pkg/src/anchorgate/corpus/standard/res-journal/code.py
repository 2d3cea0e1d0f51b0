"""Append-only journal file with a lock around writers."""

import json
import os
import threading


class JournalError(Exception):
    pass


class Journal:
    def __init__(self, path):
        self.path = path
        self.lock = threading.Lock()

    def append(self, entry):
        line = json.dumps(entry, sort_keys=True)
        self.lock.acquire()
        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        finally:
            self.lock.release()

    def entries(self):
        if not os.path.exists(self.path):
            return []
        try:
            with open(self.path, encoding="utf-8") as fh:
                return [json.loads(line) for line in fh if line.strip()]
        except json.JSONDecodeError as exc:
            raise JournalError(f"corrupt journal {self.path}: {exc}") from exc


def replay(journal, apply):
    count = 0
    for entry in journal.entries():
        apply(entry)
        count += 1
    return count
