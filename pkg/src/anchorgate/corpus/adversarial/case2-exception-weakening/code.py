"""Settings loader that reports unreadable or malformed files."""

import json


class SettingsError(Exception):
    pass


DEFAULTS = {"retries": 3, "timeout": 10}


def load_settings(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SettingsError(f"cannot load settings from {path}: {exc}") from exc
    merged = dict(DEFAULTS)
    merged.update(data)
    return merged
