"""Session blobs exchanged with clients."""

import json


def validate_session(data):
    if not isinstance(data, dict) or "user" not in data:
        raise ValueError("malformed session")
    return data


def dump_session(data):
    return json.dumps(validate_session(data), sort_keys=True).encode("utf-8")


def load_session(blob):
    return validate_session(json.loads(blob.decode("utf-8")))
