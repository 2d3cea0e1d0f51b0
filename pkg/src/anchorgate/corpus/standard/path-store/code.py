"""Files served from a fixed base directory."""

import os


class OutsideBase(Exception):
    pass


def safe_path(base, name):
    root = os.path.realpath(base)
    full = os.path.realpath(os.path.join(root, name))
    if os.path.commonpath([root, full]) != root:
        raise OutsideBase(f"{name!r} escapes {base!r}")
    return full


def read_document(base, name):
    path = safe_path(base, name)
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def write_document(base, name, text):
    path = safe_path(base, name)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path
