"""Minimal Semgrep-compatible scanner: emits Semgrep JSON for a few line patterns.

Usage: fake_semgrep.py [--exit N] [--garbage] PATH
"""

import json
import sys

RULES = [
    ("execute(", "+", "python.sql.concat", "ERROR"),
    ("pickle.loads", "", "python.pickle", "CRITICAL"),
    ("md5", "", "python.weak-hash", "WARNING"),
]


def main(argv):
    if "--garbage" in argv:
        print("this is not json")
        return 0
    code = int(argv[argv.index("--exit") + 1]) if "--exit" in argv else None
    path = argv[-1]
    results = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            for needle, extra, rule, sev in RULES:
                if needle in line and extra in line:
                    results.append({"check_id": rule, "start": {"line": n}, "extra": {"severity": sev, "message": rule}})
    print(json.dumps({"results": results, "errors": []}))
    if code is not None:
        return code
    return 1 if results else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
